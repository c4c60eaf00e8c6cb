#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdet {

// Dense 4-D array, row-major (batch, channel, y, x). The universal value
// carrier of this library: float for training/inference, double for the
// verification suites.
template <class T>
class Tensor4 {
 public:
  Tensor4() = default;

  Tensor4(int b, int c, int h, int w, T fill = T(0))
      : b_(b), c_(c), h_(h), w_(w), data_(checked_size(b, c, h, w), fill) {}

  static Tensor4 zeros_like(const Tensor4& other) {
    return Tensor4(other.b_, other.c_, other.h_, other.w_);
  }

  int batch() const { return b_; }
  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::array<int, 4> shape() const { return {b_, c_, h_, w_}; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  std::size_t index(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * c_ + c) * h_ + y) * w_ + x;
  }

  T& at(int b, int c, int y, int x) { return data_[index(b, c, y, x)]; }
  const T& at(int b, int c, int y, int x) const {
    return data_[index(b, c, y, x)];
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Pointer to the (b, c) spatial plane.
  T* plane(int b, int c) { return data_.data() + index(b, c, 0, 0); }
  const T* plane(int b, int c) const { return data_.data() + index(b, c, 0, 0); }

  void fill(T v) { data_.assign(data_.size(), v); }

  bool same_shape(const Tensor4& o) const {
    return b_ == o.b_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <class U>
  Tensor4<U> cast() const {
    Tensor4<U> out(b_, c_, h_, w_);
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  static std::size_t checked_size(int b, int c, int h, int w) {
    if (b < 0 || c < 0 || h < 0 || w < 0)
      throw std::invalid_argument("Tensor4: negative dimension");
    return static_cast<std::size_t>(b) * c * h * w;
  }

  int b_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

inline std::string shape_str(const std::array<int, 4>& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" +
         std::to_string(s[2]) + "x" + std::to_string(s[3]);
}

template <class T>
void check_same_shape(const Tensor4<T>& a, const Tensor4<T>& b,
                      const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

}  // namespace bdet
