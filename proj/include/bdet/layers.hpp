#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bdet/rng.hpp"
#include "bdet/tensor.hpp"

namespace bdet {

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

// Learnable weights of a layer with paired gradient buffers. Gradients
// accumulate across backward calls and are zeroed between optimizer steps.
template <class T>
struct LayerParams {
  Tensor4<T> weight;  // (out_ch, in_ch, k, k)
  std::vector<T> bias;
  Tensor4<T> grad_weight;
  std::vector<T> grad_bias;

  void zero_grads() {
    grad_weight.fill(T(0));
    std::fill(grad_bias.begin(), grad_bias.end(), T(0));
  }
};

template <class T>
struct Conv2d {
  LayerParams<T> p;
  int kernel = 1;
  int stride = 1;
  int padding = 0;

  int in_channels() const { return p.weight.channels(); }
  int out_channels() const { return p.weight.batch(); }
};

template <class T>
Conv2d<T> make_conv(int in_ch, int out_ch, int kernel, int stride, int padding,
                    Rng& rng) {
  if (kernel != 1 && kernel != 3)
    throw std::invalid_argument("make_conv: kernel must be 1 or 3");
  Conv2d<T> c;
  c.kernel = kernel;
  c.stride = stride;
  c.padding = padding;
  c.p.weight = Tensor4<T>(out_ch, in_ch, kernel, kernel);
  c.p.bias.assign(out_ch, T(0));
  c.p.grad_weight = Tensor4<T>(out_ch, in_ch, kernel, kernel);
  c.p.grad_bias.assign(out_ch, T(0));
  // zero-mean uniform scaled by fan-in
  double a = 1.0 / std::sqrt(static_cast<double>(in_ch) * kernel * kernel);
  for (std::size_t i = 0; i < c.p.weight.size(); ++i)
    c.p.weight[i] = static_cast<T>(rng.uniform(-a, a));
  return c;
}

// Per-channel affine parameters of a normalization layer.
template <class T>
struct NormParams {
  std::vector<T> gamma, beta;
  std::vector<T> grad_gamma, grad_beta;

  static NormParams identity(int channels) {
    NormParams n;
    n.gamma.assign(channels, T(1));
    n.beta.assign(channels, T(0));
    n.grad_gamma.assign(channels, T(0));
    n.grad_beta.assign(channels, T(0));
    return n;
  }

  void zero_grads() {
    std::fill(grad_gamma.begin(), grad_gamma.end(), T(0));
    std::fill(grad_beta.begin(), grad_beta.end(), T(0));
  }
};

// ---------------------------------------------------------------------------
// Bilinear sampling
// ---------------------------------------------------------------------------

namespace detail {

// 2x2 interpolation on one spatial plane; coordinates are clamped to the
// valid rectangle, and the high taps collapse onto the edge cell at the
// boundary so the four weights always carry full mass.
template <class T>
inline T sample_plane(const T* plane, int h, int w, T x, T y) {
  x = std::clamp(x, T(0), static_cast<T>(w - 1));
  y = std::clamp(y, T(0), static_cast<T>(h - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, w - 1);
  int y1 = std::min(y0 + 1, h - 1);
  T fx = x - static_cast<T>(x0);
  T fy = y - static_cast<T>(y0);
  T top = (T(1) - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1];
  T bot = (T(1) - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1];
  return (T(1) - fy) * top + fy * bot;
}

// Scatters g to the four taps of (x, y), mirroring sample_plane.
template <class T>
inline void splat_plane(T* plane, int h, int w, T x, T y, T g) {
  x = std::clamp(x, T(0), static_cast<T>(w - 1));
  y = std::clamp(y, T(0), static_cast<T>(h - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, w - 1);
  int y1 = std::min(y0 + 1, h - 1);
  T fx = x - static_cast<T>(x0);
  T fy = y - static_cast<T>(y0);
  plane[y0 * w + x0] += g * (T(1) - fx) * (T(1) - fy);
  plane[y0 * w + x1] += g * fx * (T(1) - fy);
  plane[y1 * w + x0] += g * (T(1) - fx) * fy;
  plane[y1 * w + x1] += g * fx * fy;
}

}  // namespace detail

// Bilinear interpolation of the four grid neighbors of (x, y); out-of-range
// coordinates are clamped to the grid rectangle.
template <class T>
T bilinear_sample(const Tensor4<T>& input, int b, int c, T x, T y) {
  if (input.empty()) throw std::invalid_argument("bilinear_sample: empty input");
  if (b < 0 || b >= input.batch() || c < 0 || c >= input.channels())
    throw std::out_of_range("bilinear_sample: batch/channel index out of range");
  return detail::sample_plane(input.plane(b, c), input.height(), input.width(),
                              x, y);
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation), zero padding, kernel 1 or 3
// ---------------------------------------------------------------------------

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const Conv2d<T>& conv) {
  const int k = conv.kernel;
  if (k != 1 && k != 3)
    throw std::invalid_argument("conv2d: kernel must be 1 or 3");
  if (input.channels() != conv.in_channels())
    throw std::invalid_argument("conv2d: input channels " +
                                std::to_string(input.channels()) +
                                " do not match weight channels " +
                                std::to_string(conv.in_channels()));
  const int pad = conv.padding, stride = conv.stride;
  const int ih = input.height(), iw = input.width();
  const int oh = (ih + 2 * pad - k) / stride + 1;
  const int ow = (iw + 2 * pad - k) / stride + 1;
  const int ic = conv.in_channels(), oc = conv.out_channels();

  Tensor4<T> out(input.batch(), oc, oh, ow);
  for (int b = 0; b < input.batch(); ++b) {
    for (int o = 0; o < oc; ++o) {
      T* op = out.plane(b, o);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          T acc = conv.p.bias[o];
          for (int ci = 0; ci < ic; ++ci) {
            const T* ip = input.plane(b, ci);
            const T* wp = conv.p.weight.plane(o, ci);
            for (int ky = 0; ky < k; ++ky) {
              const int y = oy * stride + ky - pad;
              if (y < 0 || y >= ih) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int x = ox * stride + kx - pad;
                if (x < 0 || x >= iw) continue;
                acc += wp[ky * k + kx] * ip[y * iw + x];
              }
            }
          }
          op[oy * ow + ox] = acc;
        }
      }
    }
  }
  return out;
}

// Accumulates parameter grads into conv.p; writes grad_input when non-null.
template <class T>
void conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                     Conv2d<T>& conv, Tensor4<T>* grad_input) {
  const int k = conv.kernel, pad = conv.padding, stride = conv.stride;
  const int ih = input.height(), iw = input.width();
  const int oh = grad_out.height(), ow = grad_out.width();
  const int ic = conv.in_channels(), oc = conv.out_channels();
  if (grad_out.channels() != oc || grad_out.batch() != input.batch())
    throw std::invalid_argument("conv2d_backward: grad shape mismatch");
  if (grad_input) {
    *grad_input = Tensor4<T>::zeros_like(input);
  }

  for (int b = 0; b < input.batch(); ++b) {
    for (int o = 0; o < oc; ++o) {
      const T* gp = grad_out.plane(b, o);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const T g = gp[oy * ow + ox];
          conv.p.grad_bias[o] += g;
          for (int ci = 0; ci < ic; ++ci) {
            const T* ip = input.plane(b, ci);
            T* gw = conv.p.grad_weight.plane(o, ci);
            const T* wp = conv.p.weight.plane(o, ci);
            T* gi = grad_input ? grad_input->plane(b, ci) : nullptr;
            for (int ky = 0; ky < k; ++ky) {
              const int y = oy * stride + ky - pad;
              if (y < 0 || y >= ih) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int x = ox * stride + kx - pad;
                if (x < 0 || x >= iw) continue;
                gw[ky * k + kx] += g * ip[y * iw + x];
                if (gi) gi[y * iw + x] += g * wp[ky * k + kx];
              }
            }
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Instance normalization (per batch-channel plane)
// ---------------------------------------------------------------------------

template <class T>
struct InstanceNormCache {
  Tensor4<T> xhat;
  std::vector<T> inv_std;  // per (b, c) plane
  double eps = 0.0;
};

template <class T>
Tensor4<T> instance_norm_forward(const Tensor4<T>& input, double eps,
                                 const NormParams<T>* affine,
                                 InstanceNormCache<T>* cache) {
  const int m = input.height() * input.width();
  if (m <= 1)
    throw std::domain_error("instance_norm: plane must have H*W >= 2");
  if (affine && static_cast<int>(affine->gamma.size()) != input.channels())
    throw std::invalid_argument("instance_norm: affine channel mismatch");

  Tensor4<T> out = Tensor4<T>::zeros_like(input);
  Tensor4<T> xhat = Tensor4<T>::zeros_like(input);
  std::vector<T> inv_std(static_cast<std::size_t>(input.batch()) *
                         input.channels());

  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      const T* ip = input.plane(b, c);
      T* xp = xhat.plane(b, c);
      T* op = out.plane(b, c);
      T mean = T(0);
      for (int i = 0; i < m; ++i) mean += ip[i];
      mean /= static_cast<T>(m);
      T var = T(0);
      for (int i = 0; i < m; ++i) {
        const T d = ip[i] - mean;
        var += d * d;
      }
      var /= static_cast<T>(m);
      const T istd = T(1) / std::sqrt(var + static_cast<T>(eps));
      inv_std[static_cast<std::size_t>(b) * input.channels() + c] = istd;
      const T g = affine ? affine->gamma[c] : T(1);
      const T be = affine ? affine->beta[c] : T(0);
      for (int i = 0; i < m; ++i) {
        xp[i] = (ip[i] - mean) * istd;
        op[i] = g * xp[i] + be;
      }
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->eps = eps;
  }
  return out;
}

template <class T>
Tensor4<T> instance_norm_backward(const Tensor4<T>& grad_out,
                                  const InstanceNormCache<T>& cache,
                                  NormParams<T>* affine) {
  check_same_shape(grad_out, cache.xhat, "instance_norm_backward");
  const int m = grad_out.height() * grad_out.width();
  Tensor4<T> grad_in = Tensor4<T>::zeros_like(grad_out);

  for (int b = 0; b < grad_out.batch(); ++b) {
    for (int c = 0; c < grad_out.channels(); ++c) {
      const T* gp = grad_out.plane(b, c);
      const T* xp = cache.xhat.plane(b, c);
      T* op = grad_in.plane(b, c);
      const T istd =
          cache.inv_std[static_cast<std::size_t>(b) * grad_out.channels() + c];
      const T g = affine ? affine->gamma[c] : T(1);
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int i = 0; i < m; ++i) {
        sum_dy += gp[i];
        sum_dy_xhat += gp[i] * xp[i];
      }
      if (affine) {
        affine->grad_gamma[c] += sum_dy_xhat;
        affine->grad_beta[c] += sum_dy;
      }
      const T inv_m = T(1) / static_cast<T>(m);
      for (int i = 0; i < m; ++i) {
        op[i] = g * istd *
                (gp[i] - sum_dy * inv_m - xp[i] * sum_dy_xhat * inv_m);
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

template <class T>
Tensor4<T> relu_forward(const Tensor4<T>& input) {
  Tensor4<T> out = Tensor4<T>::zeros_like(input);
  for (std::size_t i = 0; i < input.size(); ++i)
    out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

// Masks by the sign of the forward input.
template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out,
                         const Tensor4<T>& forward_input) {
  check_same_shape(grad_out, forward_input, "relu_backward");
  Tensor4<T> grad_in = Tensor4<T>::zeros_like(grad_out);
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    grad_in[i] = forward_input[i] > T(0) ? grad_out[i] : T(0);
  return grad_in;
}

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
T softplus(T x) {
  if (x > T(20)) return x;
  if (x < T(-20)) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace bdet
