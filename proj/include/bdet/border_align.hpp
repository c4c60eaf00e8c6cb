#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "bdet/layers.hpp"
#include "bdet/tensor.hpp"

namespace bdet {

// Border index convention, matching the channel-block order of the
// border-sensitive feature maps: (single point, left, top, right, bottom).
enum class Border : int { Left = 0, Top = 1, Right = 2, Bottom = 3 };

enum class BorderAggregate { Max, Avg };

// pool_size == 0 is the iterative-refinement ablation mode: no border
// sampling, every block passes through at its own grid point.
struct PoolConfig {
  int pool_size = 10;
  BorderAggregate aggregate = BorderAggregate::Max;

  void validate() const {
    if (pool_size < 0)
      throw std::invalid_argument("PoolConfig: pool_size must be >= 0");
  }
};

// Sample k of N on one border of (x0, y0, x1, y1). Samples are spaced at
// k/N of the span, so the far endpoint is never hit (last sample lands at
// (N-1)/N).
template <class T>
std::array<T, 2> border_sample_coords(const std::array<T, 4>& box,
                                      Border border, int k, int n) {
  const T w = box[2] - box[0];
  const T h = box[3] - box[1];
  const T tk = static_cast<T>(k);
  const T tn = static_cast<T>(n);
  switch (border) {
    case Border::Left:
      return {box[0], box[1] + tk * h / tn};
    case Border::Top:
      return {box[0] + tk * w / tn, box[1]};
    case Border::Right:
      return {box[2], box[1] + tk * h / tn};
    case Border::Bottom:
      return {box[0] + tk * w / tn, box[3]};
  }
  throw std::invalid_argument("border_sample_coords: bad border");
}

// Which of the N samples won each pooled slot, with its border coordinates
// (as produced by the sampling formula, before clamping). Drives backward
// and the extreme-point analysis.
template <class T>
struct ArgmaxRecord {
  int batch = 0, channels = 0, height = 0, width = 0;  // channels per block
  PoolConfig cfg;
  std::vector<std::int32_t> k;
  std::vector<T> sx, sy;

  std::size_t slot(int b, int border, int c, int y, int x) const {
    return (((static_cast<std::size_t>(b) * 4 + border) * channels + c) *
                height +
            y) *
               width +
           x;
  }
  std::size_t n_slots() const {
    return static_cast<std::size_t>(batch) * 4 * channels * height * width;
  }
};

template <class T>
struct BorderAlignResult {
  Tensor4<T> output;
  ArgmaxRecord<T> record;
};

namespace detail {

template <class T>
inline std::array<T, 4> box_at(const Tensor4<T>& boxes, int b, int y, int x) {
  return {boxes.at(b, 0, y, x), boxes.at(b, 1, y, x), boxes.at(b, 2, y, x),
          boxes.at(b, 3, y, x)};
}

}  // namespace detail

// Channel-wise border pooling. Input has 5C channels in block order
// (single point, left, top, right, bottom); block 0 is copied through,
// blocks 1-4 pool N bilinear samples along the matching border of the box
// predicted at each location. `boxes` is (batch, 4, H, W) as (x0, y0, x1, y1)
// in continuous feature-map coordinates.
template <class T>
BorderAlignResult<T> border_align_forward(const Tensor4<T>& input,
                                          const Tensor4<T>& boxes,
                                          const PoolConfig& cfg) {
  cfg.validate();
  if (input.channels() % 5 != 0)
    throw std::invalid_argument(
        "border_align: channel count must be divisible by 5, got " +
        std::to_string(input.channels()));
  if (boxes.channels() != 4)
    throw std::invalid_argument("border_align: boxes must have 4 channels");
  if (boxes.batch() != input.batch() || boxes.height() != input.height() ||
      boxes.width() != input.width())
    throw std::invalid_argument(
        "border_align: boxes not spatially aligned with input");

  const int c_block = input.channels() / 5;
  const int h = input.height(), w = input.width();
  const int n = cfg.pool_size;

  BorderAlignResult<T> res;
  res.output = Tensor4<T>::zeros_like(input);
  res.record.batch = input.batch();
  res.record.channels = c_block;
  res.record.height = h;
  res.record.width = w;
  res.record.cfg = cfg;
  res.record.k.assign(res.record.n_slots(), -1);
  res.record.sx.assign(res.record.n_slots(), T(0));
  res.record.sy.assign(res.record.n_slots(), T(0));

  for (int b = 0; b < input.batch(); ++b) {
    // single-point block passes through untouched
    std::memcpy(res.output.plane(b, 0), input.plane(b, 0),
                sizeof(T) * static_cast<std::size_t>(c_block) * h * w);

    for (int border = 0; border < 4; ++border) {
      for (int c = 0; c < c_block; ++c) {
        const int ch = (border + 1) * c_block + c;
        const T* ip = input.plane(b, ch);
        T* op = res.output.plane(b, ch);
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const std::size_t s = res.record.slot(b, border, c, y, x);
            if (n == 0) {
              // pass-through refinement: sample the point itself
              const T v = ip[y * w + x];
              op[y * w + x] = v;
              res.record.k[s] = 0;
              res.record.sx[s] = static_cast<T>(x);
              res.record.sy[s] = static_cast<T>(y);
              continue;
            }
            const std::array<T, 4> box = detail::box_at(boxes, b, y, x);
            if (cfg.aggregate == BorderAggregate::Avg) {
              T acc = T(0);
              for (int k = 0; k < n; ++k) {
                const auto pt = border_sample_coords(
                    box, static_cast<Border>(border), k, n);
                acc += detail::sample_plane(ip, h, w, pt[0], pt[1]);
              }
              op[y * w + x] = acc / static_cast<T>(n);
              continue;
            }
            T best = T(0);
            int best_k = -1;
            std::array<T, 2> best_pt{T(0), T(0)};
            for (int k = 0; k < n; ++k) {
              const auto pt =
                  border_sample_coords(box, static_cast<Border>(border), k, n);
              const T v = detail::sample_plane(ip, h, w, pt[0], pt[1]);
              if (best_k < 0 || v > best) {  // ties keep the lowest k
                best = v;
                best_k = k;
                best_pt = pt;
              }
            }
            op[y * w + x] = best;
            res.record.k[s] = best_k;
            res.record.sx[s] = best_pt[0];
            res.record.sy[s] = best_pt[1];
          }
        }
      }
    }
  }
  return res;
}

// Routes upstream gradients back onto the input feature map. Pooled slots
// scatter to the four grid neighbors of their winning sample; block 0 passes
// through. Box coordinates receive no gradient.
template <class T>
Tensor4<T> border_align_backward(const Tensor4<T>& grad_out,
                                 const ArgmaxRecord<T>& rec,
                                 const Tensor4<T>& boxes,
                                 const std::array<int, 4>& input_shape) {
  if (grad_out.batch() != rec.batch || grad_out.height() != rec.height ||
      grad_out.width() != rec.width ||
      grad_out.channels() != rec.channels * 5)
    throw std::invalid_argument(
        "border_align_backward: grad shape does not match record");
  if (grad_out.shape() != input_shape)
    throw std::invalid_argument(
        "border_align_backward: input_shape mismatch");
  if (boxes.batch() != rec.batch || boxes.height() != rec.height ||
      boxes.width() != rec.width || boxes.channels() != 4)
    throw std::invalid_argument("border_align_backward: boxes shape mismatch");

  const int c_block = rec.channels;
  const int h = rec.height, w = rec.width;
  const int n = rec.cfg.pool_size;
  Tensor4<T> grad_in(input_shape[0], input_shape[1], input_shape[2],
                     input_shape[3]);

  for (int b = 0; b < rec.batch; ++b) {
    const T* gp0 = grad_out.plane(b, 0);
    T* gi0 = grad_in.plane(b, 0);
    const std::size_t block0 = static_cast<std::size_t>(c_block) * h * w;
    for (std::size_t i = 0; i < block0; ++i) gi0[i] += gp0[i];

    for (int border = 0; border < 4; ++border) {
      for (int c = 0; c < c_block; ++c) {
        const int ch = (border + 1) * c_block + c;
        const T* gp = grad_out.plane(b, ch);
        T* gi = grad_in.plane(b, ch);
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const T g = gp[y * w + x];
            if (g == T(0)) continue;
            if (n == 0) {
              gi[y * w + x] += g;
              continue;
            }
            if (rec.cfg.aggregate == BorderAggregate::Avg) {
              const std::array<T, 4> box = detail::box_at(boxes, b, y, x);
              const T share = g / static_cast<T>(n);
              for (int k = 0; k < n; ++k) {
                const auto pt = border_sample_coords(
                    box, static_cast<Border>(border), k, n);
                detail::splat_plane(gi, h, w, pt[0], pt[1], share);
              }
              continue;
            }
            const std::size_t s = rec.slot(b, border, c, y, x);
            detail::splat_plane(gi, h, w, rec.sx[s], rec.sy[s], g);
          }
        }
      }
    }
  }
  return grad_in;
}

}  // namespace bdet
