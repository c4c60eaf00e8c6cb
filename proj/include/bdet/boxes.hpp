#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace bdet {

// Boxes are (x0, y0, x1, y1), well-ordered unless stated otherwise.

template <class T>
T box_area(const std::array<T, 4>& b) {
  return (b[2] - b[0]) * (b[3] - b[1]);
}

template <class T>
T box_iou(const std::array<T, 4>& a, const std::array<T, 4>& b) {
  const T iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
  const T ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
  if (iw <= T(0) || ih <= T(0)) return T(0);
  const T inter = iw * ih;
  const T uni = box_area(a) + box_area(b) - inter;
  if (uni <= T(0)) return T(0);
  return inter / uni;
}

// A decoded per-point box plus which sides hit the image clamp (those sides
// pass no gradient).
template <class T>
struct DecodedBox {
  std::array<T, 4> box;
  std::array<bool, 4> clamped;
};

// FCOS-style decoding: the point (i, j) on a stride-s grid sits at image
// location ((j+0.5)s, (i+0.5)s); distances grow the box around it.
template <class T>
DecodedBox<T> decode_coarse(int i, int j, const std::array<T, 4>& ltrb,
                            int stride, T img_w, T img_h) {
  const T cx = (static_cast<T>(j) + T(0.5)) * static_cast<T>(stride);
  const T cy = (static_cast<T>(i) + T(0.5)) * static_cast<T>(stride);
  const T l = std::max(ltrb[0], T(0));
  const T t = std::max(ltrb[1], T(0));
  const T r = std::max(ltrb[2], T(0));
  const T b = std::max(ltrb[3], T(0));
  DecodedBox<T> d;
  const std::array<T, 4> raw = {cx - l, cy - t, cx + r, cy + b};
  const std::array<T, 2> lim_x = {T(0), img_w};
  const std::array<T, 2> lim_y = {T(0), img_h};
  for (int k = 0; k < 4; ++k) {
    const T lo = (k % 2 == 0) ? lim_x[0] : lim_y[0];
    const T hi = (k % 2 == 0) ? lim_x[1] : lim_y[1];
    d.box[k] = std::clamp(raw[k], lo, hi);
    d.clamped[k] = raw[k] < lo || raw[k] > hi;
  }
  return d;
}

// Offset targets: per-side displacement normalized by the coarse box extent
// and the variance factor sigma.
template <class T>
std::array<T, 4> encode_offsets(const std::array<T, 4>& coarse,
                                const std::array<T, 4>& target, T sigma) {
  const T w = coarse[2] - coarse[0];
  const T h = coarse[3] - coarse[1];
  return {(target[0] - coarse[0]) / (w * sigma),
          (target[1] - coarse[1]) / (h * sigma),
          (target[2] - coarse[2]) / (w * sigma),
          (target[3] - coarse[3]) / (h * sigma)};
}

// Applies predicted offsets to the coarse box; re-orders if inverted.
template <class T>
std::array<T, 4> combine_boxes(const std::array<T, 4>& coarse,
                               const std::array<T, 4>& delta, T sigma) {
  const T w = coarse[2] - coarse[0];
  const T h = coarse[3] - coarse[1];
  std::array<T, 4> out = {
      coarse[0] + delta[0] * w * sigma, coarse[1] + delta[1] * h * sigma,
      coarse[2] + delta[2] * w * sigma, coarse[3] + delta[3] * h * sigma};
  if (out[0] > out[2]) std::swap(out[0], out[2]);
  if (out[1] > out[3]) std::swap(out[1], out[3]);
  return out;
}

template <class T>
T combine_scores(T coarse_prob, T border_prob) {
  return coarse_prob * border_prob;
}

// Decoded (class, score, box) triple in image coordinates.
struct Detection {
  int cls = 0;
  float score = 0.0f;
  std::array<float, 4> box{0, 0, 0, 0};
};

// One annotated object: class, tight box, and the four border extreme points
// in (left, top, right, bottom) order.
struct GtObject {
  int cls = 0;
  std::array<float, 4> box{0, 0, 0, 0};
  std::array<std::array<float, 2>, 4> extremes{};
};

}  // namespace bdet
