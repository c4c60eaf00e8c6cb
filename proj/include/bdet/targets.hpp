#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "bdet/boxes.hpp"
#include "bdet/tensor.hpp"

namespace bdet {

// Per-location coarse assignments over a (H, W) grid. Class 0 is background;
// class c+1 marks an object of class c. Entries are row-major over (b, y, x).
template <class T>
struct CoarseTargets {
  std::vector<int> cls;
  std::vector<std::array<T, 4>> dist;    // l,t,r,b where positive
  std::vector<std::array<T, 4>> gt_box;  // matched box where positive
  int n_pos = 0;
};

// A point is positive for the smallest-area ground-truth box containing it.
template <class T>
CoarseTargets<T> assign_coarse_targets(int feat_h, int feat_w, int stride,
                                       const std::vector<GtObject>& gts,
                                       int batch = 1) {
  CoarseTargets<T> t;
  const std::size_t n = static_cast<std::size_t>(batch) * feat_h * feat_w;
  t.cls.assign(n, 0);
  t.dist.assign(n, {T(0), T(0), T(0), T(0)});
  t.gt_box.assign(n, {T(0), T(0), T(0), T(0)});
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < feat_h; ++i) {
      for (int j = 0; j < feat_w; ++j) {
        const T cx = (static_cast<T>(j) + T(0.5)) * static_cast<T>(stride);
        const T cy = (static_cast<T>(i) + T(0.5)) * static_cast<T>(stride);
        T best_area = std::numeric_limits<T>::max();
        int best = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          const auto& box = gts[g].box;
          if (cx < box[0] || cx > box[2] || cy < box[1] || cy > box[3])
            continue;
          const T area = (static_cast<T>(box[2]) - box[0]) *
                         (static_cast<T>(box[3]) - box[1]);
          if (area < best_area) {
            best_area = area;
            best = static_cast<int>(g);
          }
        }
        if (best < 0) continue;
        const std::size_t idx =
            (static_cast<std::size_t>(b) * feat_h + i) * feat_w + j;
        const auto& box = gts[best].box;
        t.cls[idx] = gts[best].cls + 1;
        t.dist[idx] = {cx - static_cast<T>(box[0]), cy - static_cast<T>(box[1]),
                       static_cast<T>(box[2]) - cx,
                       static_cast<T>(box[3]) - cy};
        t.gt_box[idx] = {static_cast<T>(box[0]), static_cast<T>(box[1]),
                         static_cast<T>(box[2]), static_cast<T>(box[3])};
        ++t.n_pos;
      }
    }
  }
  return t;
}

// Border-stage assignments: offsets toward the best-IoU ground truth where
// that IoU clears the threshold.
template <class T>
struct BorderTargets {
  std::vector<int> cls;
  std::vector<std::array<T, 4>> delta;
  std::vector<int> gt_index;  // -1 where background
  int n_pos = 0;
};

template <class T>
BorderTargets<T> assign_border_targets(const Tensor4<T>& coarse_boxes,
                                       const std::vector<GtObject>& gts,
                                       T iou_thresh, T sigma) {
  const int fb = coarse_boxes.batch();
  const int fh = coarse_boxes.height();
  const int fw = coarse_boxes.width();
  BorderTargets<T> t;
  const std::size_t n = static_cast<std::size_t>(fb) * fh * fw;
  t.cls.assign(n, 0);
  t.delta.assign(n, {T(0), T(0), T(0), T(0)});
  t.gt_index.assign(n, -1);
  for (int b = 0; b < fb; ++b) {
    for (int i = 0; i < fh; ++i) {
      for (int j = 0; j < fw; ++j) {
        const std::array<T, 4> box = {
            coarse_boxes.at(b, 0, i, j), coarse_boxes.at(b, 1, i, j),
            coarse_boxes.at(b, 2, i, j), coarse_boxes.at(b, 3, i, j)};
        T best_iou = T(0);
        int best = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          const std::array<T, 4> gt = {
              static_cast<T>(gts[g].box[0]), static_cast<T>(gts[g].box[1]),
              static_cast<T>(gts[g].box[2]), static_cast<T>(gts[g].box[3])};
          const T iou = box_iou(box, gt);
          if (iou > best_iou) {
            best_iou = iou;
            best = static_cast<int>(g);
          }
        }
        if (best < 0 || best_iou < iou_thresh) continue;
        const std::size_t idx =
            (static_cast<std::size_t>(b) * fh + i) * fw + j;
        const std::array<T, 4> gt = {
            static_cast<T>(gts[best].box[0]), static_cast<T>(gts[best].box[1]),
            static_cast<T>(gts[best].box[2]),
            static_cast<T>(gts[best].box[3])};
        t.cls[idx] = gts[best].cls + 1;
        t.delta[idx] = encode_offsets(box, gt, sigma);
        t.gt_index[idx] = best;
        ++t.n_pos;
      }
    }
  }
  return t;
}

}  // namespace bdet
