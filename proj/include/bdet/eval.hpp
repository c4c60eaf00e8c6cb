#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "bdet/boxes.hpp"
#include "bdet/config.hpp"
#include "bdet/detector.hpp"

namespace bdet {

// Greedy per-class suppression by descending score (ties keep the lower
// index); survivors have pairwise IoU <= thresh within a class.
std::vector<Detection> nms(const std::vector<Detection>& detections,
                           float iou_thresh);

inline const std::array<double, 6> kApThresholds = {0.5, 0.6, 0.7,
                                                    0.75, 0.8, 0.9};
inline const std::array<double, 5> kIouBuckets = {0.5, 0.6, 0.7, 0.8, 0.9};

struct EvalReport {
  std::array<double, 6> ap{};            // per IoU threshold, class-averaged
  double mean_ap = 0.0;                  // over thresholds and classes
  std::map<int, double> per_class_ap;    // threshold-averaged, per class
  std::array<long, 5> iou_bucket_counts{};  // detections by best-IoU bucket
  long n_detections = 0;
  long n_ground_truth = 0;
};

// 101-point interpolated AP with greedy score-ordered matching; every ground
// truth is matched at most once per threshold.
EvalReport evaluate(const std::vector<std::vector<Detection>>& detections,
                    const std::vector<std::vector<GtObject>>& ground_truth);

// Score/box readout of one image slot of a head output: coarse uses the
// first-stage score and box, refined multiplies in the border score and
// applies the offset combination.
struct ImageDetections {
  std::vector<Detection> coarse;
  std::vector<Detection> refined;
};

template <class T>
ImageDetections decode_detections(const HeadOutputs<T>& out, int b,
                                  const Config& cfg) {
  ImageDetections dets;
  const int kk = out.coarse_cls.channels();
  const int fh = out.coarse_cls.height();
  const int fw = out.coarse_cls.width();
  const T sigma = static_cast<T>(cfg.sigma);
  for (int i = 0; i < fh; ++i) {
    for (int j = 0; j < fw; ++j) {
      const std::array<T, 4> coarse_box = {
          out.coarse_boxes.at(b, 0, i, j), out.coarse_boxes.at(b, 1, i, j),
          out.coarse_boxes.at(b, 2, i, j), out.coarse_boxes.at(b, 3, i, j)};
      const std::array<T, 4> delta = {
          out.border_delta.at(b, 0, i, j), out.border_delta.at(b, 1, i, j),
          out.border_delta.at(b, 2, i, j), out.border_delta.at(b, 3, i, j)};
      const std::array<T, 4> refined_box =
          combine_boxes(coarse_box, delta, sigma);
      for (int k = 0; k < kk; ++k) {
        const T pc = sigmoid(out.coarse_cls.at(b, k, i, j));
        const T pb = sigmoid(out.border_cls.at(b, k, i, j));
        const T ps = combine_scores(pc, pb);
        if (static_cast<double>(pc) > cfg.score_thresh) {
          Detection d;
          d.cls = k;
          d.score = static_cast<float>(pc);
          for (int q = 0; q < 4; ++q)
            d.box[q] = static_cast<float>(coarse_box[q]);
          dets.coarse.push_back(d);
        }
        if (static_cast<double>(ps) > cfg.score_thresh) {
          Detection d;
          d.cls = k;
          d.score = static_cast<float>(ps);
          for (int q = 0; q < 4; ++q)
            d.box[q] = static_cast<float>(refined_box[q]);
          dets.refined.push_back(d);
        }
      }
    }
  }
  return dets;
}

// Full single-image pipeline: forward, decode, NMS on both readouts.
ImageDetections detect_image(const HeadParams<float>& params,
                             const Config& cfg, const Tensor4f& image);

// Batch inference over a dataset (parallel over images).
std::vector<ImageDetections> detect_dataset(
    const HeadParams<float>& params, const Config& cfg,
    const std::vector<Tensor4f>& images, int threads);

}  // namespace bdet
