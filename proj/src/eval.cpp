#include "bdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "bdet/parallel.hpp"

namespace bdet {

std::vector<Detection> nms(const std::vector<Detection>& detections,
                           float iou_thresh) {
  std::vector<int> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (detections[a].score != detections[b].score)
      return detections[a].score > detections[b].score;
    return a < b;
  });
  std::vector<Detection> kept;
  for (int idx : order) {
    const Detection& d = detections[idx];
    bool suppressed = false;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      if (kept[k].cls != d.cls) continue;
      if (box_iou(kept[k].box, d.box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

namespace {

struct FlatDet {
  float score;
  int image, index, cls;
  std::array<float, 4> box;
};

// AP for one (class, IoU threshold): greedy matching in score order, then
// the 101-point interpolated area under precision-recall.
double ap_single(const std::vector<FlatDet>& dets,
                 const std::vector<std::vector<GtObject>>& gts, int cls,
                 double thresh, long npos) {
  if (npos == 0) return 0.0;
  std::vector<std::set<int>> matched(gts.size());
  std::vector<int> tp;
  tp.reserve(dets.size());
  for (const FlatDet& d : dets) {
    double best_iou = 0.0;
    int best_g = -1;
    const auto& img_gts = gts[d.image];
    for (std::size_t g = 0; g < img_gts.size(); ++g) {
      if (img_gts[g].cls != cls) continue;
      if (matched[d.image].count(static_cast<int>(g))) continue;
      const double iou = box_iou(d.box, img_gts[g].box);
      if (iou > best_iou) {
        best_iou = iou;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0 && best_iou >= thresh) {
      matched[d.image].insert(best_g);
      tp.push_back(1);
    } else {
      tp.push_back(0);
    }
  }
  // precision envelope sampled at recalls 0, 0.01, ..., 1
  std::vector<double> precision(tp.size()), recall(tp.size());
  long cum_tp = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    cum_tp += tp[i];
    precision[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(cum_tp) / static_cast<double>(npos);
  }
  double ap = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double target = r / 100.0;
    double best = 0.0;
    for (std::size_t i = 0; i < tp.size(); ++i)
      if (recall[i] >= target) best = std::max(best, precision[i]);
    ap += best;
  }
  return ap / 101.0;
}

}  // namespace

EvalReport evaluate(const std::vector<std::vector<Detection>>& detections,
                    const std::vector<std::vector<GtObject>>& ground_truth) {
  if (detections.size() != ground_truth.size())
    throw std::invalid_argument(
        "evaluate: detection and ground-truth image counts differ");

  std::vector<FlatDet> flat;
  for (std::size_t img = 0; img < detections.size(); ++img) {
    for (std::size_t i = 0; i < detections[img].size(); ++i) {
      const Detection& d = detections[img][i];
      flat.push_back({d.score, static_cast<int>(img), static_cast<int>(i),
                      d.cls, d.box});
    }
  }
  std::stable_sort(flat.begin(), flat.end(),
                   [](const FlatDet& a, const FlatDet& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.image != b.image) return a.image < b.image;
                     return a.index < b.index;
                   });

  std::set<int> classes;
  std::map<int, long> npos;
  long total_gt = 0;
  for (const auto& img_gts : ground_truth) {
    for (const GtObject& g : img_gts) {
      classes.insert(g.cls);
      ++npos[g.cls];
      ++total_gt;
    }
  }

  EvalReport rep;
  rep.n_ground_truth = total_gt;
  rep.n_detections = static_cast<long>(flat.size());

  std::map<int, std::vector<FlatDet>> by_class;
  for (const FlatDet& d : flat) by_class[d.cls].push_back(d);

  for (std::size_t ti = 0; ti < kApThresholds.size(); ++ti) {
    double sum = 0.0;
    for (int cls : classes)
      sum += ap_single(by_class[cls], ground_truth, cls, kApThresholds[ti],
                       npos[cls]);
    rep.ap[ti] = classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
  }
  for (int cls : classes) {
    double sum = 0.0;
    for (double t : kApThresholds)
      sum += ap_single(by_class[cls], ground_truth, cls, t, npos[cls]);
    rep.per_class_ap[cls] = sum / static_cast<double>(kApThresholds.size());
  }
  rep.mean_ap = std::accumulate(rep.ap.begin(), rep.ap.end(), 0.0) /
                static_cast<double>(rep.ap.size());

  // best same-class IoU per detection, bucketed
  for (const FlatDet& d : flat) {
    double best = 0.0;
    for (const GtObject& g : ground_truth[d.image]) {
      if (g.cls != d.cls) continue;
      best = std::max(best, static_cast<double>(box_iou(d.box, g.box)));
    }
    for (int bkt = static_cast<int>(kIouBuckets.size()) - 1; bkt >= 0; --bkt) {
      if (best >= kIouBuckets[bkt]) {
        ++rep.iou_bucket_counts[bkt];
        break;
      }
    }
  }
  return rep;
}

ImageDetections detect_image(const HeadParams<float>& params,
                             const Config& cfg, const Tensor4f& image) {
  HeadOutputs<float> out = head_forward(params, cfg, image, nullptr);
  ImageDetections dets = decode_detections(out, 0, cfg);
  dets.coarse = nms(dets.coarse, static_cast<float>(cfg.nms_thresh));
  dets.refined = nms(dets.refined, static_cast<float>(cfg.nms_thresh));
  return dets;
}

std::vector<ImageDetections> detect_dataset(
    const HeadParams<float>& params, const Config& cfg,
    const std::vector<Tensor4f>& images, int threads) {
  std::vector<ImageDetections> out(images.size());
  parallel_for(static_cast<int>(images.size()), threads,
               [&](int i) { out[i] = detect_image(params, cfg, images[i]); });
  return out;
}

}  // namespace bdet
