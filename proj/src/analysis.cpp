#include "bdet/analysis.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bdet/eval.hpp"
#include "bdet/parallel.hpp"
#include "bdet/targets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bdet {

float extreme_point_distance(Border border, float sample_x, float sample_y,
                             const std::array<float, 2>& extreme,
                             const std::array<float, 4>& box) {
  const float w = box[2] - box[0];
  const float h = box[3] - box[1];
  if (border == Border::Left || border == Border::Right) {
    if (h <= 0.0f) return 0.0f;
    return (sample_y - extreme[1]) / h;
  }
  if (w <= 0.0f) return 0.0f;
  return (sample_x - extreme[0]) / w;
}

namespace {

struct Accum {
  double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0;
  long count = 0;
  void add(double d) {
    sum += d;
    sum_abs += std::abs(d);
    sum_sq += d * d;
    ++count;
  }
  ExtremeStats stats() const {
    ExtremeStats s;
    s.count = count;
    if (count == 0) return s;
    s.mean = sum / count;
    s.mean_abs = sum_abs / count;
    s.variance = sum_sq / count - s.mean * s.mean;
    return s;
  }
};

int histogram_bin(double d) {
  const int bin = static_cast<int>(std::floor((d + 1.0) * 20.0));
  return std::clamp(bin, 0, 39);
}

}  // namespace

ExtremeReport analyze_extreme_points(const HeadParams<float>& params,
                                     const Config& cfg, const Dataset& ds,
                                     int threads) {
  struct PerImage {
    Accum overall;
    std::map<int, Accum> per_class;
    std::array<long, 40> hist{};
    std::array<long, 40> hist_border[4]{};
  };
  std::vector<PerImage> partial(ds.size());

  const int stride = cfg.stride();
  parallel_for(static_cast<int>(ds.size()), threads, [&](int n) {
    HeadCache<float> cache;
    HeadOutputs<float> out = head_forward(params, cfg, ds.images[n], &cache);
    const BorderTargets<float> bt = assign_border_targets(
        out.coarse_boxes, ds.records[n].objects,
        static_cast<float>(cfg.iou_assign_thresh),
        static_cast<float>(cfg.sigma));
    const ArgmaxRecord<float>& rec = cache.bam_reg.record;
    const int fh = out.coarse_boxes.height();
    const int fw = out.coarse_boxes.width();
    PerImage& acc = partial[n];
    for (int i = 0; i < fh; ++i) {
      for (int j = 0; j < fw; ++j) {
        const std::size_t loc = static_cast<std::size_t>(i) * fw + j;
        if (bt.cls[loc] == 0) continue;
        const GtObject& gt = ds.records[n].objects[bt.gt_index[loc]];
        const std::array<float, 4> box = {
            out.coarse_boxes.at(0, 0, i, j), out.coarse_boxes.at(0, 1, i, j),
            out.coarse_boxes.at(0, 2, i, j), out.coarse_boxes.at(0, 3, i, j)};
        for (int border = 0; border < 4; ++border) {
          for (int c = 0; c < rec.channels; ++c) {
            const std::size_t s = rec.slot(0, border, c, i, j);
            // record coordinates are in feature space; map to image space
            const float sx = (rec.sx[s] + 0.5f) * static_cast<float>(stride);
            const float sy = (rec.sy[s] + 0.5f) * static_cast<float>(stride);
            const float d = extreme_point_distance(
                static_cast<Border>(border), sx, sy, gt.extremes[border], box);
            acc.overall.add(d);
            acc.per_class[gt.cls].add(d);
            const int bin = histogram_bin(d);
            ++acc.hist[bin];
            ++acc.hist_border[border][bin];
          }
        }
      }
    }
  });

  Accum overall;
  std::map<int, Accum> per_class;
  ExtremeReport rep;
  for (const PerImage& p : partial) {
    overall.sum += p.overall.sum;
    overall.sum_abs += p.overall.sum_abs;
    overall.sum_sq += p.overall.sum_sq;
    overall.count += p.overall.count;
    for (const auto& [cls, a] : p.per_class) {
      Accum& dst = per_class[cls];
      dst.sum += a.sum;
      dst.sum_abs += a.sum_abs;
      dst.sum_sq += a.sum_sq;
      dst.count += a.count;
    }
    for (int b = 0; b < 40; ++b) rep.histogram[b] += p.hist[b];
    for (int k = 0; k < 4; ++k)
      for (int b = 0; b < 40; ++b)
        rep.histogram_per_border[k][b] += p.hist_border[k][b];
  }
  rep.overall = overall.stats();
  for (const auto& [cls, a] : per_class) rep.per_class[cls] = a.stats();
  return rep;
}

void write_extreme_report(const ExtremeReport& rep, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream csv(fs::path(dir) / "extreme_hist.csv");
    csv << "border,bin_lo,bin_hi,count\n";
    const char* names[4] = {"left", "top", "right", "bottom"};
    for (int b = 0; b < 40; ++b) {
      csv << "all," << (b / 20.0 - 1.0) << "," << ((b + 1) / 20.0 - 1.0) << ","
          << rep.histogram[b] << "\n";
    }
    for (int k = 0; k < 4; ++k)
      for (int b = 0; b < 40; ++b)
        csv << names[k] << "," << (b / 20.0 - 1.0) << ","
            << ((b + 1) / 20.0 - 1.0) << "," << rep.histogram_per_border[k][b]
            << "\n";
  }
  json j;
  auto stats_json = [](const ExtremeStats& s) {
    return json{{"mean", s.mean},
                {"mean_abs", s.mean_abs},
                {"variance", s.variance},
                {"count", s.count}};
  };
  j["overall"] = stats_json(rep.overall);
  for (const auto& [cls, s] : rep.per_class)
    j["per_class"][std::to_string(cls)] = stats_json(s);
  std::ofstream os(fs::path(dir) / "extreme_summary.json");
  os << j.dump(2) << "\n";
}

IouHistReport analyze_iou_histogram(const HeadParams<float>& params,
                                    const Config& cfg, const Dataset& ds,
                                    int threads) {
  std::vector<ImageDetections> dets =
      detect_dataset(params, cfg, ds.images, threads);
  IouHistReport rep;
  auto bucketize = [&](const std::vector<Detection>& list,
                       const std::vector<GtObject>& gts,
                       std::array<long, 5>& buckets, long& total) {
    for (const Detection& d : list) {
      ++total;
      double best = 0.0;
      for (const GtObject& g : gts) {
        if (g.cls != d.cls) continue;
        best = std::max(best, static_cast<double>(box_iou(d.box, g.box)));
      }
      for (int b = 4; b >= 0; --b) {
        if (best >= kIouBuckets[b]) {
          ++buckets[b];
          break;
        }
      }
    }
  };
  for (std::size_t i = 0; i < dets.size(); ++i) {
    bucketize(dets[i].coarse, ds.records[i].objects, rep.coarse,
              rep.coarse_total);
    bucketize(dets[i].refined, ds.records[i].objects, rep.refined,
              rep.refined_total);
  }
  return rep;
}

void write_iou_report(const IouHistReport& rep, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream csv(fs::path(dir) / "iou_hist.csv");
    csv << "mode,bucket_lo,bucket_hi,count\n";
    for (int b = 0; b < 5; ++b)
      csv << "coarse," << kIouBuckets[b] << "," << (kIouBuckets[b] + 0.1)
          << "," << rep.coarse[b] << "\n";
    for (int b = 0; b < 5; ++b)
      csv << "refined," << kIouBuckets[b] << "," << (kIouBuckets[b] + 0.1)
          << "," << rep.refined[b] << "\n";
  }
  json j;
  j["coarse"] = rep.coarse;
  j["refined"] = rep.refined;
  j["coarse_total"] = rep.coarse_total;
  j["refined_total"] = rep.refined_total;
  std::ofstream os(fs::path(dir) / "iou_hist.json");
  os << j.dump(2) << "\n";
}

}  // namespace bdet
