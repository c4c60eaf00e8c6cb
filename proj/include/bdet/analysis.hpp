#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "bdet/config.hpp"
#include "bdet/dataset.hpp"
#include "bdet/detector.hpp"

namespace bdet {

// Signed distance along a border between the winning pooled sample and the
// ground-truth extreme point, normalized by the border length. Coordinates
// are in image space.
float extreme_point_distance(Border border, float sample_x, float sample_y,
                             const std::array<float, 2>& extreme,
                             const std::array<float, 4>& box);

struct ExtremeStats {
  double mean = 0.0;
  double mean_abs = 0.0;
  double variance = 0.0;
  long count = 0;
};

struct ExtremeReport {
  ExtremeStats overall;
  std::map<int, ExtremeStats> per_class;
  // histogram of the signed normalized distance over [-1, 1], 40 bins,
  // out-of-range samples land in the edge bins
  std::array<long, 40> histogram{};
  std::array<long, 40> histogram_per_border[4]{};
};

// Walks the regression-branch argmax records of border-positive locations
// and measures where pooling peaked relative to the annotated extremes.
ExtremeReport analyze_extreme_points(const HeadParams<float>& params,
                                     const Config& cfg, const Dataset& ds,
                                     int threads);

void write_extreme_report(const ExtremeReport& rep, const std::string& dir);

struct IouHistReport {
  std::array<long, 5> coarse{};   // buckets 0.5-0.6 ... 0.9-1.0
  std::array<long, 5> refined{};
  long coarse_total = 0;   // post-NMS detections, any IoU
  long refined_total = 0;
};

// Post-NMS detections per best-IoU bucket, first-stage vs refined readouts.
IouHistReport analyze_iou_histogram(const HeadParams<float>& params,
                                    const Config& cfg, const Dataset& ds,
                                    int threads);

void write_iou_report(const IouHistReport& rep, const std::string& dir);

}  // namespace bdet
