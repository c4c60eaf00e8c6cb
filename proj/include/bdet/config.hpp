#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdet {

struct TrainConfig {
  int iters = 2000;
  int batch = 8;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<int> lr_steps = {1400, 1800};
  double lr_decay = 0.1;
  int threads = 4;
  int eval_every = 500;
  int log_every = 20;
  std::vector<int> snapshot_iters;
};

// Single source of model and pipeline settings; JSON round-trip lives in
// config.cpp.
struct Config {
  int classes = 2;
  int c_cls = 32;  // classification-branch width (2x the regression branch)
  int c_reg = 16;
  int image_size = 64;
  int pool_size = 10;
  double sigma = 0.5;
  double iou_assign_thresh = 0.6;
  double nms_thresh = 0.6;
  double score_thresh = 0.05;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double instance_norm_eps = 1e-5;
  std::uint64_t seed = 7;
  std::string precision = "f32";
  TrainConfig train;

  // Three stride-2 stages.
  int stride() const { return 8; }

  int feat_size() const { return image_size / stride(); }

  void validate() const {
    if (classes < 1) throw std::invalid_argument("config: classes must be >= 1");
    if (c_cls < 2 || c_reg < 1)
      throw std::invalid_argument("config: channel widths too small");
    if (image_size < 32)
      throw std::invalid_argument("config: image_size must be >= 32");
    if (image_size % stride() != 0)
      throw std::invalid_argument("config: image_size must be divisible by 8");
    if (pool_size < 0)
      throw std::invalid_argument("config: pool_size must be >= 0");
    if (precision != "f32" && precision != "f64")
      throw std::invalid_argument("config: precision must be f32 or f64");
  }
};

Config load_config(const std::string& path);
void save_config(const Config& cfg, const std::string& path);
std::string config_to_json(const Config& cfg);
Config config_from_json(const std::string& text);

}  // namespace bdet
