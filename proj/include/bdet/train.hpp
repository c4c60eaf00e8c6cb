#pragma once

#include <string>
#include <vector>

#include "bdet/config.hpp"
#include "bdet/dataset.hpp"
#include "bdet/detector.hpp"
#include "bdet/eval.hpp"
#include "bdet/losses.hpp"

namespace bdet {

struct StepStats {
  LossTerms<float> loss;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  double seconds = 0.0;
  std::vector<float> loss_curve;  // one entry per iteration
  EvalReport final_coarse, final_refined;
  bool has_eval = false;
};

// SGD training of the two-stage head on a synthetic shapes dataset. Batches
// are drawn from a seeded shuffle; evaluation and logging are driven by the
// config. Deterministic for a fixed seed regardless of thread count.
class Trainer {
 public:
  Trainer(const Config& cfg, Dataset train_ds, Dataset val_ds);

  std::vector<int> next_batch();
  StepStats step(const std::vector<int>& batch, int iter);
  double lr_at(int iter) const;

  // Full run: metrics CSVs, optional snapshots, final checkpoint. `out_dir`
  // may be empty to keep everything in memory.
  TrainResult run(const std::string& out_dir);

  HeadParams<float>& params() { return params_; }
  const Config& config() const { return cfg_; }
  const Dataset& train_data() const { return train_; }
  const Dataset& val_data() const { return val_; }

  // Coarse/refined val-set reports at the current parameters.
  std::pair<EvalReport, EvalReport> eval_val() const;

 private:
  void reshuffle();

  Config cfg_;
  Dataset train_, val_;
  HeadParams<float> params_;
  std::vector<HeadParams<float>> workspaces_;
  std::vector<std::vector<float>> momentum_;
  std::vector<CoarseTargets<float>> coarse_cache_;
  Rng rng_;
  std::vector<int> perm_;
  std::size_t cursor_ = 0;
};

// CLI entry: loads `data_dir`/train and `data_dir`/val, trains, writes
// artifacts into out_dir.
TrainResult run_training(const Config& cfg, const std::string& data_dir,
                         const std::string& out_dir);

}  // namespace bdet
