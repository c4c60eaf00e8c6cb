#include "bdet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "bdet/checkpoint.hpp"
#include "bdet/parallel.hpp"
#include "bdet/param_refs.hpp"
#include "bdet/targets.hpp"

namespace fs = std::filesystem;

namespace bdet {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

Trainer::Trainer(const Config& cfg, Dataset train_ds, Dataset val_ds)
    : cfg_(cfg),
      train_(std::move(train_ds)),
      val_(std::move(val_ds)),
      rng_(cfg.seed) {
  cfg_.validate();
  if (train_.size() == 0) throw std::runtime_error("trainer: empty dataset");
  if (train_.image_size != cfg_.image_size)
    throw std::runtime_error("trainer: dataset image size " +
                             std::to_string(train_.image_size) +
                             " does not match config " +
                             std::to_string(cfg_.image_size));
  Rng init_rng = rng_.fork(1);
  params_ = make_head_params<float>(cfg_, init_rng);
  workspaces_.assign(cfg_.train.batch, params_);
  for (const auto& r : collect_params(params_))
    momentum_.push_back(std::vector<float>(r.n, 0.0f));

  const int fs = cfg_.feat_size();
  coarse_cache_.reserve(train_.size());
  for (const DatasetRecord& rec : train_.records)
    coarse_cache_.push_back(
        assign_coarse_targets<float>(fs, fs, cfg_.stride(), rec.objects));
}

void Trainer::reshuffle() {
  const int n = static_cast<int>(train_.size());
  perm_.resize(n);
  for (int i = 0; i < n; ++i) perm_[i] = i;
  for (int i = n - 1; i >= 1; --i)
    std::swap(perm_[i], perm_[rng_.uniform_int(i + 1)]);
  cursor_ = 0;
}

std::vector<int> Trainer::next_batch() {
  const std::size_t b = static_cast<std::size_t>(cfg_.train.batch);
  if (perm_.empty() || cursor_ + b > perm_.size()) reshuffle();
  std::vector<int> batch(perm_.begin() + cursor_, perm_.begin() + cursor_ + b);
  cursor_ += b;
  return batch;
}

double Trainer::lr_at(int iter) const {
  double lr = cfg_.train.lr;
  for (int s : cfg_.train.lr_steps)
    if (iter > s) lr *= cfg_.train.lr_decay;
  return lr;
}

StepStats Trainer::step(const std::vector<int>& batch, int iter) {
  const double t0 = now_seconds();
  const int bsz = static_cast<int>(batch.size());
  const int threads = cfg_.train.threads;

  struct SampleWork {
    HeadCache<float> cache;
    HeadOutputs<float> out;
    BorderTargets<float> border;
    LossTerms<float> terms;
  };
  std::vector<SampleWork> work(bsz);

  parallel_for(bsz, threads, [&](int s) {
    const int idx = batch[s];
    work[s].out =
        head_forward(params_, cfg_, train_.images[idx], &work[s].cache);
    work[s].border = assign_border_targets(
        work[s].out.coarse_boxes, train_.records[idx].objects,
        static_cast<float>(cfg_.iou_assign_thresh),
        static_cast<float>(cfg_.sigma));
  });

  LossNormalizers norm;
  for (int s = 0; s < bsz; ++s) {
    norm.n_pos_coarse += coarse_cache_[batch[s]].n_pos;
    norm.n_pos_border += work[s].border.n_pos;
  }

  if (static_cast<int>(workspaces_.size()) < bsz)
    workspaces_.assign(bsz, params_);
  parallel_for(bsz, threads, [&](int s) {
    workspaces_[s] = params_;
    workspaces_[s].zero_grads();
    HeadGrads<float> grads;
    work[s].terms = total_loss(work[s].out, coarse_cache_[batch[s]],
                               work[s].border, cfg_, &grads, &norm);
    head_backward(grads, work[s].cache, cfg_, workspaces_[s]);
  });

  params_.zero_grads();
  auto master = collect_params(params_);
  for (int s = 0; s < bsz; ++s) {
    auto ws = collect_params(workspaces_[s]);
    for (std::size_t r = 0; r < master.size(); ++r)
      for (std::size_t i = 0; i < master[r].n; ++i)
        master[r].grad[i] += ws[r].grad[i];
  }

  StepStats stats;
  for (int s = 0; s < bsz; ++s) {
    stats.loss.total += work[s].terms.total;
    stats.loss.coarse_cls += work[s].terms.coarse_cls;
    stats.loss.coarse_reg += work[s].terms.coarse_reg;
    stats.loss.border_cls += work[s].terms.border_cls;
    stats.loss.border_reg += work[s].terms.border_reg;
  }
  stats.loss.n_pos_coarse = norm.n_pos_coarse;
  stats.loss.n_pos_border = norm.n_pos_border;

  stats.lr = lr_at(iter);
  const float lr = static_cast<float>(stats.lr);
  const float mu = static_cast<float>(cfg_.train.momentum);
  const float wd = static_cast<float>(cfg_.train.weight_decay);
  for (std::size_t r = 0; r < master.size(); ++r) {
    float* v = momentum_[r].data();
    const float decay = master[r].decay ? wd : 0.0f;
    for (std::size_t i = 0; i < master[r].n; ++i) {
      const float g = master[r].grad[i] + decay * master[r].data[i];
      v[i] = mu * v[i] + g;
      master[r].data[i] -= lr * v[i];
    }
  }

  stats.seconds = now_seconds() - t0;
  return stats;
}

std::pair<EvalReport, EvalReport> Trainer::eval_val() const {
  if (val_.size() == 0)
    throw std::runtime_error("trainer: no validation dataset");
  std::vector<ImageDetections> dets =
      detect_dataset(params_, cfg_, val_.images, cfg_.train.threads);
  std::vector<std::vector<Detection>> coarse(dets.size()), refined(dets.size());
  std::vector<std::vector<GtObject>> gts(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    coarse[i] = dets[i].coarse;
    refined[i] = dets[i].refined;
    gts[i] = val_.records[i].objects;
  }
  return {evaluate(coarse, gts), evaluate(refined, gts)};
}

TrainResult Trainer::run(const std::string& out_dir) {
  std::ofstream metrics, eval_log;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    metrics.open(fs::path(out_dir) / "metrics.csv");
    metrics << "iter,total,coarse_cls,coarse_reg,border_cls,border_reg,"
               "lr,n_pos_coarse,n_pos_border,seconds\n";
    eval_log.open(fs::path(out_dir) / "eval.csv");
    eval_log << "iter,mode,mean_ap,ap50,ap60,ap70,ap75,ap80,ap90\n";
  }
  auto log_eval = [&](int iter, const char* mode, const EvalReport& r) {
    if (!eval_log.is_open()) return;
    eval_log << iter << "," << mode << "," << r.mean_ap;
    for (double a : r.ap) eval_log << "," << a;
    eval_log << "\n" << std::flush;
  };

  TrainResult result;
  const double t0 = now_seconds();
  for (int iter = 1; iter <= cfg_.train.iters; ++iter) {
    const std::vector<int> batch = next_batch();
    const StepStats stats = step(batch, iter);
    result.loss_curve.push_back(static_cast<float>(stats.loss.total));
    if (metrics.is_open() &&
        (iter % cfg_.train.log_every == 0 || iter == 1 ||
         iter == cfg_.train.iters)) {
      metrics << iter << "," << stats.loss.total << ","
              << stats.loss.coarse_cls << "," << stats.loss.coarse_reg << ","
              << stats.loss.border_cls << "," << stats.loss.border_reg << ","
              << stats.lr << "," << stats.loss.n_pos_coarse << ","
              << stats.loss.n_pos_border << "," << stats.seconds << "\n"
              << std::flush;
    }
    for (int snap : cfg_.train.snapshot_iters) {
      if (iter == snap && !out_dir.empty()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "ckpt_iter_%06d.bdet", iter);
        save_head_checkpoint(params_, cfg_, (fs::path(out_dir) / buf).string());
      }
    }
    const bool do_eval =
        val_.size() > 0 && cfg_.train.eval_every > 0 &&
        (iter % cfg_.train.eval_every == 0 || iter == cfg_.train.iters);
    if (do_eval) {
      auto [coarse, refined] = eval_val();
      log_eval(iter, "coarse", coarse);
      log_eval(iter, "refined", refined);
      if (iter == cfg_.train.iters) {
        result.final_coarse = coarse;
        result.final_refined = refined;
        result.has_eval = true;
      }
    }
  }
  result.seconds = now_seconds() - t0;
  if (!out_dir.empty())
    save_head_checkpoint(params_, cfg_, (fs::path(out_dir) / "model.bdet").string());
  return result;
}

TrainResult run_training(const Config& cfg, const std::string& data_dir,
                         const std::string& out_dir) {
  Dataset train_ds = load_dataset((fs::path(data_dir) / "train").string());
  Dataset val_ds;
  const fs::path val_path = fs::path(data_dir) / "val";
  if (fs::exists(val_path / "manifest.json"))
    val_ds = load_dataset(val_path.string());
  Trainer trainer(cfg, std::move(train_ds), std::move(val_ds));
  return trainer.run(out_dir);
}

}  // namespace bdet
