#include "bdet/config.hpp"

#include <fstream>

#include <json.hpp>

using nlohmann::json;

namespace bdet {

namespace {

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string config_to_json(const Config& cfg) {
  json j;
  j["classes"] = cfg.classes;
  j["c_cls"] = cfg.c_cls;
  j["c_reg"] = cfg.c_reg;
  j["image_size"] = cfg.image_size;
  j["pool_size"] = cfg.pool_size;
  j["sigma"] = cfg.sigma;
  j["iou_assign_thresh"] = cfg.iou_assign_thresh;
  j["nms_thresh"] = cfg.nms_thresh;
  j["score_thresh"] = cfg.score_thresh;
  j["focal_alpha"] = cfg.focal_alpha;
  j["focal_gamma"] = cfg.focal_gamma;
  j["instance_norm_eps"] = cfg.instance_norm_eps;
  j["seed"] = cfg.seed;
  j["precision"] = cfg.precision;
  j["train"] = {{"iters", cfg.train.iters},
                {"batch", cfg.train.batch},
                {"lr", cfg.train.lr},
                {"momentum", cfg.train.momentum},
                {"weight_decay", cfg.train.weight_decay},
                {"lr_steps", cfg.train.lr_steps},
                {"lr_decay", cfg.train.lr_decay},
                {"threads", cfg.train.threads},
                {"eval_every", cfg.train.eval_every},
                {"log_every", cfg.train.log_every},
                {"snapshot_iters", cfg.train.snapshot_iters}};
  return j.dump(2);
}

Config config_from_json(const std::string& text) {
  json j = json::parse(text);
  Config cfg;
  maybe(j, "classes", cfg.classes);
  maybe(j, "c_cls", cfg.c_cls);
  maybe(j, "c_reg", cfg.c_reg);
  maybe(j, "image_size", cfg.image_size);
  maybe(j, "pool_size", cfg.pool_size);
  maybe(j, "sigma", cfg.sigma);
  maybe(j, "iou_assign_thresh", cfg.iou_assign_thresh);
  maybe(j, "nms_thresh", cfg.nms_thresh);
  maybe(j, "score_thresh", cfg.score_thresh);
  maybe(j, "focal_alpha", cfg.focal_alpha);
  maybe(j, "focal_gamma", cfg.focal_gamma);
  maybe(j, "instance_norm_eps", cfg.instance_norm_eps);
  maybe(j, "seed", cfg.seed);
  maybe(j, "precision", cfg.precision);
  if (j.contains("train")) {
    const json& t = j.at("train");
    maybe(t, "iters", cfg.train.iters);
    maybe(t, "batch", cfg.train.batch);
    maybe(t, "lr", cfg.train.lr);
    maybe(t, "momentum", cfg.train.momentum);
    maybe(t, "weight_decay", cfg.train.weight_decay);
    maybe(t, "lr_steps", cfg.train.lr_steps);
    maybe(t, "lr_decay", cfg.train.lr_decay);
    maybe(t, "threads", cfg.train.threads);
    maybe(t, "eval_every", cfg.train.eval_every);
    maybe(t, "log_every", cfg.train.log_every);
    maybe(t, "snapshot_iters", cfg.train.snapshot_iters);
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return config_from_json(text);
}

void save_config(const Config& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config: " + path);
  os << config_to_json(cfg) << "\n";
}

}  // namespace bdet
