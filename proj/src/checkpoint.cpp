#include "bdet/checkpoint.hpp"

#include <cstring>
#include <map>
#include <stdexcept>

#include "bdet/param_refs.hpp"
#include "bdet/rng.hpp"

namespace bdet {

namespace {

constexpr const char* kMetaName = "__meta__";

Tensor4f meta_tensor(const Config& cfg) {
  Tensor4f m(1, 7, 1, 1);
  m[0] = static_cast<float>(cfg.classes);
  m[1] = static_cast<float>(cfg.c_cls);
  m[2] = static_cast<float>(cfg.c_reg);
  m[3] = static_cast<float>(cfg.image_size);
  m[4] = static_cast<float>(cfg.pool_size);
  m[5] = static_cast<float>(cfg.sigma);
  m[6] = static_cast<float>(cfg.instance_norm_eps);
  return m;
}

void apply_meta(const Tensor4f& m, Config& cfg) {
  if (m.size() < 7) throw std::runtime_error("checkpoint: bad meta entry");
  cfg.classes = static_cast<int>(m[0]);
  cfg.c_cls = static_cast<int>(m[1]);
  cfg.c_reg = static_cast<int>(m[2]);
  cfg.image_size = static_cast<int>(m[3]);
  cfg.pool_size = static_cast<int>(m[4]);
  cfg.sigma = m[5];
  cfg.instance_norm_eps = m[6];
}

}  // namespace

void save_head_checkpoint(HeadParams<float>& params, const Config& cfg,
                          const std::string& path) {
  NamedTensors named;
  named.emplace_back(kMetaName, meta_tensor(cfg));
  for (const ParamRef<float>& r : collect_params(params)) {
    Tensor4f t(r.shape[0], r.shape[1], r.shape[2], r.shape[3]);
    std::memcpy(t.data(), r.data, r.n * sizeof(float));
    named.emplace_back(r.name, std::move(t));
  }
  save_checkpoint(named, path);
}

std::pair<HeadParams<float>, Config> load_head_checkpoint(
    const std::string& path, const Config* base) {
  NamedTensors named = load_checkpoint(path);
  std::map<std::string, const Tensor4f*> by_name;
  for (const auto& [name, t] : named) by_name[name] = &t;

  Config cfg = base ? *base : Config{};
  auto meta = by_name.find(kMetaName);
  if (meta == by_name.end())
    throw std::runtime_error("checkpoint: missing meta entry in " + path);
  apply_meta(*meta->second, cfg);

  Rng rng(0);
  HeadParams<float> params = make_head_params<float>(cfg, rng);
  for (const ParamRef<float>& r : collect_params(params)) {
    auto it = by_name.find(r.name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: missing tensor " + r.name);
    if (it->second->size() != r.n)
      throw std::runtime_error("checkpoint: size mismatch for " + r.name);
    std::memcpy(r.data, it->second->data(), r.n * sizeof(float));
  }
  return {std::move(params), cfg};
}

}  // namespace bdet
