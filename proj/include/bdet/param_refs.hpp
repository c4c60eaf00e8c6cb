#pragma once

#include <array>
#include <string>
#include <vector>

#include "bdet/detector.hpp"

namespace bdet {

// Flat view over every learnable value of a head: optimizer steps, checkpoint
// serialization, and finite-difference sweeps all walk this list.
template <class T>
struct ParamRef {
  std::string name;
  T* data = nullptr;
  T* grad = nullptr;
  std::size_t n = 0;
  std::array<int, 4> shape{};  // vectors are exposed as (1, C, 1, 1)
  bool decay = true;           // weight decay applies (off for bias/affine)
};

namespace detail {

template <class T>
void add_conv(std::vector<ParamRef<T>>& out, const std::string& name,
              Conv2d<T>& c) {
  out.push_back({name + ".weight", c.p.weight.data(), c.p.grad_weight.data(),
                 c.p.weight.size(), c.p.weight.shape(), true});
  out.push_back({name + ".bias", c.p.bias.data(), c.p.grad_bias.data(),
                 c.p.bias.size(),
                 {1, static_cast<int>(c.p.bias.size()), 1, 1},
                 false});
}

template <class T>
void add_norm(std::vector<ParamRef<T>>& out, const std::string& name,
              NormParams<T>& n) {
  out.push_back({name + ".gamma", n.gamma.data(), n.grad_gamma.data(),
                 n.gamma.size(),
                 {1, static_cast<int>(n.gamma.size()), 1, 1},
                 false});
  out.push_back({name + ".beta", n.beta.data(), n.grad_beta.data(),
                 n.beta.size(),
                 {1, static_cast<int>(n.beta.size()), 1, 1},
                 false});
}

template <class T>
void add_bam(std::vector<ParamRef<T>>& out, const std::string& name,
             BamParams<T>& b) {
  add_conv(out, name + ".expand", b.expand);
  add_norm(out, name + ".norm", b.norm);
  add_conv(out, name + ".reduce", b.reduce);
}

}  // namespace detail

template <class T>
std::vector<ParamRef<T>> collect_params(HeadParams<T>& p) {
  std::vector<ParamRef<T>> out;
  for (int s = 0; s < 3; ++s)
    detail::add_conv(out, "backbone." + std::to_string(s), p.backbone[s]);
  detail::add_conv(out, "tower", p.tower);
  detail::add_conv(out, "cls_feat", p.cls_feat);
  detail::add_conv(out, "reg_feat", p.reg_feat);
  detail::add_conv(out, "coarse_cls", p.coarse_cls);
  detail::add_conv(out, "coarse_reg", p.coarse_reg);
  detail::add_bam(out, "bam_cls", p.bam_cls);
  detail::add_bam(out, "bam_reg", p.bam_reg);
  detail::add_conv(out, "border_cls", p.border_cls);
  detail::add_conv(out, "border_reg", p.border_reg);
  return out;
}

template <class T>
std::size_t total_param_count(HeadParams<T>& p) {
  std::size_t n = 0;
  for (const auto& r : collect_params(p)) n += r.n;
  return n;
}

}  // namespace bdet
