#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "bdet/bam.hpp"
#include "bdet/boxes.hpp"
#include "bdet/config.hpp"
#include "bdet/layers.hpp"
#include "bdet/tensor.hpp"

namespace bdet {

// Two-stage dense head on a single stride-8 feature level: a small conv
// backbone and shared tower, coarse classification + box regression, then
// border-pooled refinement of both branches.
template <class T>
struct HeadParams {
  std::array<Conv2d<T>, 3> backbone;  // stride-2 3x3 stages
  Conv2d<T> tower;
  Conv2d<T> cls_feat, reg_feat;
  Conv2d<T> coarse_cls, coarse_reg;
  BamParams<T> bam_cls, bam_reg;
  Conv2d<T> border_cls, border_reg;

  void zero_grads() {
    for (auto& c : backbone) c.p.zero_grads();
    tower.p.zero_grads();
    cls_feat.p.zero_grads();
    reg_feat.p.zero_grads();
    coarse_cls.p.zero_grads();
    coarse_reg.p.zero_grads();
    bam_cls.zero_grads();
    bam_reg.zero_grads();
    border_cls.p.zero_grads();
    border_reg.p.zero_grads();
  }
};

template <class T>
HeadParams<T> make_head_params(const Config& cfg, Rng& rng) {
  cfg.validate();
  const int cb1 = std::max(4, cfg.c_cls / 2);
  HeadParams<T> p;
  p.backbone[0] = make_conv<T>(1, cb1, 3, 2, 1, rng);
  p.backbone[1] = make_conv<T>(cb1, cfg.c_cls, 3, 2, 1, rng);
  p.backbone[2] = make_conv<T>(cfg.c_cls, cfg.c_cls, 3, 2, 1, rng);
  p.tower = make_conv<T>(cfg.c_cls, cfg.c_cls, 3, 1, 1, rng);
  p.cls_feat = make_conv<T>(cfg.c_cls, cfg.c_cls, 3, 1, 1, rng);
  p.reg_feat = make_conv<T>(cfg.c_cls, cfg.c_reg, 3, 1, 1, rng);
  p.coarse_cls = make_conv<T>(cfg.c_cls, cfg.classes, 1, 1, 0, rng);
  p.coarse_reg = make_conv<T>(cfg.c_reg, 4, 1, 1, 0, rng);
  p.bam_cls = make_bam<T>(cfg.c_cls, rng);
  p.bam_reg = make_bam<T>(cfg.c_reg, rng);
  p.border_cls = make_conv<T>(cfg.c_cls, cfg.classes, 1, 1, 0, rng);
  p.border_reg = make_conv<T>(cfg.c_reg, 4, 1, 1, 0, rng);

  // focal-loss prior so untrained classification scores start near 0.01
  const T prior = static_cast<T>(-std::log((1.0 - 0.01) / 0.01));
  std::fill(p.coarse_cls.p.bias.begin(), p.coarse_cls.p.bias.end(), prior);
  std::fill(p.border_cls.p.bias.begin(), p.border_cls.p.bias.end(), prior);
  // offsets start at zero so refinement begins as the identity
  p.border_reg.p.weight.fill(T(0));
  return p;
}

template <class T>
struct HeadOutputs {
  Tensor4<T> coarse_cls;    // (B, K, H, W) logits
  Tensor4<T> coarse_dist;   // (B, 4, H, W) l,t,r,b in image pixels
  Tensor4<T> border_cls;    // (B, K, H, W) logits
  Tensor4<T> border_delta;  // (B, 4, H, W)
  Tensor4<T> coarse_boxes;  // (B, 4, H, W) decoded, image coordinates
};

template <class T>
struct HeadCache {
  Tensor4<T> image;
  std::array<Tensor4<T>, 3> bb_pre, bb_act;
  Tensor4<T> tower_pre, tower_act;
  Tensor4<T> cls_pre, cls_act, reg_pre, reg_act;
  Tensor4<T> reg_raw;  // pre-softplus head output
  std::vector<std::array<bool, 4>> clamp_mask;  // per (b, y, x)
  Tensor4<T> box_feat;  // boxes handed to the BAMs, feature coordinates
  BamCache<T> bam_cls, bam_reg;
  Tensor4<T> bam_cls_out, bam_reg_out;
  bool valid = false;
};

// Full head forward. When `boxes_override_feat` is given, the BAMs pool along
// those boxes instead of the freshly decoded ones (used by the gradient
// checks, which hold the non-differentiable box path fixed).
template <class T>
HeadOutputs<T> head_forward(const HeadParams<T>& params, const Config& cfg,
                            const Tensor4<T>& image, HeadCache<T>* cache,
                            const Tensor4<T>* boxes_override_feat = nullptr) {
  const int stride = cfg.stride();
  HeadCache<T> local;
  HeadCache<T>& c = cache ? *cache : local;
  c.image = image;

  const Tensor4<T>* cur = &c.image;
  for (int s = 0; s < 3; ++s) {
    c.bb_pre[s] = conv2d_forward(*cur, params.backbone[s]);
    c.bb_act[s] = relu_forward(c.bb_pre[s]);
    cur = &c.bb_act[s];
  }
  c.tower_pre = conv2d_forward(*cur, params.tower);
  c.tower_act = relu_forward(c.tower_pre);
  c.cls_pre = conv2d_forward(c.tower_act, params.cls_feat);
  c.cls_act = relu_forward(c.cls_pre);
  c.reg_pre = conv2d_forward(c.tower_act, params.reg_feat);
  c.reg_act = relu_forward(c.reg_pre);

  HeadOutputs<T> out;
  out.coarse_cls = conv2d_forward(c.cls_act, params.coarse_cls);
  c.reg_raw = conv2d_forward(c.reg_act, params.coarse_reg);

  // nonnegative distances in image pixels
  out.coarse_dist = Tensor4<T>::zeros_like(c.reg_raw);
  for (std::size_t i = 0; i < c.reg_raw.size(); ++i)
    out.coarse_dist[i] = softplus(c.reg_raw[i]) * static_cast<T>(stride);

  const int fb = out.coarse_dist.batch();
  const int fh = out.coarse_dist.height();
  const int fw = out.coarse_dist.width();
  const T img_w = static_cast<T>(fw * stride);
  const T img_h = static_cast<T>(fh * stride);
  out.coarse_boxes = Tensor4<T>(fb, 4, fh, fw);
  c.clamp_mask.assign(static_cast<std::size_t>(fb) * fh * fw, {});
  for (int b = 0; b < fb; ++b) {
    for (int i = 0; i < fh; ++i) {
      for (int j = 0; j < fw; ++j) {
        const std::array<T, 4> ltrb = {
            out.coarse_dist.at(b, 0, i, j), out.coarse_dist.at(b, 1, i, j),
            out.coarse_dist.at(b, 2, i, j), out.coarse_dist.at(b, 3, i, j)};
        const DecodedBox<T> d = decode_coarse(i, j, ltrb, stride, img_w, img_h);
        for (int k = 0; k < 4; ++k) out.coarse_boxes.at(b, k, i, j) = d.box[k];
        c.clamp_mask[(static_cast<std::size_t>(b) * fh + i) * fw + j] =
            d.clamped;
      }
    }
  }

  // the refinement stage samples in feature-map coordinates; a grid point's
  // own center maps back onto itself
  if (boxes_override_feat) {
    c.box_feat = *boxes_override_feat;
  } else {
    c.box_feat = Tensor4<T>::zeros_like(out.coarse_boxes);
    const T inv_stride = T(1) / static_cast<T>(stride);
    for (std::size_t i = 0; i < c.box_feat.size(); ++i)
      c.box_feat[i] = out.coarse_boxes[i] * inv_stride - T(0.5);
  }

  PoolConfig pool{cfg.pool_size, BorderAggregate::Max};
  c.bam_cls_out = bam_forward(c.cls_act, c.box_feat, params.bam_cls, pool,
                              cfg.instance_norm_eps, &c.bam_cls);
  c.bam_reg_out = bam_forward(c.reg_act, c.box_feat, params.bam_reg, pool,
                              cfg.instance_norm_eps, &c.bam_reg);
  out.border_cls = conv2d_forward(c.bam_cls_out, params.border_cls);
  out.border_delta = conv2d_forward(c.bam_reg_out, params.border_reg);
  c.valid = true;
  return out;
}

// Upstream gradients for the four head outputs. Box gradients are taken with
// respect to the decoded coarse box coordinates.
template <class T>
struct HeadGrads {
  Tensor4<T> coarse_cls;
  Tensor4<T> coarse_boxes;
  Tensor4<T> border_cls;
  Tensor4<T> border_delta;
};

template <class T>
void head_backward(const HeadGrads<T>& g, const HeadCache<T>& c,
                   const Config& cfg, HeadParams<T>& params) {
  if (!c.valid) throw std::logic_error("head_backward: stale forward cache");
  const int stride = cfg.stride();

  // border branches
  Tensor4<T> g_bam_cls_out;
  conv2d_backward(g.border_cls, c.bam_cls_out, params.border_cls,
                  &g_bam_cls_out);
  Tensor4<T> g_cls_act = bam_backward(g_bam_cls_out, c.bam_cls, params.bam_cls);
  Tensor4<T> g_bam_reg_out;
  conv2d_backward(g.border_delta, c.bam_reg_out, params.border_reg,
                  &g_bam_reg_out);
  Tensor4<T> g_reg_act = bam_backward(g_bam_reg_out, c.bam_reg, params.bam_reg);

  // coarse classification
  Tensor4<T> g_cls_from_coarse;
  conv2d_backward(g.coarse_cls, c.cls_act, params.coarse_cls,
                  &g_cls_from_coarse);
  for (std::size_t i = 0; i < g_cls_act.size(); ++i)
    g_cls_act[i] += g_cls_from_coarse[i];

  // decoded box -> distances -> softplus -> regression head
  const int fb = g.coarse_boxes.batch();
  const int fh = g.coarse_boxes.height();
  const int fw = g.coarse_boxes.width();
  Tensor4<T> g_raw = Tensor4<T>::zeros_like(c.reg_raw);
  for (int b = 0; b < fb; ++b) {
    for (int i = 0; i < fh; ++i) {
      for (int j = 0; j < fw; ++j) {
        const auto& mask =
            c.clamp_mask[(static_cast<std::size_t>(b) * fh + i) * fw + j];
        // d(box)/d(dist): x0 = cx - l, y0 = cy - t, x1 = cx + r, y1 = cy + b
        const std::array<T, 4> sign = {T(-1), T(-1), T(1), T(1)};
        for (int k = 0; k < 4; ++k) {
          if (mask[k]) continue;
          const T gd = g.coarse_boxes.at(b, k, i, j) * sign[k];
          const T raw = c.reg_raw.at(b, k, i, j);
          g_raw.at(b, k, i, j) +=
              gd * sigmoid(raw) * static_cast<T>(stride);
        }
      }
    }
  }
  Tensor4<T> g_reg_from_coarse;
  conv2d_backward(g_raw, c.reg_act, params.coarse_reg, &g_reg_from_coarse);
  for (std::size_t i = 0; i < g_reg_act.size(); ++i)
    g_reg_act[i] += g_reg_from_coarse[i];

  // branch towers
  Tensor4<T> g_cls_pre = relu_backward(g_cls_act, c.cls_pre);
  Tensor4<T> g_tower_act;
  conv2d_backward(g_cls_pre, c.tower_act, params.cls_feat, &g_tower_act);
  Tensor4<T> g_reg_pre = relu_backward(g_reg_act, c.reg_pre);
  Tensor4<T> g_tower_from_reg;
  conv2d_backward(g_reg_pre, c.tower_act, params.reg_feat, &g_tower_from_reg);
  for (std::size_t i = 0; i < g_tower_act.size(); ++i)
    g_tower_act[i] += g_tower_from_reg[i];

  Tensor4<T> g_tower_pre = relu_backward(g_tower_act, c.tower_pre);
  Tensor4<T> g_bb = Tensor4<T>();
  conv2d_backward(g_tower_pre, c.bb_act[2], params.tower, &g_bb);
  for (int s = 2; s >= 0; --s) {
    Tensor4<T> g_pre = relu_backward(g_bb, c.bb_pre[s]);
    const Tensor4<T>& input = (s == 0) ? c.image : c.bb_act[s - 1];
    if (s == 0) {
      conv2d_backward(g_pre, input, params.backbone[s], nullptr);
    } else {
      conv2d_backward(g_pre, input, params.backbone[s], &g_bb);
    }
  }
}

}  // namespace bdet
