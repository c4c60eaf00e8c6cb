#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bdet/config.hpp"
#include "bdet/detector.hpp"
#include "bdet/targets.hpp"
#include "bdet/tensor.hpp"

namespace bdet {

namespace detail {

inline double stable_softplus(double x) {
  // log(1 + e^x) without overflow
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

// Sigmoid focal loss summed over every (location, class) logit. `target_cls`
// holds 0 for background or c+1 for class c, one entry per (b, y, x).
// Gradients accumulate into `grad` when non-null (unnormalized).
template <class T>
double focal_loss(const Tensor4<T>& logits, const std::vector<int>& target_cls,
                  double alpha, double gamma, Tensor4<T>* grad) {
  const int kb = logits.batch(), kk = logits.channels();
  const int kh = logits.height(), kw = logits.width();
  if (target_cls.size() != static_cast<std::size_t>(kb) * kh * kw)
    throw std::invalid_argument("focal_loss: target size mismatch");
  if (grad) check_same_shape(*grad, logits, "focal_loss grad");

  double total = 0.0;
  for (int b = 0; b < kb; ++b) {
    for (int k = 0; k < kk; ++k) {
      const T* lp = logits.plane(b, k);
      T* gp = grad ? grad->plane(b, k) : nullptr;
      for (int i = 0; i < kh * kw; ++i) {
        const double z = static_cast<double>(lp[i]);
        const int tgt = target_cls[static_cast<std::size_t>(b) * kh * kw + i];
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double q = 1.0 / (1.0 + std::exp(z));  // 1 - p
        const double log_p = -detail::stable_softplus(-z);
        const double log_q = -detail::stable_softplus(z);
        double loss, dz;
        if (tgt == k + 1) {
          const double qg = std::pow(q, gamma);
          loss = -alpha * qg * log_p;
          dz = alpha * (gamma * p * qg * log_p - qg * q);
        } else {
          const double pg = std::pow(p, gamma);
          loss = -(1.0 - alpha) * pg * log_q;
          dz = (1.0 - alpha) * (pg * p - gamma * pg * q * log_q);
        }
        total += loss;
        if (gp) gp[i] += static_cast<T>(dz);
      }
    }
  }
  return total;
}

// -log(IoU) with the IoU floored at 1e-7; gradient with respect to the
// predicted box corners (zero in the floored region).
template <class T>
double iou_loss(const std::array<T, 4>& pred, const std::array<T, 4>& gt,
                std::array<T, 4>* grad_pred) {
  constexpr double kFloor = 1e-7;
  const double px0 = pred[0], py0 = pred[1], px1 = pred[2], py1 = pred[3];
  const double gx0 = gt[0], gy0 = gt[1], gx1 = gt[2], gy1 = gt[3];
  const double iw = std::min(px1, gx1) - std::max(px0, gx0);
  const double ih = std::min(py1, gy1) - std::max(py0, gy0);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double ap = (px1 - px0) * (py1 - py0);
  const double ag = (gx1 - gx0) * (gy1 - gy0);
  const double uni = ap + ag - inter;
  const double iou = uni > 0 ? inter / uni : 0.0;

  if (grad_pred) grad_pred->fill(T(0));
  if (iou <= kFloor) return -std::log(kFloor);

  if (grad_pred) {
    // d inter / d pred
    std::array<double, 4> di{0, 0, 0, 0};
    if (inter > 0) {
      if (px0 > gx0) di[0] = -ih;
      if (py0 > gy0) di[1] = -iw;
      if (px1 < gx1) di[2] = ih;
      if (py1 < gy1) di[3] = iw;
    }
    // d area_pred / d pred
    const std::array<double, 4> da = {-(py1 - py0), -(px1 - px0), (py1 - py0),
                                      (px1 - px0)};
    for (int k = 0; k < 4; ++k) {
      const double d_iou = (di[k] * (uni + inter) - inter * da[k]) / (uni * uni);
      (*grad_pred)[k] = static_cast<T>(-d_iou / iou);
    }
  }
  return -std::log(iou);
}

// Mean absolute error over positive locations x 4 coordinates.
template <class T>
double l1_border_loss(const Tensor4<T>& delta, const BorderTargets<T>& bt,
                      Tensor4<T>* grad, int n_pos_norm) {
  const int fb = delta.batch(), fh = delta.height(), fw = delta.width();
  if (delta.channels() != 4)
    throw std::invalid_argument("l1_border_loss: delta must have 4 channels");
  if (bt.cls.size() != static_cast<std::size_t>(fb) * fh * fw)
    throw std::invalid_argument("l1_border_loss: target size mismatch");
  if (grad) check_same_shape(*grad, delta, "l1_border_loss grad");

  const double denom = 4.0 * std::max(1, n_pos_norm);
  double total = 0.0;
  for (int b = 0; b < fb; ++b) {
    for (int i = 0; i < fh; ++i) {
      for (int j = 0; j < fw; ++j) {
        const std::size_t idx =
            (static_cast<std::size_t>(b) * fh + i) * fw + j;
        if (bt.cls[idx] == 0) continue;
        for (int k = 0; k < 4; ++k) {
          const double d = static_cast<double>(delta.at(b, k, i, j)) -
                           static_cast<double>(bt.delta[idx][k]);
          total += std::abs(d);
          if (grad) {
            const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
            grad->at(b, k, i, j) += static_cast<T>(s / denom);
          }
        }
      }
    }
  }
  return total / denom;
}

template <class T>
struct LossTerms {
  double total = 0.0;
  double coarse_cls = 0.0, coarse_reg = 0.0;
  double border_cls = 0.0, border_reg = 0.0;
  int n_pos_coarse = 0, n_pos_border = 0;
};

// Normalizer counts; the batched training loop passes batch-wide totals so
// that per-sample evaluation composes to the batch loss exactly.
struct LossNormalizers {
  int n_pos_coarse = 0;
  int n_pos_border = 0;
};

// Four-term training loss: coarse focal + coarse IoU + border focal averaged
// over the border positives + L1 on the border offsets of positives. Writes
// gradients with respect to the head outputs into `grads` when non-null.
template <class T>
LossTerms<T> total_loss(const HeadOutputs<T>& out, const CoarseTargets<T>& ct,
                        const BorderTargets<T>& bt, const Config& cfg,
                        HeadGrads<T>* grads,
                        const LossNormalizers* norm_override = nullptr) {
  LossTerms<T> terms;
  terms.n_pos_coarse = ct.n_pos;
  terms.n_pos_border = bt.n_pos;
  const int npc =
      std::max(1, norm_override ? norm_override->n_pos_coarse : ct.n_pos);
  const int npb =
      std::max(1, norm_override ? norm_override->n_pos_border : bt.n_pos);

  if (grads) {
    grads->coarse_cls = Tensor4<T>::zeros_like(out.coarse_cls);
    grads->coarse_boxes = Tensor4<T>::zeros_like(out.coarse_boxes);
    grads->border_cls = Tensor4<T>::zeros_like(out.border_cls);
    grads->border_delta = Tensor4<T>::zeros_like(out.border_delta);
  }

  terms.coarse_cls =
      focal_loss(out.coarse_cls, ct.cls, cfg.focal_alpha, cfg.focal_gamma,
                 grads ? &grads->coarse_cls : nullptr) /
      npc;
  if (grads)
    for (std::size_t i = 0; i < grads->coarse_cls.size(); ++i)
      grads->coarse_cls[i] /= static_cast<T>(npc);

  const int fb = out.coarse_boxes.batch();
  const int fh = out.coarse_boxes.height();
  const int fw = out.coarse_boxes.width();
  double reg_sum = 0.0;
  for (int b = 0; b < fb; ++b) {
    for (int i = 0; i < fh; ++i) {
      for (int j = 0; j < fw; ++j) {
        const std::size_t idx =
            (static_cast<std::size_t>(b) * fh + i) * fw + j;
        if (ct.cls[idx] == 0) continue;
        const std::array<T, 4> pred = {
            out.coarse_boxes.at(b, 0, i, j), out.coarse_boxes.at(b, 1, i, j),
            out.coarse_boxes.at(b, 2, i, j), out.coarse_boxes.at(b, 3, i, j)};
        std::array<T, 4> g;
        reg_sum += iou_loss(pred, ct.gt_box[idx], grads ? &g : nullptr);
        if (grads)
          for (int k = 0; k < 4; ++k)
            grads->coarse_boxes.at(b, k, i, j) += g[k] / static_cast<T>(npc);
      }
    }
  }
  terms.coarse_reg = reg_sum / npc;

  terms.border_cls =
      focal_loss(out.border_cls, bt.cls, cfg.focal_alpha, cfg.focal_gamma,
                 grads ? &grads->border_cls : nullptr) /
      npb;
  if (grads)
    for (std::size_t i = 0; i < grads->border_cls.size(); ++i)
      grads->border_cls[i] /= static_cast<T>(npb);

  terms.border_reg = l1_border_loss(
      out.border_delta, bt, grads ? &grads->border_delta : nullptr, npb);

  terms.total = terms.coarse_cls + terms.coarse_reg + terms.border_cls +
                terms.border_reg;
  return terms;
}

}  // namespace bdet
