#pragma once

#include <stdexcept>

#include "bdet/border_align.hpp"
#include "bdet/layers.hpp"
#include "bdet/tensor.hpp"

namespace bdet {

// Border alignment module: 1x1 conv expands C channels to the 5C
// border-sensitive maps, instance norm, border pooling along the predicted
// box, then a 1x1 conv reduces back to C.
template <class T>
struct BamParams {
  Conv2d<T> expand;  // C -> 5C
  NormParams<T> norm;
  Conv2d<T> reduce;  // 5C -> C

  void zero_grads() {
    expand.p.zero_grads();
    norm.zero_grads();
    reduce.p.zero_grads();
  }
};

template <class T>
BamParams<T> make_bam(int channels, Rng& rng) {
  BamParams<T> bam;
  bam.expand = make_conv<T>(channels, 5 * channels, 1, 1, 0, rng);
  bam.norm = NormParams<T>::identity(5 * channels);
  bam.reduce = make_conv<T>(5 * channels, channels, 1, 1, 0, rng);
  return bam;
}

template <class T>
struct BamCache {
  Tensor4<T> input;
  Tensor4<T> expanded;
  InstanceNormCache<T> norm;
  Tensor4<T> normed;
  Tensor4<T> aligned;
  Tensor4<T> boxes;
  ArgmaxRecord<T> record;
  bool valid = false;
};

template <class T>
Tensor4<T> bam_forward(const Tensor4<T>& feat, const Tensor4<T>& boxes,
                       const BamParams<T>& params, const PoolConfig& cfg,
                       double norm_eps, BamCache<T>* cache) {
  if (feat.height() != boxes.height() || feat.width() != boxes.width() ||
      feat.batch() != boxes.batch())
    throw std::invalid_argument("bam_forward: feat and boxes not aligned");

  Tensor4<T> expanded = conv2d_forward(feat, params.expand);
  InstanceNormCache<T> norm_cache;
  Tensor4<T> normed =
      instance_norm_forward(expanded, norm_eps, &params.norm, &norm_cache);
  BorderAlignResult<T> aligned = border_align_forward(normed, boxes, cfg);
  Tensor4<T> out = conv2d_forward(aligned.output, params.reduce);

  if (cache) {
    cache->input = feat;
    cache->expanded = std::move(expanded);
    cache->norm = std::move(norm_cache);
    cache->normed = std::move(normed);
    cache->aligned = std::move(aligned.output);
    cache->boxes = boxes;
    cache->record = std::move(aligned.record);
    cache->valid = true;
  }
  return out;
}

// Chain rule through reduce -> border align -> norm -> expand; parameter
// grads accumulate into `params`.
template <class T>
Tensor4<T> bam_backward(const Tensor4<T>& grad_out, const BamCache<T>& cache,
                        BamParams<T>& params) {
  if (!cache.valid)
    throw std::logic_error("bam_backward: stale or missing forward cache");
  if (grad_out.channels() != params.reduce.out_channels() ||
      grad_out.height() != cache.input.height() ||
      grad_out.width() != cache.input.width() ||
      grad_out.batch() != cache.input.batch())
    throw std::logic_error("bam_backward: grad shape does not match cache");

  Tensor4<T> grad_aligned;
  conv2d_backward(grad_out, cache.aligned, params.reduce, &grad_aligned);
  Tensor4<T> grad_normed = border_align_backward(
      grad_aligned, cache.record, cache.boxes, cache.normed.shape());
  Tensor4<T> grad_expanded =
      instance_norm_backward(grad_normed, cache.norm, &params.norm);
  Tensor4<T> grad_feat;
  conv2d_backward(grad_expanded, cache.input, params.expand, &grad_feat);
  return grad_feat;
}

}  // namespace bdet
