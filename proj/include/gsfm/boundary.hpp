#pragma once

#include "gsfm/tensor.hpp"

namespace gsfm {

// 4-neighbor Laplacian under replicate padding, |response| binarized at
// `threshold`. Ground-truth generation only; never recorded on a tape.
template <class T>
Tensor<T> laplacian_boundary(const Tensor<T>& mask, double threshold = 0.1);

// 1 - 2*sum(pq) / (sum(p^2) + sum(q^2) + eps); differentiable in p
template <class T>
Tensor<T> dice_loss(const Tensor<T>& p, const Tensor<T>& q, T eps);

// mean over elements of max(x,0) - x*q + log(1 + exp(-|x|))
template <class T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets);

// dice(sigmoid(logits), gt) + BCE(logits, gt); the global 0.05 weight is the
// trainer's business
template <class T>
Tensor<T> boundary_loss(const Tensor<T>& pred_logits, const Tensor<T>& gt, T eps);

// residual 1x1-conv injection used in both fusion directions
template <class T>
struct FusionBlock {
  Tensor<T> proj_w, proj_b;
  FusionBlock() = default;
  FusionBlock(std::size_t channels, std::uint64_t seed);
};

// ReLU(conv1x1(f_src)) + f_dst
template <class T>
Tensor<T> fuse(const Tensor<T>& f_src, const Tensor<T>& f_dst,
               const FusionBlock<T>& block);

// Per-pixel cross entropy over logits [K,H,W] against integer labels [H,W],
// averaged over the keep_fraction hardest pixels (ties to the lowest pixel
// index). keep_fraction = 1 is plain mean CE.
template <class T>
Tensor<T> bootstrapped_ce(const Tensor<T>& mask_logits, const Tensor<T>& gt_labels,
                          double keep_fraction);

}  // namespace gsfm
