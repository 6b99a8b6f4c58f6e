#include "gsfm/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gsfm/kernels.hpp"
#include "gsfm/rng.hpp"

namespace gsfm {

template <class T>
Tensor<T> laplacian_boundary(const Tensor<T>& mask, double threshold) {
  if (mask.rank() != 3 || mask.dim(0) != 1)
    throw std::invalid_argument("laplacian_boundary: expects [1,H,W]");
  const std::size_t h = mask.dim(1), w = mask.dim(2);
  static const T kLaplacian[9] = {T(0), T(1),  T(0),  T(1), T(-4),
                                  T(1), T(0),  T(1),  T(0)};
  Tensor<T> resp({1, h, w});
  kern::conv2d_forward<T>(mask.data(), kLaplacian, nullptr, resp.data(), 1, h, w, 1,
                          3, Padding::Replicate);
  Tensor<T> out({1, h, w});
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data()[i] = std::abs(static_cast<double>(resp.data()[i])) > threshold
                        ? T(1)
                        : T(0);
  return out;
}

template <class T>
Tensor<T> dice_loss(const Tensor<T>& p, const Tensor<T>& q, T eps) {
  if (p.shape() != q.shape()) throw std::invalid_argument("dice_loss: shape mismatch");
  Tensor<T> num = sum(mul(p, q));
  Tensor<T> den = scalar_add(add(sum(mul(p, p)), sum(mul(q, q))), eps);
  return scalar_add(scalar_mul(divide(num, den), T(-2)), T(1));
}

template <class T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
  if (logits.shape() != targets.shape())
    throw std::invalid_argument("bce_with_logits: shape mismatch");
  const std::size_t n = logits.numel();
  const T* px = logits.data();
  const T* pq = targets.data();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    T x = px[i];
    acc += std::max(x, T(0)) - x * pq[i] + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(n));
  if (grad_enabled_for<T>({logits})) {
    out.set_requires_grad(true);
    auto sx = logits.storage(), sq = targets.storage(), so = out.storage();
    Tape<T>::current()->record(
        {sx, sq}, {out.storage()},
        [sx, sq, so, n]() {
          if (!sx->requires_grad) return;
          auto& gx = ensure_grad(*sx);
          const T g = so->grad[0] / static_cast<T>(n);
          for (std::size_t i = 0; i < n; ++i) {
            T x = sx->data[i];
            T s = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                            : std::exp(x) / (T(1) + std::exp(x));
            gx[i] += g * (s - sq->data[i]);
          }
        },
        "bce_with_logits");
  }
  return out;
}

template <class T>
Tensor<T> boundary_loss(const Tensor<T>& pred_logits, const Tensor<T>& gt, T eps) {
  return add(dice_loss(sigmoid(pred_logits), gt, eps), bce_with_logits(pred_logits, gt));
}

template <class T>
FusionBlock<T>::FusionBlock(std::size_t channels, std::uint64_t seed) {
  Rng rng(seed);
  const double std1 = std::sqrt(2.0 / static_cast<double>(channels));
  proj_w = Tensor<T>({channels, channels, 1, 1});
  for (std::size_t i = 0; i < proj_w.numel(); ++i)
    proj_w.data()[i] = static_cast<T>(rng.normal() * std1);
  proj_b = Tensor<T>({channels});
}

template <class T>
Tensor<T> fuse(const Tensor<T>& f_src, const Tensor<T>& f_dst,
               const FusionBlock<T>& block) {
  if (f_src.shape() != f_dst.shape())
    throw std::invalid_argument("fuse: feature shape mismatch");
  return add(relu(conv2d(f_src, block.proj_w, block.proj_b, Padding::Zero)), f_dst);
}

template <class T>
Tensor<T> bootstrapped_ce(const Tensor<T>& mask_logits, const Tensor<T>& gt_labels,
                          double keep_fraction) {
  if (mask_logits.rank() != 3 || gt_labels.rank() != 2 ||
      mask_logits.dim(1) != gt_labels.dim(0) || mask_logits.dim(2) != gt_labels.dim(1))
    throw std::invalid_argument("bootstrapped_ce: expects [K,H,W] + [H,W]");
  if (keep_fraction <= 0.0 || keep_fraction > 1.0)
    throw std::invalid_argument("bootstrapped_ce: keep_fraction in (0,1]");
  const std::size_t kk = mask_logits.dim(0);
  const std::size_t np = gt_labels.numel();
  const T* px = mask_logits.data();

  std::vector<std::size_t> labels(np);
  for (std::size_t p = 0; p < np; ++p) {
    double lv = static_cast<double>(gt_labels.data()[p]);
    auto l = static_cast<long>(std::llround(lv));
    if (l < 0 || l >= static_cast<long>(kk))
      throw std::invalid_argument("bootstrapped_ce: label out of range");
    labels[p] = static_cast<std::size_t>(l);
  }

  // per-pixel CE with stable log-sum-exp
  std::vector<T> ce(np);
  for (std::size_t p = 0; p < np; ++p) {
    T mx = px[p];
    for (std::size_t c = 1; c < kk; ++c) mx = std::max(mx, px[c * np + p]);
    T z = T(0);
    for (std::size_t c = 0; c < kk; ++c) z += std::exp(px[c * np + p] - mx);
    ce[p] = std::log(z) + mx - px[labels[p] * np + p];
  }

  const std::size_t n_keep = std::min<std::size_t>(
      np, std::max<std::size_t>(
              1, static_cast<std::size_t>(std::ceil(
                     keep_fraction * static_cast<double>(np) - 1e-9))));
  auto kept = std::make_shared<std::vector<std::size_t>>(np);
  std::iota(kept->begin(), kept->end(), std::size_t{0});
  std::partial_sort(kept->begin(), kept->begin() + n_keep, kept->end(),
                    [&ce](std::size_t a, std::size_t b) {
                      return ce[a] != ce[b] ? ce[a] > ce[b] : a < b;
                    });
  kept->resize(n_keep);

  T acc = T(0);
  for (std::size_t t = 0; t < n_keep; ++t) acc += ce[(*kept)[t]];
  Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(n_keep));

  if (grad_enabled_for<T>({mask_logits})) {
    out.set_requires_grad(true);
    auto sx = mask_logits.storage(), so = out.storage();
    auto lab = std::make_shared<std::vector<std::size_t>>(std::move(labels));
    Tape<T>::current()->record(
        {sx}, {out.storage()},
        [sx, so, kept, lab, kk, np, n_keep]() {
          if (!sx->requires_grad) return;
          auto& gx = ensure_grad(*sx);
          const T g = so->grad[0] / static_cast<T>(n_keep);
          for (std::size_t t = 0; t < n_keep; ++t) {
            const std::size_t p = (*kept)[t];
            T mx = sx->data[p];
            for (std::size_t c = 1; c < kk; ++c)
              mx = std::max(mx, sx->data[c * np + p]);
            T z = T(0);
            for (std::size_t c = 0; c < kk; ++c)
              z += std::exp(sx->data[c * np + p] - mx);
            for (std::size_t c = 0; c < kk; ++c) {
              T soft = std::exp(sx->data[c * np + p] - mx) / z;
              gx[c * np + p] += g * (soft - ((*lab)[p] == c ? T(1) : T(0)));
            }
          }
        },
        "bootstrapped_ce");
  }
  return out;
}

#define GSFM_INSTANTIATE(T)                                                       \
  template Tensor<T> laplacian_boundary<T>(const Tensor<T>&, double);             \
  template Tensor<T> dice_loss<T>(const Tensor<T>&, const Tensor<T>&, T);         \
  template Tensor<T> bce_with_logits<T>(const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> boundary_loss<T>(const Tensor<T>&, const Tensor<T>&, T);     \
  template struct FusionBlock<T>;                                                 \
  template Tensor<T> fuse<T>(const Tensor<T>&, const Tensor<T>&,                  \
                             const FusionBlock<T>&);                              \
  template Tensor<T> bootstrapped_ce<T>(const Tensor<T>&, const Tensor<T>&,       \
                                        double);

GSFM_INSTANTIATE(float)
GSFM_INSTANTIATE(double)
#undef GSFM_INSTANTIATE

}  // namespace gsfm
