#include <cmath>

#include "gsfm/kernels.hpp"
#include "gsfm/tensor.hpp"

namespace gsfm {

namespace {

template <class T>
void record_op(const char* name, std::vector<Tensor<T>> ins, Tensor<T>& out,
               std::function<void()> bwd) {
  if (!grad_enabled_for(ins)) return;
  out.set_requires_grad(true);
  std::vector<std::shared_ptr<Storage<T>>> is;
  for (auto& t : ins) is.push_back(t.storage());
  Tape<T>::current()->record(std::move(is), {out.storage()}, std::move(bwd), name);
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 Padding pad) {
  if (x.rank() != 3 || w.rank() != 4)
    throw std::invalid_argument("conv2d: expects x[C,H,W], w[Co,Ci,k,k]");
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  if (k != 1 && k != 3) throw std::invalid_argument("conv2d: kernel size must be 1 or 3");
  if (w.dim(1) != cin) throw std::invalid_argument("conv2d: channel mismatch");
  if (w.dim(3) != k) throw std::invalid_argument("conv2d: non-square kernel");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout))
    throw std::invalid_argument("conv2d: bias shape");

  Tensor<T> out({cout, h, wd});
  kern::conv2d_forward(x.data(), w.data(), bias.defined() ? bias.data() : nullptr,
                       out.data(), cin, h, wd, cout, k, pad);

  std::vector<Tensor<T>> ins = {x, w};
  if (bias.defined()) ins.push_back(bias);
  auto sx = x.storage(), sw = w.storage(), so = out.storage();
  auto sbias = bias.defined() ? bias.storage() : nullptr;
  record_op<T>("conv2d", ins, out, [sx, sw, sbias, so, cin, h, wd, cout, k, pad]() {
    const T* gy = so->grad.data();
    if (sx->requires_grad)
      kern::conv2d_backward_input(gy, sw->data.data(), ensure_grad(*sx).data(), cin,
                                  h, wd, cout, k, pad);
    if (sw->requires_grad)
      kern::conv2d_backward_weight(gy, sx->data.data(), ensure_grad(*sw).data(), cin,
                                   h, wd, cout, k, pad);
    if (sbias && sbias->requires_grad) {
      auto& gb = ensure_grad(*sbias);
      for (std::size_t co = 0; co < cout; ++co) {
        T acc = T(0);
        for (std::size_t p = 0; p < h * wd; ++p) acc += gy[co * h * wd + p];
        gb[co] += acc;
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  if (x.rank() != 3) throw std::invalid_argument("upsample2x: expects [C,H,W]");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out({c, 2 * h, 2 * w});
  kern::upsample2x_forward(x.data(), out.data(), c, h, w);
  auto sx = x.storage(), so = out.storage();
  record_op<T>("upsample2x", {x}, out, [sx, so, c, h, w]() {
    if (!sx->requires_grad) return;
    kern::upsample2x_backward(so->grad.data(), ensure_grad(*sx).data(), c, h, w);
  });
  return out;
}

template <class T>
Tensor<T> avgpool2x(const Tensor<T>& x) {
  if (x.rank() != 3) throw std::invalid_argument("avgpool2x: expects [C,H,W]");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) throw std::invalid_argument("avgpool2x: odd spatial size");
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> out({c, oh, ow});
  const T* px = x.data();
  T* po = out.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T* p = px + (ch * h + 2 * oy) * w + 2 * ox;
        po[(ch * oh + oy) * ow + ox] =
            (p[0] + p[1] + p[w] + p[w + 1]) * static_cast<T>(0.25);
      }
  auto sx = x.storage(), so = out.storage();
  record_op<T>("avgpool2x", {x}, out, [sx, so, c, h, w, oh, ow]() {
    if (!sx->requires_grad) return;
    auto& gx = ensure_grad(*sx);
    const auto& go = so->grad;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T g = go[(ch * oh + oy) * ow + ox] * static_cast<T>(0.25);
          T* p = gx.data() + (ch * h + 2 * oy) * w + 2 * ox;
          p[0] += g;
          p[1] += g;
          p[w] += g;
          p[w + 1] += g;
        }
  });
  return out;
}

template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 3) throw std::invalid_argument("global_avg_pool: expects [C,H,W]");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  Tensor<T> out({c, 1, 1});
  for (std::size_t ch = 0; ch < c; ++ch) {
    T acc = T(0);
    for (std::size_t p = 0; p < hw; ++p) acc += x.data()[ch * hw + p];
    out.data()[ch] = acc / static_cast<T>(hw);
  }
  auto sx = x.storage(), so = out.storage();
  record_op<T>("global_avg_pool", {x}, out, [sx, so, c, hw]() {
    if (!sx->requires_grad) return;
    auto& gx = ensure_grad(*sx);
    for (std::size_t ch = 0; ch < c; ++ch) {
      T g = so->grad[ch] / static_cast<T>(hw);
      for (std::size_t p = 0; p < hw; ++p) gx[ch * hw + p] += g;
    }
  });
  return out;
}

#define GSFM_INSTANTIATE(T)                                                     \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,             \
                               const Tensor<T>&, Padding);                     \
  template Tensor<T> upsample2x<T>(const Tensor<T>&);                          \
  template Tensor<T> avgpool2x<T>(const Tensor<T>&);                           \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);

GSFM_INSTANTIATE(float)
GSFM_INSTANTIATE(double)
#undef GSFM_INSTANTIATE

}  // namespace gsfm
