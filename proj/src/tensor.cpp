#include "gsfm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gsfm {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace {

std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("broadcast: rank mismatch " + shape_str(a) + " vs " +
                                shape_str(b));
  Shape out(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d] == b[d])
      out[d] = a[d];
    else if (a[d] == 1)
      out[d] = b[d];
    else if (b[d] == 1)
      out[d] = a[d];
    else
      throw std::invalid_argument("broadcast: incompatible shapes " + shape_str(a) +
                                  " vs " + shape_str(b));
  }
  return out;
}

// visits every output element with the matching (possibly broadcast) input
// offsets; fn(out_idx, a_idx, b_idx)
template <class F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& fn) {
  const std::size_t rank = out.size();
  const std::size_t n = shape_numel(out);
  if (n == 0) return;
  auto sta = row_major_strides(a);
  auto stb = row_major_strides(b);
  std::vector<std::size_t> sa(rank), sb(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    sa[d] = (a[d] == 1 && out[d] > 1) ? 0 : sta[d];
    sb[d] = (b[d] == 1 && out[d] > 1) ? 0 : stb[d];
  }
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0;; ++o) {
    fn(o, ia, ib);
    // odometer increment from the last axis
    std::size_t d = rank;
    while (d-- > 0) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
      if (d == 0) return;
    }
    if (o + 1 == n) return;
  }
}

template <class T>
void maybe_record(const char* name, std::vector<Tensor<T>> ins, Tensor<T>& out,
                  std::function<void()> bwd) {
  if (!grad_enabled_for(ins)) return;
  out.set_requires_grad(true);
  std::vector<std::shared_ptr<Storage<T>>> is;
  is.reserve(ins.size());
  for (auto& t : ins) is.push_back(t.storage());
  Tape<T>::current()->record(std::move(is), {out.storage()}, std::move(bwd), name);
}

}  // namespace

// ---- elementwise binary ----------------------------------------------------

template <class T, class Fwd, class Bwd>
static Tensor<T> binary_op(const char* name, const Tensor<T>& a, const Tensor<T>& b,
                           Fwd fwd, Bwd bwd) {
  Shape osh = broadcast_shape(a.shape(), b.shape());
  Tensor<T> out(osh);
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for_each_broadcast(osh, a.shape(), b.shape(),
                     [&](std::size_t o, std::size_t ia, std::size_t ib) {
                       po[o] = fwd(pa[ia], pb[ib]);
                     });
  auto sa = a.storage(), sb = b.storage(), so = out.storage();
  maybe_record<T>(name, {a, b}, out, [sa, sb, so, osh, bwd]() {
    const auto& go = so->grad;
    std::vector<T>* ga = sa->requires_grad ? &ensure_grad(*sa) : nullptr;
    std::vector<T>* gb = sb->requires_grad ? &ensure_grad(*sb) : nullptr;
    for_each_broadcast(osh, sa->shape, sb->shape,
                       [&](std::size_t o, std::size_t ia, std::size_t ib) {
                         bwd(go[o], sa->data[ia], sb->data[ib], so->data[o],
                             ga ? &(*ga)[ia] : nullptr, gb ? &(*gb)[ib] : nullptr);
                       });
  });
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T g, T, T, T, T* ga, T* gb) {
        if (ga) *ga += g;
        if (gb) *gb += g;
      });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T g, T, T, T, T* ga, T* gb) {
        if (ga) *ga += g;
        if (gb) *gb -= g;
      });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T g, T x, T y, T, T* ga, T* gb) {
        if (ga) *ga += g * y;
        if (gb) *gb += g * x;
      });
}

template <class T>
Tensor<T> divide(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "div", a, b, [](T x, T y) { return x / y; },
      [](T g, T, T y, T o, T* ga, T* gb) {
        if (ga) *ga += g / y;
        if (gb) *gb -= g * o / y;
      });
}

// ---- elementwise unary -----------------------------------------------------

template <class T, class Fwd, class Bwd>
static Tensor<T> unary_op(const char* name, const Tensor<T>& x, Fwd fwd, Bwd bwd) {
  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  for (std::size_t i = 0; i < x.numel(); ++i) po[i] = fwd(px[i]);
  auto sx = x.storage(), so = out.storage();
  maybe_record<T>(name, {x}, out, [sx, so, bwd]() {
    if (!sx->requires_grad) return;
    auto& gx = ensure_grad(*sx);
    const auto& go = so->grad;
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += bwd(go[i], sx->data[i], so->data[i]);
  });
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  // subgradient at 0 is 0
  return unary_op<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T g, T v, T) { return v > T(0) ? g : T(0); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op<T>(
      "sigmoid", x,
      [](T v) {
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                         : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T g, T, T y) { return g * y * (T(1) - y); });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary_op<T>(
      "exp", x, [](T v) { return std::exp(v); },
      [](T g, T, T y) { return g * y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  return unary_op<T>(
      "log", x, [](T v) { return std::log(v); },
      [](T g, T v, T) { return g / v; });
}

template <class T>
Tensor<T> scalar_mul(const Tensor<T>& x, T c) {
  return unary_op<T>(
      "scalar_mul", x, [c](T v) { return v * c; },
      [c](T g, T, T) { return g * c; });
}

template <class T>
Tensor<T> scalar_add(const Tensor<T>& x, T c) {
  return unary_op<T>(
      "scalar_add", x, [c](T v) { return v + c; },
      [](T g, T, T) { return g; });
}

// ---- reductions ------------------------------------------------------------

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  const T* px = x.data();
  for (std::size_t i = 0; i < x.numel(); ++i) acc += px[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  auto sx = x.storage(), so = out.storage();
  maybe_record<T>("sum", {x}, out, [sx, so]() {
    if (!sx->requires_grad) return;
    auto& gx = ensure_grad(*sx);
    T g = so->grad[0];
    for (auto& v : gx) v += g;
  });
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return scalar_mul(sum(x), T(1) / static_cast<T>(x.numel()));
}

// ---- softmax ----------------------------------------------------------------

template <class T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) throw std::invalid_argument("softmax: axis out of range");
  std::size_t outer = 1, inner = 1;
  const std::size_t n = x.dim(axis);
  for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);

  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      T mx = px[base];
      for (std::size_t t = 1; t < n; ++t) mx = std::max(mx, px[base + t * inner]);
      T z = T(0);
      for (std::size_t t = 0; t < n; ++t) {
        T e = std::exp(px[base + t * inner] - mx);
        po[base + t * inner] = e;
        z += e;
      }
      for (std::size_t t = 0; t < n; ++t) po[base + t * inner] /= z;
    }
  }
  auto sx = x.storage(), so = out.storage();
  maybe_record<T>("softmax", {x}, out, [sx, so, outer, inner, n]() {
    if (!sx->requires_grad) return;
    auto& gx = ensure_grad(*sx);
    const auto& go = so->grad;
    const auto& y = so->data;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * n * inner + i;
        T dot = T(0);
        for (std::size_t t = 0; t < n; ++t)
          dot += go[base + t * inner] * y[base + t * inner];
        for (std::size_t t = 0; t < n; ++t) {
          std::size_t ix = base + t * inner;
          gx[ix] += y[ix] * (go[ix] - dot);
        }
      }
    }
  });
  return out;
}

// ---- layout ops --------------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: numel mismatch");
  Tensor<T> out(std::move(shape), std::vector<T>(x.vec()));
  auto sx = x.storage(), so = out.storage();
  maybe_record<T>("reshape", {x}, out, [sx, so]() {
    if (!sx->requires_grad) return;
    auto& gx = ensure_grad(*sx);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += so->grad[i];
  });
  return out;
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t rank = xs[0].rank();
  if (axis >= rank) throw std::invalid_argument("concat: axis out of range");
  Shape osh = xs[0].shape();
  std::size_t total = 0;
  for (auto& t : xs) {
    if (t.rank() != rank) throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t d = 0; d < rank; ++d)
      if (d != axis && t.dim(d) != osh[d])
        throw std::invalid_argument("concat: shape mismatch off-axis");
    total += t.dim(axis);
  }
  osh[axis] = total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= osh[d];
  for (std::size_t d = axis + 1; d < rank; ++d) inner *= osh[d];

  Tensor<T> out(osh);
  T* po = out.data();
  std::size_t off = 0;
  for (auto& t : xs) {
    const std::size_t len = t.dim(axis) * inner;
    const T* pt = t.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pt + o * len, pt + (o + 1) * len, po + o * total * inner + off);
    off += len;
  }
  std::vector<std::shared_ptr<Storage<T>>> stores;
  for (auto& t : xs) stores.push_back(t.storage());
  auto so = out.storage();
  maybe_record<T>("concat", xs, out, [stores, so, outer, inner, total, axis]() {
    std::size_t off = 0;
    for (auto& s : stores) {
      const std::size_t len = s->shape[axis] * inner;
      if (s->requires_grad) {
        auto& g = ensure_grad(*s);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < len; ++i)
            g[o * len + i] += so->grad[o * total * inner + off + i];
      }
      off += len;
    }
  });
  return out;
}

template <class T>
Tensor<T> slice0(const Tensor<T>& x, std::size_t from, std::size_t to) {
  if (from >= to || to > x.dim(0)) throw std::invalid_argument("slice0: bad range");
  Shape osh = x.shape();
  osh[0] = to - from;
  std::size_t inner = 1;
  for (std::size_t d = 1; d < x.rank(); ++d) inner *= x.dim(d);
  Tensor<T> out(osh);
  std::copy(x.data() + from * inner, x.data() + to * inner, out.data());
  auto sx = x.storage(), so = out.storage();
  maybe_record<T>("slice0", {x}, out, [sx, so, from, inner]() {
    if (!sx->requires_grad) return;
    auto& gx = ensure_grad(*sx);
    for (std::size_t i = 0; i < so->grad.size(); ++i)
      gx[from * inner + i] += so->grad[i];
  });
  return out;
}

// ---- grad check --------------------------------------------------------------

template <class T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                  const Tensor<T>& x, T h) {
  if (h <= T(0)) throw std::invalid_argument("grad_check: h must be positive");
  Tensor<T> xg = x.clone();
  xg.set_requires_grad(true);
  Tape<T> tape;
  std::vector<T> analytic;
  {
    typename Tape<T>::Scope scope(tape);
    Tensor<T> y = f(xg);
    tape.backward(y);
    analytic = xg.grad();
  }
  double max_err = 0.0;
  Tensor<T> xp = x.clone();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T orig = xp.data()[i];
    xp.data()[i] = orig + h;
    const double fp = static_cast<double>(f(xp).item());
    xp.data()[i] = orig - h;
    const double fm = static_cast<double>(f(xp).item());
    xp.data()[i] = orig;
    const double fd = (fp - fm) / (2.0 * static_cast<double>(h));
    const double an = static_cast<double>(analytic[i]);
    const double err = std::abs(an - fd) / std::max(1.0, std::abs(an));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

#define GSFM_INSTANTIATE(T)                                                       \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> divide<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> relu<T>(const Tensor<T>&);                                   \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                \
  template Tensor<T> exp<T>(const Tensor<T>&);                                    \
  template Tensor<T> log<T>(const Tensor<T>&);                                    \
  template Tensor<T> scalar_mul<T>(const Tensor<T>&, T);                          \
  template Tensor<T> scalar_add<T>(const Tensor<T>&, T);                          \
  template Tensor<T> sum<T>(const Tensor<T>&);                                    \
  template Tensor<T> mean<T>(const Tensor<T>&);                                   \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                   \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                         \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::size_t);       \
  template Tensor<T> slice0<T>(const Tensor<T>&, std::size_t, std::size_t);       \
  template double grad_check<T>(const std::function<Tensor<T>(const Tensor<T>&)>&, \
                                const Tensor<T>&, T);

GSFM_INSTANTIATE(float)
GSFM_INSTANTIATE(double)
#undef GSFM_INSTANTIATE

}  // namespace gsfm
