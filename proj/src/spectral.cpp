#include "gsfm/spectral.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <tuple>

#include "gsfm/kernels.hpp"
#include "gsfm/rng.hpp"

namespace gsfm {

FilterMode filter_mode_from_string(const std::string& s) {
  if (s == "low") return FilterMode::Low;
  if (s == "high") return FilterMode::High;
  if (s == "full") return FilterMode::Full;
  throw std::invalid_argument("unknown filter mode: " + s);
}

std::string to_string(FilterMode m) {
  switch (m) {
    case FilterMode::Low: return "low";
    case FilterMode::High: return "high";
    default: return "full";
  }
}

template <class T>
Tensor<T> build_coefficient_map(FilterMode mode, double sigma, std::size_t h,
                                std::size_t w) {
  if (sigma <= 0.0) throw std::invalid_argument("build_coefficient_map: sigma <= 0");
  Tensor<T> g({1, h, w});
  const double cy = static_cast<double>(h / 2);
  const double cx = static_cast<double>(w / 2);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      double d2 = (u - cy) * (u - cy) + (v - cx) * (v - cx);
      double gauss = std::exp(-d2 * inv2s2);
      double val;
      switch (mode) {
        case FilterMode::Low: val = 1.0 - gauss; break;
        case FilterMode::High: val = gauss; break;
        default: val = 1.0; break;
      }
      g.data()[u * w + v] = static_cast<T>(val);
    }
  }
  return g;
}

namespace {

// process-wide coefficient-map cache; maps are immutable once built
template <class T>
struct MapCache {
  std::shared_mutex mu;
  std::map<std::tuple<int, double, std::size_t, std::size_t>, Tensor<T>> maps;
};

template <class T>
MapCache<T>& map_cache() {
  static MapCache<T> cache;
  return cache;
}

// batched per-channel 2-D transform via rows then columns
template <class T>
void dft2_planes(std::vector<T>& re, std::vector<T>& im, std::size_t c,
                 std::size_t h, std::size_t w, bool inverse) {
  kern::dft1d_batch(re.data(), im.data(), c * h, w, inverse);
  // transpose each channel plane, transform the columns as rows, transpose back
  std::vector<T> tre(c * h * w), tim(c * h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t base = ch * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        tre[base + x * h + y] = re[base + y * w + x];
        tim[base + x * h + y] = im[base + y * w + x];
      }
  }
  kern::dft1d_batch(tre.data(), tim.data(), c * w, h, inverse);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t base = ch * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        re[base + y * w + x] = tre[base + x * h + y];
        im[base + y * w + x] = tim[base + x * h + y];
      }
  }
}

template <class T>
void record_tape(const char* name, std::vector<Tensor<T>> ins,
                 std::vector<Tensor<T>> outs, std::function<void()> bwd) {
  if (!grad_enabled_for(ins)) return;
  std::vector<std::shared_ptr<Storage<T>>> is, os;
  for (auto& t : ins) is.push_back(t.storage());
  for (auto& t : outs) {
    t.set_requires_grad(true);
    os.push_back(t.storage());
  }
  Tape<T>::current()->record(std::move(is), std::move(os), std::move(bwd), name);
}

}  // namespace

template <class T>
Tensor<T> FrequencyFilter<T>::map(std::size_t h, std::size_t w) const {
  auto& cache = map_cache<T>();
  const auto key = std::make_tuple(static_cast<int>(mode_), sigma_, h, w);
  {
    std::shared_lock lock(cache.mu);
    auto it = cache.maps.find(key);
    if (it != cache.maps.end()) return it->second;
  }
  Tensor<T> m = build_coefficient_map<T>(mode_, sigma_, h, w);
  std::unique_lock lock(cache.mu);
  return cache.maps.emplace(key, std::move(m)).first->second;
}

template <class T>
ComplexSpectrum<T> dft2(const Tensor<T>& x) {
  if (x.rank() != 3) throw std::invalid_argument("dft2: expects [C,H,W]");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<T> re(x.vec());
  std::vector<T> im(x.numel(), T(0));
  dft2_planes(re, im, c, h, w, /*inverse=*/false);
  ComplexSpectrum<T> s{Tensor<T>(x.shape(), std::move(re)),
                       Tensor<T>(x.shape(), std::move(im))};

  auto sx = x.storage(), sre = s.real.storage(), sim = s.imag.storage();
  record_tape<T>("dft2", {x}, {s.real, s.imag}, [sx, sre, sim, c, h, w]() {
    if (!sx->requires_grad) return;
    // the DFT matrix is symmetric, so the adjoint of (x -> Re F x, Im F x)
    // is g -> Re(F g_re) + Im(F g_im)
    auto& gx = ensure_grad(*sx);
    const std::size_t n = c * h * w;
    if (!sre->grad.empty()) {
      std::vector<T> re(sre->grad), im(n, T(0));
      dft2_planes(re, im, c, h, w, false);
      for (std::size_t i = 0; i < n; ++i) gx[i] += re[i];
    }
    if (!sim->grad.empty()) {
      std::vector<T> re(sim->grad), im(n, T(0));
      dft2_planes(re, im, c, h, w, false);
      for (std::size_t i = 0; i < n; ++i) gx[i] += im[i];
    }
  });
  return s;
}

template <class T>
Tensor<T> idft2(const ComplexSpectrum<T>& s, ResiduePolicy policy) {
  if (!s.real.defined() || !s.imag.defined() || s.real.shape() != s.imag.shape())
    throw std::invalid_argument("idft2: real/imag shape mismatch");
  const std::size_t c = s.real.dim(0), h = s.real.dim(1), w = s.real.dim(2);
  const T scale = T(1) / static_cast<T>(h * w);
  std::vector<T> re(s.real.vec()), im(s.imag.vec());
  dft2_planes(re, im, c, h, w, /*inverse=*/true);
  if (policy == ResiduePolicy::AssertReal) {
    T max_re = T(0), max_im = T(0);
    for (std::size_t i = 0; i < re.size(); ++i) {
      max_re = std::max(max_re, std::abs(re[i] * scale));
      max_im = std::max(max_im, std::abs(im[i] * scale));
    }
    if (static_cast<double>(max_im) >
        1e-5 * std::max(1.0, static_cast<double>(max_re)))
      throw std::runtime_error("idft2: imaginary residue " + std::to_string(max_im) +
                               " for a spectrum claimed real");
  }
  for (auto& v : re) v *= scale;
  Tensor<T> out(s.real.shape(), std::move(re));

  auto sre = s.real.storage(), sim = s.imag.storage(), so = out.storage();
  record_tape<T>("idft2", {s.real, s.imag}, {out}, [sre, sim, so, c, h, w, scale]() {
    // out = Re(G (re + i im)) with G = conj(F)/HW, so
    // g_re = Re(G g), g_im = -Im(G g)
    std::vector<T> gre(so->grad), gim(so->grad.size(), T(0));
    dft2_planes(gre, gim, c, h, w, true);
    if (sre->requires_grad) {
      auto& g = ensure_grad(*sre);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gre[i] * scale;
    }
    if (sim->requires_grad) {
      auto& g = ensure_grad(*sim);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= gim[i] * scale;
    }
  });
  return out;
}

template <class T>
Tensor<T> pack_complex(const ComplexSpectrum<T>& s) {
  return concat<T>({s.real, s.imag}, 0);
}

template <class T>
ComplexSpectrum<T> unpack_complex(const Tensor<T>& t) {
  if (t.rank() != 3 || t.dim(0) % 2 != 0)
    throw std::invalid_argument("unpack_complex: channel count must be even");
  const std::size_t c = t.dim(0) / 2;
  return ComplexSpectrum<T>{slice0(t, 0, c), slice0(t, c, 2 * c)};
}

template <class T>
SpectralFilterModule<T>::SpectralFilterModule(FilterMode mode, double sigma,
                                              std::size_t channels,
                                              std::uint64_t seed)
    : filter(mode, sigma) {
  const std::size_t c2 = 2 * channels;
  Rng rng(seed);
  const double std1 = std::sqrt(2.0 / static_cast<double>(c2));
  conv1_w = Tensor<T>({c2, c2, 1, 1});
  conv2_w = Tensor<T>({c2, c2, 1, 1});
  for (std::size_t i = 0; i < conv1_w.numel(); ++i)
    conv1_w.data()[i] = static_cast<T>(rng.normal() * std1);
  for (std::size_t i = 0; i < conv2_w.numel(); ++i)
    conv2_w.data()[i] = static_cast<T>(rng.normal() * std1);
  conv1_b = Tensor<T>({c2});
  conv2_b = Tensor<T>({c2});
}

template <class T>
Tensor<T> SpectralFilterModule<T>::forward(const Tensor<T>& x) const {
  const std::size_t h = x.dim(1), w = x.dim(2);
  ComplexSpectrum<T> y = dft2(x);
  Tensor<T> g = filter.map(h, w);
  y.real = mul(y.real, g);
  y.imag = mul(y.imag, g);
  Tensor<T> t = pack_complex(y);
  t = relu(conv2d(t, conv1_w, conv1_b, Padding::Zero));
  t = conv2d(t, conv2_w, conv2_b, Padding::Zero);
  ComplexSpectrum<T> upd = unpack_complex(t);
  // the learned update is unconstrained, so the inverse takes the real part
  return add(idft2(upd, ResiduePolicy::TakeReal), x);
}

#define GSFM_INSTANTIATE(T)                                                     \
  template Tensor<T> build_coefficient_map<T>(FilterMode, double, std::size_t,  \
                                              std::size_t);                     \
  template class FrequencyFilter<T>;                                            \
  template ComplexSpectrum<T> dft2<T>(const Tensor<T>&);                        \
  template Tensor<T> idft2<T>(const ComplexSpectrum<T>&, ResiduePolicy);        \
  template Tensor<T> pack_complex<T>(const ComplexSpectrum<T>&);                \
  template ComplexSpectrum<T> unpack_complex<T>(const Tensor<T>&);              \
  template struct SpectralFilterModule<T>;

GSFM_INSTANTIATE(float)
GSFM_INSTANTIATE(double)
#undef GSFM_INSTANTIATE

}  // namespace gsfm
