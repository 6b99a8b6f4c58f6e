#include "gsfm/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <vector>

#ifdef GSFM_HAS_OPENMP
#include <omp.h>
#endif

namespace gsfm::kern {

namespace {
std::atomic<bool> g_parallel{true};
}

bool parallel_enabled() {
#ifdef GSFM_HAS_OPENMP
  return g_parallel.load(std::memory_order_relaxed);
#else
  return false;
#endif
}

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

int thread_count() {
#ifdef GSFM_HAS_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int n) {
#ifdef GSFM_HAS_OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace {

inline long clamp_idx(long v, long lo, long hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// twiddle tables e^{-2*pi*i*m/n} (conjugated for inverse), built in double
// and narrowed to T so float32 and float64 paths stay self-consistent
template <class T>
void build_twiddles(std::size_t n, bool inverse, std::vector<T>& cre, std::vector<T>& cim) {
  cre.resize(n);
  cim.resize(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t m = 0; m < n; ++m) {
    double ang = sign * 2.0 * 3.141592653589793238462643383279502884 *
                 static_cast<double>(m) / static_cast<double>(n);
    cre[m] = static_cast<T>(std::cos(ang));
    cim[m] = static_cast<T>(std::sin(ang));
  }
}

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// in-place radix-2 on one signal; twiddles indexed by m*(n/len)
template <class T>
void fft_radix2_one(T* re, T* im, std::size_t n, const T* cre, const T* cim) {
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        T wr = cre[k * step];
        T wi = cim[k * step];
        std::size_t a = i + k, b = i + k + len / 2;
        T tr = re[b] * wr - im[b] * wi;
        T ti = re[b] * wi + im[b] * wr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
      }
    }
  }
}

// O(n^2) fallback for non-power-of-two lengths
template <class T>
void dft_naive_one(T* re, T* im, std::size_t n, const T* cre, const T* cim,
                   T* sre, T* sim) {
  for (std::size_t k = 0; k < n; ++k) {
    T ar = T(0), ai = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t m = (j * k) % n;
      ar += re[j] * cre[m] - im[j] * cim[m];
      ai += re[j] * cim[m] + im[j] * cre[m];
    }
    sre[k] = ar;
    sim[k] = ai;
  }
  std::memcpy(re, sre, n * sizeof(T));
  std::memcpy(im, sim, n * sizeof(T));
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference kernels
// ---------------------------------------------------------------------------

namespace serial {

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y,
                    std::size_t cin, std::size_t h, std::size_t wd,
                    std::size_t cout, std::size_t k, Padding pad) {
  const long r = static_cast<long>(k / 2);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t oy = 0; oy < h; ++oy) {
      for (std::size_t ox = 0; ox < wd; ++ox) {
        T acc = bias ? bias[co] : T(0);
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const T* xp = x + ci * h * wd;
          const T* wp = w + (co * cin + ci) * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            long iy = static_cast<long>(oy) + static_cast<long>(ky) - r;
            for (std::size_t kx = 0; kx < k; ++kx) {
              long ix = static_cast<long>(ox) + static_cast<long>(kx) - r;
              T xv;
              if (pad == Padding::Zero) {
                xv = (iy < 0 || iy >= static_cast<long>(h) || ix < 0 ||
                      ix >= static_cast<long>(wd))
                         ? T(0)
                         : xp[iy * wd + ix];
              } else {
                long cy = clamp_idx(iy, 0, static_cast<long>(h) - 1);
                long cx = clamp_idx(ix, 0, static_cast<long>(wd) - 1);
                xv = xp[cy * wd + cx];
              }
              acc += xv * wp[ky * k + kx];
            }
          }
        }
        y[(co * h + oy) * wd + ox] = acc;
      }
    }
  }
}

template <class T>
void conv2d_backward_input(const T* gy, const T* w, T* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t k, Padding pad) {
  const long r = static_cast<long>(k / 2);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    T* gxp = gx + ci * h * wd;
    for (std::size_t co = 0; co < cout; ++co) {
      const T* gyp = gy + co * h * wd;
      const T* wp = w + (co * cin + ci) * k * k;
      for (std::size_t oy = 0; oy < h; ++oy) {
        for (std::size_t ox = 0; ox < wd; ++ox) {
          T g = gyp[oy * wd + ox];
          for (std::size_t ky = 0; ky < k; ++ky) {
            long iy = static_cast<long>(oy) + static_cast<long>(ky) - r;
            for (std::size_t kx = 0; kx < k; ++kx) {
              long ix = static_cast<long>(ox) + static_cast<long>(kx) - r;
              if (pad == Padding::Zero) {
                if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 ||
                    ix >= static_cast<long>(wd))
                  continue;
                gxp[iy * wd + ix] += g * wp[ky * k + kx];
              } else {
                long cy = clamp_idx(iy, 0, static_cast<long>(h) - 1);
                long cx = clamp_idx(ix, 0, static_cast<long>(wd) - 1);
                gxp[cy * wd + cx] += g * wp[ky * k + kx];
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t k, Padding pad) {
  const long r = static_cast<long>(k / 2);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* gyp = gy + co * h * wd;
      const T* xp = x + ci * h * wd;
      T* gwp = gw + (co * cin + ci) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          T acc = T(0);
          for (std::size_t oy = 0; oy < h; ++oy) {
            long iy = static_cast<long>(oy) + static_cast<long>(ky) - r;
            for (std::size_t ox = 0; ox < wd; ++ox) {
              long ix = static_cast<long>(ox) + static_cast<long>(kx) - r;
              T xv;
              if (pad == Padding::Zero) {
                if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 ||
                    ix >= static_cast<long>(wd))
                  continue;
                xv = xp[iy * wd + ix];
              } else {
                long cy = clamp_idx(iy, 0, static_cast<long>(h) - 1);
                long cx = clamp_idx(ix, 0, static_cast<long>(wd) - 1);
                xv = xp[cy * wd + cx];
              }
              acc += gyp[oy * wd + ox] * xv;
            }
          }
          gwp[ky * k + kx] += acc;
        }
      }
    }
  }
}

template <class T>
void dft1d_batch(T* re, T* im, std::size_t count, std::size_t n, bool inverse) {
  if (n == 1 || count == 0) return;
  std::vector<T> cre, cim;
  build_twiddles<T>(n, inverse, cre, cim);
  if (is_pow2(n)) {
    for (std::size_t s = 0; s < count; ++s)
      fft_radix2_one(re + s * n, im + s * n, n, cre.data(), cim.data());
  } else {
    std::vector<T> sre(n), sim(n);
    for (std::size_t s = 0; s < count; ++s)
      dft_naive_one(re + s * n, im + s * n, n, cre.data(), cim.data(),
                    sre.data(), sim.data());
  }
}

template <class T>
void affinity_forward(const T* q, const T* m, T* a,
                      std::size_t ck, std::size_t nq, std::size_t nm) {
  std::vector<T> qn(nq, T(0)), mn(nm, T(0));
  for (std::size_t c = 0; c < ck; ++c) {
    for (std::size_t i = 0; i < nq; ++i) qn[i] += q[c * nq + i] * q[c * nq + i];
    for (std::size_t j = 0; j < nm; ++j) mn[j] += m[c * nm + j] * m[c * nm + j];
  }
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < nm; ++j) {
      T dot = T(0);
      for (std::size_t c = 0; c < ck; ++c) dot += q[c * nq + i] * m[c * nm + j];
      a[i * nm + j] = T(2) * dot - qn[i] - mn[j];
    }
  }
}

template <class T>
void affinity_backward(const T* ga, const T* q, const T* m, T* gq, T* gm,
                       std::size_t ck, std::size_t nq, std::size_t nm) {
  // dA/dq_i = -2 (q_i - m_j), dA/dm_j = 2 (q_i - m_j)
  for (std::size_t i = 0; i < nq; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < nm; ++j) s += ga[i * nm + j];
    for (std::size_t c = 0; c < ck; ++c) {
      T acc = T(0);
      for (std::size_t j = 0; j < nm; ++j) acc += ga[i * nm + j] * m[c * nm + j];
      gq[c * nq + i] += T(-2) * (q[c * nq + i] * s - acc);
    }
  }
  for (std::size_t j = 0; j < nm; ++j) {
    T t = T(0);
    for (std::size_t i = 0; i < nq; ++i) t += ga[i * nm + j];
    for (std::size_t c = 0; c < ck; ++c) {
      T acc = T(0);
      for (std::size_t i = 0; i < nq; ++i) acc += ga[i * nm + j] * q[c * nq + i];
      gm[c * nm + j] += T(2) * (acc - m[c * nm + j] * t);
    }
  }
}

template <class T>
void readout_forward(const T* wgt, const T* v, T* out,
                     std::size_t cv, std::size_t nq, std::size_t nm) {
  for (std::size_t c = 0; c < cv; ++c) {
    for (std::size_t i = 0; i < nq; ++i) {
      T acc = T(0);
      for (std::size_t j = 0; j < nm; ++j) acc += wgt[i * nm + j] * v[c * nm + j];
      out[c * nq + i] = acc;
    }
  }
}

template <class T>
void readout_backward(const T* gout, const T* wgt, const T* v, T* gw, T* gv,
                      std::size_t cv, std::size_t nq, std::size_t nm) {
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < nm; ++j) {
      T acc = T(0);
      for (std::size_t c = 0; c < cv; ++c) acc += gout[c * nq + i] * v[c * nm + j];
      gw[i * nm + j] += acc;
    }
  }
  for (std::size_t c = 0; c < cv; ++c) {
    for (std::size_t j = 0; j < nm; ++j) {
      T acc = T(0);
      for (std::size_t i = 0; i < nq; ++i) acc += wgt[i * nm + j] * gout[c * nq + i];
      gv[c * nm + j] += acc;
    }
  }
}

template <class T>
void upsample2x_forward(const T* x, T* y, std::size_t c, std::size_t h, std::size_t w) {
  const std::size_t oh = 2 * h, ow = 2 * w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* xp = x + ch * h * w;
    T* yp = y + ch * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      double fy = (static_cast<double>(oy) + 0.5) / 2.0 - 0.5;
      long y0 = static_cast<long>(std::floor(fy));
      double wy = fy - static_cast<double>(y0);
      long ya = clamp_idx(y0, 0, static_cast<long>(h) - 1);
      long yb = clamp_idx(y0 + 1, 0, static_cast<long>(h) - 1);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double fx = (static_cast<double>(ox) + 0.5) / 2.0 - 0.5;
        long x0 = static_cast<long>(std::floor(fx));
        double wx = fx - static_cast<double>(x0);
        long xa = clamp_idx(x0, 0, static_cast<long>(w) - 1);
        long xb = clamp_idx(x0 + 1, 0, static_cast<long>(w) - 1);
        double v = (1.0 - wy) * ((1.0 - wx) * xp[ya * w + xa] + wx * xp[ya * w + xb]) +
                   wy * ((1.0 - wx) * xp[yb * w + xa] + wx * xp[yb * w + xb]);
        yp[oy * ow + ox] = static_cast<T>(v);
      }
    }
  }
}

template <class T>
void upsample2x_backward(const T* gy, T* gx, std::size_t c, std::size_t h, std::size_t w) {
  const std::size_t oh = 2 * h, ow = 2 * w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* gyp = gy + ch * oh * ow;
    T* gxp = gx + ch * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      double fy = (static_cast<double>(oy) + 0.5) / 2.0 - 0.5;
      long y0 = static_cast<long>(std::floor(fy));
      double wy = fy - static_cast<double>(y0);
      long ya = clamp_idx(y0, 0, static_cast<long>(h) - 1);
      long yb = clamp_idx(y0 + 1, 0, static_cast<long>(h) - 1);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double fx = (static_cast<double>(ox) + 0.5) / 2.0 - 0.5;
        long x0 = static_cast<long>(std::floor(fx));
        double wx = fx - static_cast<double>(x0);
        long xa = clamp_idx(x0, 0, static_cast<long>(w) - 1);
        long xb = clamp_idx(x0 + 1, 0, static_cast<long>(w) - 1);
        T g = gyp[oy * ow + ox];
        gxp[ya * w + xa] += static_cast<T>((1.0 - wy) * (1.0 - wx)) * g;
        gxp[ya * w + xb] += static_cast<T>((1.0 - wy) * wx) * g;
        gxp[yb * w + xa] += static_cast<T>(wy * (1.0 - wx)) * g;
        gxp[yb * w + xb] += static_cast<T>(wy * wx) * g;
      }
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels. Work splits over independent outputs; per-output arithmetic
// matches the serial loops exactly, so results are bit-identical.
// ---------------------------------------------------------------------------

namespace par {

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y,
                    std::size_t cin, std::size_t h, std::size_t wd,
                    std::size_t cout, std::size_t k, Padding pad) {
  const long r = static_cast<long>(k / 2);
  const long hh = static_cast<long>(h), ww = static_cast<long>(wd);
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t oy = 0; oy < h; ++oy) {
      for (std::size_t ox = 0; ox < wd; ++ox) {
        T acc = bias ? bias[co] : T(0);
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const T* xp = x + ci * h * wd;
          const T* wp = w + (co * cin + ci) * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            long iy = static_cast<long>(oy) + static_cast<long>(ky) - r;
            for (std::size_t kx = 0; kx < k; ++kx) {
              long ix = static_cast<long>(ox) + static_cast<long>(kx) - r;
              T xv;
              if (pad == Padding::Zero) {
                xv = (iy < 0 || iy >= hh || ix < 0 || ix >= ww) ? T(0)
                                                                : xp[iy * wd + ix];
              } else {
                xv = xp[clamp_idx(iy, 0, hh - 1) * wd + clamp_idx(ix, 0, ww - 1)];
              }
              acc += xv * wp[ky * k + kx];
            }
          }
        }
        y[(co * h + oy) * wd + ox] = acc;
      }
    }
  }
}

template <class T>
void conv2d_backward_input(const T* gy, const T* w, T* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t k, Padding pad) {
  // scatter form; each input channel plane is owned by one iteration
  const long r = static_cast<long>(k / 2);
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t ci = 0; ci < cin; ++ci) {
    T* gxp = gx + ci * h * wd;
    for (std::size_t co = 0; co < cout; ++co) {
      const T* gyp = gy + co * h * wd;
      const T* wp = w + (co * cin + ci) * k * k;
      for (std::size_t oy = 0; oy < h; ++oy) {
        for (std::size_t ox = 0; ox < wd; ++ox) {
          T g = gyp[oy * wd + ox];
          for (std::size_t ky = 0; ky < k; ++ky) {
            long iy = static_cast<long>(oy) + static_cast<long>(ky) - r;
            for (std::size_t kx = 0; kx < k; ++kx) {
              long ix = static_cast<long>(ox) + static_cast<long>(kx) - r;
              if (pad == Padding::Zero) {
                if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 ||
                    ix >= static_cast<long>(wd))
                  continue;
                gxp[iy * wd + ix] += g * wp[ky * k + kx];
              } else {
                long cy = clamp_idx(iy, 0, static_cast<long>(h) - 1);
                long cx = clamp_idx(ix, 0, static_cast<long>(wd) - 1);
                gxp[cy * wd + cx] += g * wp[ky * k + kx];
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t k, Padding pad) {
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      serial::conv2d_backward_weight(gy + co * h * wd, x + ci * h * wd,
                                     gw + (co * cin + ci) * k * k, 1, h, wd, 1, k,
                                     pad);
    }
  }
}

template <class T>
void dft1d_batch(T* re, T* im, std::size_t count, std::size_t n, bool inverse) {
  if (n == 1 || count == 0) return;
  std::vector<T> cre, cim;
  build_twiddles<T>(n, inverse, cre, cim);
  if (is_pow2(n)) {
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::size_t s = 0; s < count; ++s)
      fft_radix2_one(re + s * n, im + s * n, n, cre.data(), cim.data());
  } else {
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel
#endif
    {
      std::vector<T> sre(n), sim(n);
#ifdef GSFM_HAS_OPENMP
#pragma omp for schedule(static)
#endif
      for (std::size_t s = 0; s < count; ++s)
        dft_naive_one(re + s * n, im + s * n, n, cre.data(), cim.data(),
                      sre.data(), sim.data());
    }
  }
}

template <class T>
void affinity_forward(const T* q, const T* m, T* a,
                      std::size_t ck, std::size_t nq, std::size_t nm) {
  std::vector<T> qn(nq, T(0)), mn(nm, T(0));
  for (std::size_t c = 0; c < ck; ++c) {
    for (std::size_t i = 0; i < nq; ++i) qn[i] += q[c * nq + i] * q[c * nq + i];
    for (std::size_t j = 0; j < nm; ++j) mn[j] += m[c * nm + j] * m[c * nm + j];
  }
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < nm; ++j) {
      T dot = T(0);
      for (std::size_t c = 0; c < ck; ++c) dot += q[c * nq + i] * m[c * nm + j];
      a[i * nm + j] = T(2) * dot - qn[i] - mn[j];
    }
  }
}

template <class T>
void affinity_backward(const T* ga, const T* q, const T* m, T* gq, T* gm,
                       std::size_t ck, std::size_t nq, std::size_t nm) {
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < nq; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < nm; ++j) s += ga[i * nm + j];
    for (std::size_t c = 0; c < ck; ++c) {
      T acc = T(0);
      for (std::size_t j = 0; j < nm; ++j) acc += ga[i * nm + j] * m[c * nm + j];
      gq[c * nq + i] += T(-2) * (q[c * nq + i] * s - acc);
    }
  }
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t j = 0; j < nm; ++j) {
    T t = T(0);
    for (std::size_t i = 0; i < nq; ++i) t += ga[i * nm + j];
    for (std::size_t c = 0; c < ck; ++c) {
      T acc = T(0);
      for (std::size_t i = 0; i < nq; ++i) acc += ga[i * nm + j] * q[c * nq + i];
      gm[c * nm + j] += T(2) * (acc - m[c * nm + j] * t);
    }
  }
}

template <class T>
void readout_forward(const T* wgt, const T* v, T* out,
                     std::size_t cv, std::size_t nq, std::size_t nm) {
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (std::size_t c = 0; c < cv; ++c) {
    for (std::size_t i = 0; i < nq; ++i) {
      T acc = T(0);
      for (std::size_t j = 0; j < nm; ++j) acc += wgt[i * nm + j] * v[c * nm + j];
      out[c * nq + i] = acc;
    }
  }
}

template <class T>
void readout_backward(const T* gout, const T* wgt, const T* v, T* gw, T* gv,
                      std::size_t cv, std::size_t nq, std::size_t nm) {
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < nm; ++j) {
      T acc = T(0);
      for (std::size_t c = 0; c < cv; ++c) acc += gout[c * nq + i] * v[c * nm + j];
      gw[i * nm + j] += acc;
    }
  }
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (std::size_t c = 0; c < cv; ++c) {
    for (std::size_t j = 0; j < nm; ++j) {
      T acc = T(0);
      for (std::size_t i = 0; i < nq; ++i) acc += wgt[i * nm + j] * gout[c * nq + i];
      gv[c * nm + j] += acc;
    }
  }
}

template <class T>
void upsample2x_forward(const T* x, T* y, std::size_t c, std::size_t h, std::size_t w) {
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t ch = 0; ch < c; ++ch)
    serial::upsample2x_forward(x + ch * h * w, y + ch * 4 * h * w, 1, h, w);
}

template <class T>
void upsample2x_backward(const T* gy, T* gx, std::size_t c, std::size_t h, std::size_t w) {
#ifdef GSFM_HAS_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t ch = 0; ch < c; ++ch)
    serial::upsample2x_backward(gy + ch * 4 * h * w, gx + ch * h * w, 1, h, w);
}

}  // namespace par

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

#define GSFM_DISPATCH(fn, ...)            \
  do {                                    \
    if (parallel_enabled())               \
      par::fn(__VA_ARGS__);               \
    else                                  \
      serial::fn(__VA_ARGS__);            \
  } while (0)

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y,
                    std::size_t cin, std::size_t h, std::size_t wd,
                    std::size_t cout, std::size_t k, Padding pad) {
  GSFM_DISPATCH(conv2d_forward, x, w, bias, y, cin, h, wd, cout, k, pad);
}
template <class T>
void conv2d_backward_input(const T* gy, const T* w, T* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t k, Padding pad) {
  GSFM_DISPATCH(conv2d_backward_input, gy, w, gx, cin, h, wd, cout, k, pad);
}
template <class T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t k, Padding pad) {
  GSFM_DISPATCH(conv2d_backward_weight, gy, x, gw, cin, h, wd, cout, k, pad);
}
template <class T>
void dft1d_batch(T* re, T* im, std::size_t count, std::size_t n, bool inverse) {
  GSFM_DISPATCH(dft1d_batch, re, im, count, n, inverse);
}
template <class T>
void affinity_forward(const T* q, const T* m, T* a,
                      std::size_t ck, std::size_t nq, std::size_t nm) {
  GSFM_DISPATCH(affinity_forward, q, m, a, ck, nq, nm);
}
template <class T>
void affinity_backward(const T* ga, const T* q, const T* m, T* gq, T* gm,
                       std::size_t ck, std::size_t nq, std::size_t nm) {
  GSFM_DISPATCH(affinity_backward, ga, q, m, gq, gm, ck, nq, nm);
}
template <class T>
void readout_forward(const T* wgt, const T* v, T* out,
                     std::size_t cv, std::size_t nq, std::size_t nm) {
  GSFM_DISPATCH(readout_forward, wgt, v, out, cv, nq, nm);
}
template <class T>
void readout_backward(const T* gout, const T* wgt, const T* v, T* gw, T* gv,
                      std::size_t cv, std::size_t nq, std::size_t nm) {
  GSFM_DISPATCH(readout_backward, gout, wgt, v, gw, gv, cv, nq, nm);
}
template <class T>
void upsample2x_forward(const T* x, T* y, std::size_t c, std::size_t h, std::size_t w) {
  GSFM_DISPATCH(upsample2x_forward, x, y, c, h, w);
}
template <class T>
void upsample2x_backward(const T* gy, T* gx, std::size_t c, std::size_t h, std::size_t w) {
  GSFM_DISPATCH(upsample2x_backward, gy, gx, c, h, w);
}

#undef GSFM_DISPATCH

// explicit instantiations for the two supported scalar types
#define GSFM_INSTANTIATE(T)                                                          \
  template void serial::conv2d_forward<T>(const T*, const T*, const T*, T*,          \
                                          std::size_t, std::size_t, std::size_t,     \
                                          std::size_t, std::size_t, Padding);        \
  template void serial::conv2d_backward_input<T>(const T*, const T*, T*,             \
                                                 std::size_t, std::size_t,           \
                                                 std::size_t, std::size_t,           \
                                                 std::size_t, Padding);              \
  template void serial::conv2d_backward_weight<T>(const T*, const T*, T*,            \
                                                  std::size_t, std::size_t,          \
                                                  std::size_t, std::size_t,          \
                                                  std::size_t, Padding);             \
  template void serial::dft1d_batch<T>(T*, T*, std::size_t, std::size_t, bool);      \
  template void serial::affinity_forward<T>(const T*, const T*, T*, std::size_t,     \
                                            std::size_t, std::size_t);               \
  template void serial::affinity_backward<T>(const T*, const T*, const T*, T*, T*,   \
                                             std::size_t, std::size_t, std::size_t); \
  template void serial::readout_forward<T>(const T*, const T*, T*, std::size_t,      \
                                           std::size_t, std::size_t);                \
  template void serial::readout_backward<T>(const T*, const T*, const T*, T*, T*,    \
                                            std::size_t, std::size_t, std::size_t);  \
  template void serial::upsample2x_forward<T>(const T*, T*, std::size_t,             \
                                              std::size_t, std::size_t);             \
  template void serial::upsample2x_backward<T>(const T*, T*, std::size_t,            \
                                               std::size_t, std::size_t);            \
  template void par::conv2d_forward<T>(const T*, const T*, const T*, T*,             \
                                       std::size_t, std::size_t, std::size_t,        \
                                       std::size_t, std::size_t, Padding);           \
  template void par::conv2d_backward_input<T>(const T*, const T*, T*, std::size_t,   \
                                              std::size_t, std::size_t, std::size_t, \
                                              std::size_t, Padding);                 \
  template void par::conv2d_backward_weight<T>(const T*, const T*, T*, std::size_t,  \
                                               std::size_t, std::size_t,             \
                                               std::size_t, std::size_t, Padding);   \
  template void par::dft1d_batch<T>(T*, T*, std::size_t, std::size_t, bool);         \
  template void par::affinity_forward<T>(const T*, const T*, T*, std::size_t,        \
                                         std::size_t, std::size_t);                  \
  template void par::affinity_backward<T>(const T*, const T*, const T*, T*, T*,      \
                                          std::size_t, std::size_t, std::size_t);    \
  template void par::readout_forward<T>(const T*, const T*, T*, std::size_t,         \
                                        std::size_t, std::size_t);                   \
  template void par::readout_backward<T>(const T*, const T*, const T*, T*, T*,       \
                                         std::size_t, std::size_t, std::size_t);     \
  template void par::upsample2x_forward<T>(const T*, T*, std::size_t, std::size_t,   \
                                           std::size_t);                             \
  template void par::upsample2x_backward<T>(const T*, T*, std::size_t, std::size_t,  \
                                            std::size_t);                            \
  template void conv2d_forward<T>(const T*, const T*, const T*, T*, std::size_t,     \
                                  std::size_t, std::size_t, std::size_t,             \
                                  std::size_t, Padding);                             \
  template void conv2d_backward_input<T>(const T*, const T*, T*, std::size_t,        \
                                         std::size_t, std::size_t, std::size_t,      \
                                         std::size_t, Padding);                      \
  template void conv2d_backward_weight<T>(const T*, const T*, T*, std::size_t,       \
                                          std::size_t, std::size_t, std::size_t,     \
                                          std::size_t, Padding);                     \
  template void dft1d_batch<T>(T*, T*, std::size_t, std::size_t, bool);              \
  template void affinity_forward<T>(const T*, const T*, T*, std::size_t,             \
                                    std::size_t, std::size_t);                       \
  template void affinity_backward<T>(const T*, const T*, const T*, T*, T*,           \
                                     std::size_t, std::size_t, std::size_t);         \
  template void readout_forward<T>(const T*, const T*, T*, std::size_t,              \
                                   std::size_t, std::size_t);                        \
  template void readout_backward<T>(const T*, const T*, const T*, T*, T*,            \
                                    std::size_t, std::size_t, std::size_t);          \
  template void upsample2x_forward<T>(const T*, T*, std::size_t, std::size_t,        \
                                      std::size_t);                                  \
  template void upsample2x_backward<T>(const T*, T*, std::size_t, std::size_t,       \
                                       std::size_t);

GSFM_INSTANTIATE(float)
GSFM_INSTANTIATE(double)
#undef GSFM_INSTANTIATE

}  // namespace gsfm::kern
