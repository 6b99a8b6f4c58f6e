#pragma once

#include "gsfm/tensor.hpp"

namespace gsfm {

// Frequency-domain tensor: per-channel 2-D spectrum of a [C,H,W] signal, DC
// bin at index (0,0) (no spectrum centering). Unnormalized forward transform,
// 1/(H*W) on the inverse.
template <class T>
struct ComplexSpectrum {
  Tensor<T> real;
  Tensor<T> imag;
};

enum class FilterMode { Low, High, Full };

FilterMode filter_mode_from_string(const std::string& s);
std::string to_string(FilterMode m);

// Gaussian frequency mask. D(u,v) is the Euclidean distance of bin (u,v)
// from the array center (floor(H/2), floor(W/2)); because the spectrum is not
// centered, the array center is the highest frequency.
//   low  : 1 - exp(-D^2 / (2 sigma^2))   (0 at the center bin)
//   high :     exp(-D^2 / (2 sigma^2))   (1 at the center bin)
//   full : 1 everywhere
template <class T>
Tensor<T> build_coefficient_map(FilterMode mode, double sigma, std::size_t h,
                                std::size_t w);

// cached per (mode, sigma, H, W); read-mostly with exclusive insertion
template <class T>
class FrequencyFilter {
 public:
  FrequencyFilter(FilterMode mode, double sigma) : mode_(mode), sigma_(sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("FrequencyFilter: sigma must be > 0");
  }
  FilterMode mode() const { return mode_; }
  double sigma() const { return sigma_; }
  // shared coefficient map for the requested spatial size
  Tensor<T> map(std::size_t h, std::size_t w) const;

 private:
  FilterMode mode_;
  double sigma_;
};

template <class T>
ComplexSpectrum<T> dft2(const Tensor<T>& x);

enum class ResiduePolicy {
  AssertReal,  // require |imag residue| < 1e-5 * max(1, max|real|)
  TakeReal,    // drop the imaginary part silently
};

template <class T>
Tensor<T> idft2(const ComplexSpectrum<T>& s, ResiduePolicy policy = ResiduePolicy::AssertReal);

// real channels first, imaginary appended along the channel axis
template <class T>
Tensor<T> pack_complex(const ComplexSpectrum<T>& s);
template <class T>
ComplexSpectrum<T> unpack_complex(const Tensor<T>& t);

// Residual spectral update block (both the low- and high-frequency variant):
//   y = dft2(x); y *= g; t = pack(y); t = conv2(relu(conv1(t)));
//   out = idft2(unpack(t)).real + x
template <class T>
struct SpectralFilterModule {
  FrequencyFilter<T> filter;
  Tensor<T> conv1_w, conv1_b;  // 1x1 over 2C channels
  Tensor<T> conv2_w, conv2_b;

  SpectralFilterModule(FilterMode mode, double sigma, std::size_t channels,
                       std::uint64_t seed);
  Tensor<T> forward(const Tensor<T>& x) const;
  std::size_t channels() const { return conv1_w.dim(1) / 2; }
};

}  // namespace gsfm
