#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsfm/boundary.hpp"
#include "gsfm/memory.hpp"
#include "gsfm/optim.hpp"
#include "gsfm/spectral.hpp"
#include "gsfm/tensor.hpp"

namespace gsfm {

struct GsfmConfig {
  std::size_t input_h = 64;
  std::size_t input_w = 64;
  std::size_t encoder_stride = 4;  // two 2x pools in the 3-stage encoders
  std::size_t base_channels = 8;
  std::size_t key_channels = 8;
  std::size_t value_channels = 16;
  std::size_t decoder_channels = 8;  // trunk width at full resolution

  bool lfm_enabled = true;
  bool hfm_enabled = true;
  bool boundary_branch = true;
  std::string lfm_mode = "low";   // encoder filter
  std::string hfm_mode = "high";  // decoder filter
  double lfm_sigma = 7.0;
  double hfm_sigma = 7.0;

  std::size_t top_k = 50;  // clamped to the memory size
  int memorize_every = 3;
  double boundary_loss_weight = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

template <class T>
struct Conv {
  Tensor<T> w, b;
  Conv() = default;
  Conv(std::size_t cout, std::size_t cin, std::size_t k, const std::string& name,
       std::uint64_t seed);
  Tensor<T> operator()(const Tensor<T>& x, Padding pad = Padding::Zero) const {
    return conv2d(x, w, b, pad);
  }
};

template <class T>
struct EncoderSkips {
  Tensor<T> full;     // base channels at input resolution
  Tensor<T> half;     // 2x base channels at half resolution
  Tensor<T> deepest;  // 2x base channels at stride 4, post-LFM
};

template <class T>
struct SegmentationOutput {
  Tensor<T> mask_logits;      // [2,H,W]: background, object
  Tensor<T> boundary_logits;  // [1,H,W]; undefined when the branch is off
};

template <class T>
class GsfmModel {
 public:
  explicit GsfmModel(const GsfmConfig& cfg);

  const GsfmConfig& config() const { return cfg_; }

  // key computed once per frame; reused as the memory key when memorizing
  std::pair<Tensor<T>, EncoderSkips<T>> encode_key(const Tensor<T>& frame) const;
  Tensor<T> encode_value(const Tensor<T>& frame, const Tensor<T>& mask,
                         const Tensor<T>& key_deepest) const;

  SegmentationOutput<T> decode(const Tensor<T>& memory_read,
                               const EncoderSkips<T>& skips) const;

  SegmentationOutput<T> segment_frame(const Tensor<T>& frame,
                                      const MemoryBank<T>& bank) const;

  // per-object passes merged by pixel-wise argmax with soft background
  std::vector<std::vector<Tensor<T>>> segment_video(
      const std::vector<Tensor<T>>& frames,
      const std::vector<Tensor<T>>& first_masks) const;

  Tensor<T> memory_read(const Tensor<T>& key_flat, const MemoryBank<T>& bank) const;

  ParamList<T> named_parameters();
  void set_requires_grad(bool on);
  void save_checkpoint(const std::string& dir) const;
  void load_checkpoint(const std::string& dir);

 private:
  GsfmConfig cfg_;

  // key encoder
  Conv<T> k_s0_, k_s1_, k_s2_, k_proj_;
  SpectralFilterModule<T> k_lfm_;
  // value encoder
  Conv<T> v_s0_, v_s1_, v_s2_, v_compress_;
  Conv<T> v_r1a_, v_r1b_, v_r2a_, v_r2b_;
  Conv<T> v_attn1_, v_attn2_;
  SpectralFilterModule<T> v_lfm_;
  Conv<T> v_proj_;
  // decoder
  Conv<T> d_in_, d_mid_, d_skip_half_, d_up1_, d_skip_full_, d_up2_;
  Conv<T> d_mask_branch_, d_bnd_branch_;
  SpectralFilterModule<T> d_hfm_;
  FusionBlock<T> m2b_, b2m_;
  Conv<T> d_mask_head_, d_bnd_head_;
};

struct TrainSample {
  // three chronological frames of one object
  std::vector<Tensor<float>> frames;          // [3,H,W] each
  std::vector<Tensor<float>> masks;           // [1,H,W] each
};

struct StepStats {
  double total = 0.0;
  double mask = 0.0;
  double boundary = 0.0;
};

// One optimizer update on a batch of 3-frame samples: frame 1 is segmented
// from memory {0}, frame 2 from {0, 1-with-predicted-mask}.
StepStats train_step(GsfmModel<float>& model, const std::vector<TrainSample>& batch,
                     Optimizer<float>& optim, double keep_fraction);

// forward + losses without an optimizer update (shares train_step's path)
template <class T>
Tensor<T> training_loss(GsfmModel<T>& model, const std::vector<Tensor<T>>& frames,
                        const std::vector<Tensor<T>>& masks, double keep_fraction,
                        StepStats* stats = nullptr);

}  // namespace gsfm
