#include "gsfm/model.hpp"

#include <cmath>
#include <filesystem>

#include "gsfm/rng.hpp"
#include "gsfm/serialize.hpp"

namespace gsfm {

void GsfmConfig::validate() const {
  if (input_h % encoder_stride || input_w % encoder_stride)
    throw std::invalid_argument("config: input size not divisible by stride");
  if (encoder_stride != 4)
    throw std::invalid_argument("config: the 3-stage encoder fixes stride 4");
  if (!base_channels || !key_channels || !value_channels || !decoder_channels)
    throw std::invalid_argument("config: channel counts must be positive");
  if (top_k < 1) throw std::invalid_argument("config: top_k >= 1");
  if (memorize_every < 1) throw std::invalid_argument("config: memorize_every >= 1");
  filter_mode_from_string(lfm_mode);
  filter_mode_from_string(hfm_mode);
}

template <class T>
Conv<T>::Conv(std::size_t cout, std::size_t cin, std::size_t k,
              const std::string& name, std::uint64_t seed) {
  // seeded per tensor name so shared modules init identically across variants
  Rng rng(fnv1a(name) ^ seed);
  const double stddev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
  w = Tensor<T>({cout, cin, k, k});
  for (std::size_t i = 0; i < w.numel(); ++i)
    w.data()[i] = static_cast<T>(rng.normal() * stddev);
  b = Tensor<T>({cout});
}

template <class T>
GsfmModel<T>::GsfmModel(const GsfmConfig& cfg)
    : cfg_(cfg),
      k_s0_(cfg.base_channels, 3, 3, "key.s0", cfg.seed),
      k_s1_(2 * cfg.base_channels, cfg.base_channels, 3, "key.s1", cfg.seed),
      k_s2_(2 * cfg.base_channels, 2 * cfg.base_channels, 3, "key.s2", cfg.seed),
      k_proj_(cfg.key_channels, 2 * cfg.base_channels, 1, "key.proj", cfg.seed),
      k_lfm_(filter_mode_from_string(cfg.lfm_mode), cfg.lfm_sigma,
             2 * cfg.base_channels, fnv1a("key.lfm") ^ cfg.seed),
      v_s0_(cfg.base_channels, 4, 3, "value.s0", cfg.seed),
      v_s1_(2 * cfg.base_channels, cfg.base_channels, 3, "value.s1", cfg.seed),
      v_s2_(2 * cfg.base_channels, 2 * cfg.base_channels, 3, "value.s2", cfg.seed),
      v_compress_(2 * cfg.base_channels, 4 * cfg.base_channels, 1, "value.compress",
                  cfg.seed),
      v_r1a_(2 * cfg.base_channels, 2 * cfg.base_channels, 3, "value.r1a", cfg.seed),
      v_r1b_(2 * cfg.base_channels, 2 * cfg.base_channels, 3, "value.r1b", cfg.seed),
      v_r2a_(2 * cfg.base_channels, 2 * cfg.base_channels, 3, "value.r2a", cfg.seed),
      v_r2b_(2 * cfg.base_channels, 2 * cfg.base_channels, 3, "value.r2b", cfg.seed),
      v_attn1_(std::max<std::size_t>(4, cfg.base_channels / 2), 2 * cfg.base_channels,
               1, "value.attn1", cfg.seed),
      v_attn2_(2 * cfg.base_channels, std::max<std::size_t>(4, cfg.base_channels / 2),
               1, "value.attn2", cfg.seed),
      v_lfm_(filter_mode_from_string(cfg.lfm_mode), cfg.lfm_sigma,
             2 * cfg.base_channels, fnv1a("value.lfm") ^ cfg.seed),
      v_proj_(cfg.value_channels, 2 * cfg.base_channels, 1, "value.proj", cfg.seed),
      d_in_(2 * cfg.base_channels, cfg.value_channels + 2 * cfg.base_channels, 1,
            "dec.in", cfg.seed),
      d_mid_(2 * cfg.base_channels, 2 * cfg.base_channels, 3, "dec.mid", cfg.seed),
      d_skip_half_(2 * cfg.base_channels, 2 * cfg.base_channels, 1, "dec.skip_half",
                   cfg.seed),
      d_up1_(2 * cfg.base_channels, 2 * cfg.base_channels, 3, "dec.up1", cfg.seed),
      d_skip_full_(2 * cfg.base_channels, cfg.base_channels, 1, "dec.skip_full",
                   cfg.seed),
      d_up2_(cfg.decoder_channels, 2 * cfg.base_channels, 3, "dec.up2", cfg.seed),
      d_mask_branch_(cfg.decoder_channels, cfg.decoder_channels, 3, "dec.mask_branch",
                     cfg.seed),
      d_bnd_branch_(cfg.decoder_channels, cfg.decoder_channels, 3, "dec.bnd_branch",
                    cfg.seed),
      d_hfm_(filter_mode_from_string(cfg.hfm_mode), cfg.hfm_sigma,
             cfg.decoder_channels, fnv1a("dec.hfm") ^ cfg.seed),
      m2b_(cfg.decoder_channels, fnv1a("dec.m2b") ^ cfg.seed),
      b2m_(cfg.decoder_channels, fnv1a("dec.b2m") ^ cfg.seed),
      d_mask_head_(2, cfg.decoder_channels, 1, "dec.mask_head", cfg.seed),
      d_bnd_head_(1, cfg.decoder_channels, 1, "dec.bnd_head", cfg.seed) {
  cfg_.validate();
}

template <class T>
std::pair<Tensor<T>, EncoderSkips<T>> GsfmModel<T>::encode_key(
    const Tensor<T>& frame) const {
  if (frame.rank() != 3 || frame.dim(0) != 3)
    throw std::invalid_argument("encode_key: expects [3,H,W]");
  if (frame.dim(1) % cfg_.encoder_stride || frame.dim(2) % cfg_.encoder_stride)
    throw std::invalid_argument("encode_key: size not divisible by stride");
  EncoderSkips<T> skips;
  skips.full = relu(k_s0_(frame));
  skips.half = relu(k_s1_(avgpool2x(skips.full)));
  Tensor<T> f = relu(k_s2_(avgpool2x(skips.half)));
  if (cfg_.lfm_enabled) f = k_lfm_.forward(f);
  skips.deepest = f;
  return {k_proj_(f), skips};
}

template <class T>
Tensor<T> GsfmModel<T>::encode_value(const Tensor<T>& frame, const Tensor<T>& mask,
                                     const Tensor<T>& key_deepest) const {
  if (mask.rank() != 3 || mask.dim(0) != 1 || mask.dim(1) != frame.dim(1) ||
      mask.dim(2) != frame.dim(2))
    throw std::invalid_argument("encode_value: mask misaligned with frame");
  Tensor<T> x = concat<T>({frame, mask}, 0);
  x = relu(v_s0_(x));
  x = relu(v_s1_(avgpool2x(x)));
  x = relu(v_s2_(avgpool2x(x)));
  x = relu(v_compress_(concat<T>({x, key_deepest}, 0)));
  x = relu(add(x, v_r1b_(relu(v_r1a_(x)))));
  x = relu(add(x, v_r2b_(relu(v_r2a_(x)))));
  // channel attention gate: GAP -> 2-layer MLP -> sigmoid scale
  Tensor<T> gate = sigmoid(v_attn2_(relu(v_attn1_(global_avg_pool(x)))));
  x = mul(x, gate);
  if (cfg_.lfm_enabled) x = v_lfm_.forward(x);
  return v_proj_(x);
}

template <class T>
Tensor<T> GsfmModel<T>::memory_read(const Tensor<T>& key_flat,
                                    const MemoryBank<T>& bank) const {
  if (bank.empty()) throw std::runtime_error("memory_read: empty memory bank");
  Tensor<T> a = affinity(key_flat, bank.keys());
  Tensor<T> w = topk_normalize(a, std::min<std::size_t>(cfg_.top_k, a.dim(1)));
  return readout(w, bank.values());
}

template <class T>
SegmentationOutput<T> GsfmModel<T>::decode(const Tensor<T>& memory_read,
                                           const EncoderSkips<T>& skips) const {
  Tensor<T> x = relu(d_in_(concat<T>({memory_read, skips.deepest}, 0)));
  x = relu(d_mid_(x));
  x = add(upsample2x(x), d_skip_half_(skips.half));
  x = relu(d_up1_(x));
  x = add(upsample2x(x), d_skip_full_(skips.full));
  Tensor<T> trunk = relu(d_up2_(x));

  SegmentationOutput<T> out;
  if (cfg_.boundary_branch) {
    Tensor<T> f_m = relu(d_mask_branch_(trunk));
    Tensor<T> bnd_in = cfg_.hfm_enabled ? d_hfm_.forward(trunk) : trunk;
    Tensor<T> f_b = relu(d_bnd_branch_(bnd_in));
    Tensor<T> f_b_fused = fuse(f_m, f_b, m2b_);
    Tensor<T> f_m_fused = fuse(f_b_fused, f_m, b2m_);
    out.mask_logits = d_mask_head_(f_m_fused);
    out.boundary_logits = d_bnd_head_(f_b_fused);
  } else {
    Tensor<T> t = cfg_.hfm_enabled ? d_hfm_.forward(trunk) : trunk;
    Tensor<T> f_m = relu(d_mask_branch_(t));
    out.mask_logits = d_mask_head_(f_m);
  }
  return out;
}

template <class T>
SegmentationOutput<T> GsfmModel<T>::segment_frame(const Tensor<T>& frame,
                                                  const MemoryBank<T>& bank) const {
  if (bank.empty()) throw std::runtime_error("segment_frame: empty memory bank");
  auto [key, skips] = encode_key(frame);
  const std::size_t h4 = key.dim(1), w4 = key.dim(2);
  Tensor<T> key_flat = reshape(key, {cfg_.key_channels, h4 * w4});
  Tensor<T> m = memory_read(key_flat, bank);
  return decode(reshape(m, {cfg_.value_channels, h4, w4}), skips);
}

template <class T>
std::vector<std::vector<Tensor<T>>> GsfmModel<T>::segment_video(
    const std::vector<Tensor<T>>& frames,
    const std::vector<Tensor<T>>& first_masks) const {
  const std::size_t n_obj = first_masks.size();
  if (frames.empty() || n_obj == 0)
    throw std::invalid_argument("segment_video: needs frames and first-frame masks");
  const std::size_t h = frames[0].dim(1), w = frames[0].dim(2);

  std::vector<MemoryBank<T>> banks(n_obj);
  std::vector<std::vector<Tensor<T>>> preds(n_obj);

  auto store = [&](int frame_id, const Tensor<T>& frame,
                   const std::vector<Tensor<T>>& masks, const Tensor<T>& key_flat,
                   const EncoderSkips<T>& skips) {
    for (std::size_t o = 0; o < n_obj; ++o) {
      Tensor<T> v = encode_value(frame, masks[o], skips.deepest);
      memorize(banks[o], frame_id, key_flat,
               reshape(v, {cfg_.value_channels, v.dim(1) * v.dim(2)}),
               cfg_.memorize_every);
    }
  };

  for (std::size_t o = 0; o < n_obj; ++o) preds[o].push_back(first_masks[o].clone());
  {
    auto [key0, skips0] = encode_key(frames[0]);
    Tensor<T> key0_flat =
        reshape(key0, {cfg_.key_channels, key0.dim(1) * key0.dim(2)});
    store(0, frames[0], first_masks, key0_flat, skips0);
  }

  for (std::size_t t = 1; t < frames.size(); ++t) {
    auto [key, skips] = encode_key(frames[t]);
    const std::size_t h4 = key.dim(1), w4 = key.dim(2);
    Tensor<T> key_flat = reshape(key, {cfg_.key_channels, h4 * w4});

    // per-object foreground probabilities
    std::vector<Tensor<T>> probs;
    for (std::size_t o = 0; o < n_obj; ++o) {
      Tensor<T> m = memory_read(key_flat, banks[o]);
      SegmentationOutput<T> out =
          decode(reshape(m, {cfg_.value_channels, h4, w4}), skips);
      probs.push_back(slice0(softmax(out.mask_logits, 0), 1, 2));
    }
    // argmax merge with soft background = 1 - max_o p_o
    std::vector<Tensor<T>> merged(n_obj, Tensor<T>({1, h, w}));
    for (std::size_t p = 0; p < h * w; ++p) {
      T best = T(0);
      std::size_t best_o = 0;
      for (std::size_t o = 0; o < n_obj; ++o) {
        T v = probs[o].data()[p];
        if (v > best) {
          best = v;
          best_o = o;
        }
      }
      const T bg = T(1) - best;
      if (best > bg) merged[best_o].data()[p] = T(1);
    }
    for (std::size_t o = 0; o < n_obj; ++o) preds[o].push_back(merged[o]);

    if (static_cast<int>(t) % cfg_.memorize_every == 0)
      store(static_cast<int>(t), frames[t], merged, key_flat, skips);
  }
  return preds;
}

template <class T>
ParamList<T> GsfmModel<T>::named_parameters() {
  ParamList<T> out;
  auto addc = [&out](const std::string& n, Conv<T>& c) {
    out.emplace_back(n + ".w", &c.w);
    out.emplace_back(n + ".b", &c.b);
  };
  auto adds = [&out](const std::string& n, SpectralFilterModule<T>& m) {
    out.emplace_back(n + ".conv1.w", &m.conv1_w);
    out.emplace_back(n + ".conv1.b", &m.conv1_b);
    out.emplace_back(n + ".conv2.w", &m.conv2_w);
    out.emplace_back(n + ".conv2.b", &m.conv2_b);
  };
  addc("key.s0", k_s0_);
  addc("key.s1", k_s1_);
  addc("key.s2", k_s2_);
  addc("key.proj", k_proj_);
  if (cfg_.lfm_enabled) adds("key.lfm", k_lfm_);
  addc("value.s0", v_s0_);
  addc("value.s1", v_s1_);
  addc("value.s2", v_s2_);
  addc("value.compress", v_compress_);
  addc("value.r1a", v_r1a_);
  addc("value.r1b", v_r1b_);
  addc("value.r2a", v_r2a_);
  addc("value.r2b", v_r2b_);
  addc("value.attn1", v_attn1_);
  addc("value.attn2", v_attn2_);
  if (cfg_.lfm_enabled) adds("value.lfm", v_lfm_);
  addc("value.proj", v_proj_);
  addc("dec.in", d_in_);
  addc("dec.mid", d_mid_);
  addc("dec.skip_half", d_skip_half_);
  addc("dec.up1", d_up1_);
  addc("dec.skip_full", d_skip_full_);
  addc("dec.up2", d_up2_);
  addc("dec.mask_branch", d_mask_branch_);
  if (cfg_.hfm_enabled) adds("dec.hfm", d_hfm_);
  if (cfg_.boundary_branch) {
    addc("dec.bnd_branch", d_bnd_branch_);
    out.emplace_back("dec.m2b.w", &m2b_.proj_w);
    out.emplace_back("dec.m2b.b", &m2b_.proj_b);
    out.emplace_back("dec.b2m.w", &b2m_.proj_w);
    out.emplace_back("dec.b2m.b", &b2m_.proj_b);
    addc("dec.bnd_head", d_bnd_head_);
  }
  addc("dec.mask_head", d_mask_head_);
  return out;
}

template <class T>
void GsfmModel<T>::set_requires_grad(bool on) {
  for (auto& [name, t] : named_parameters()) t->set_requires_grad(on);
}

template <class T>
void GsfmModel<T>::save_checkpoint(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "params");
  auto params = const_cast<GsfmModel<T>*>(this)->named_parameters();
  for (auto& [name, t] : params)
    save_tensor(dir + "/params/" + name, *t);
}

template <class T>
void GsfmModel<T>::load_checkpoint(const std::string& dir) {
  for (auto& [name, t] : named_parameters()) {
    Tensor<T> loaded = load_tensor<T>(dir + "/params/" + name);
    if (loaded.shape() != t->shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name + ": file " +
                               shape_str(loaded.shape()) + " vs model " +
                               shape_str(t->shape()));
    bool rg = t->requires_grad();
    *t = loaded;
    t->set_requires_grad(rg);
  }
}

template <class T>
Tensor<T> training_loss(GsfmModel<T>& model, const std::vector<Tensor<T>>& frames,
                        const std::vector<Tensor<T>>& masks, double keep_fraction,
                        StepStats* stats) {
  if (frames.size() != 3 || masks.size() != 3)
    throw std::invalid_argument("training_loss: expects 3 frames + 3 masks");
  const GsfmConfig& cfg = model.config();
  const std::size_t h = frames[0].dim(1), w = frames[0].dim(2);

  MemoryBank<T> bank;
  auto [key0, skips0] = model.encode_key(frames[0]);
  Tensor<T> key0_flat = reshape(key0, {cfg.key_channels, key0.dim(1) * key0.dim(2)});
  Tensor<T> val0 = model.encode_value(frames[0], masks[0], skips0.deepest);
  bank.insert(0, key0_flat,
              reshape(val0, {cfg.value_channels, val0.dim(1) * val0.dim(2)}));

  Tensor<T> total;
  double mask_part = 0.0, bnd_part = 0.0;
  for (int step = 1; step <= 2; ++step) {
    const Tensor<T>& frame = frames[step];
    const Tensor<T>& gt = masks[step];

    auto [key, skips] = model.encode_key(frame);
    const std::size_t h4 = key.dim(1), w4 = key.dim(2);
    Tensor<T> key_flat = reshape(key, {cfg.key_channels, h4 * w4});
    Tensor<T> m = model.memory_read(key_flat, bank);
    SegmentationOutput<T> out =
        model.decode(reshape(m, {cfg.value_channels, h4, w4}), skips);

    Tensor<T> labels = reshape(gt, {h, w});
    Tensor<T> loss = bootstrapped_ce(out.mask_logits, labels, keep_fraction);
    mask_part += static_cast<double>(loss.item());
    if (cfg.boundary_branch) {
      Tensor<T> bnd_gt = laplacian_boundary(gt);
      Tensor<T> bl = boundary_loss(out.boundary_logits, bnd_gt, T(1e-5));
      bnd_part += static_cast<double>(bl.item());
      loss = add(loss, scalar_mul(bl, static_cast<T>(cfg.boundary_loss_weight)));
    }
    total = total.defined() ? add(total, loss) : loss;

    if (step == 1) {
      // memorize frame 1 with its soft predicted mask
      Tensor<T> prob_fg = slice0(softmax(out.mask_logits, 0), 1, 2);
      Tensor<T> val = model.encode_value(frame, prob_fg, skips.deepest);
      bank.insert(1, key_flat,
                  reshape(val, {cfg.value_channels, val.dim(1) * val.dim(2)}));
    }
  }
  total = scalar_mul(total, T(0.5));
  if (stats) {
    stats->total = static_cast<double>(total.item());
    stats->mask = mask_part / 2.0;
    stats->boundary = bnd_part / 2.0;
  }
  return total;
}

StepStats train_step(GsfmModel<float>& model, const std::vector<TrainSample>& batch,
                     Optimizer<float>& optim, double keep_fraction) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  Tape<float> tape;
  StepStats agg;
  Tensor<float> total;
  {
    Tape<float>::Scope scope(tape);
    for (const auto& sample : batch) {
      StepStats s;
      Tensor<float> loss =
          training_loss(model, sample.frames, sample.masks, keep_fraction, &s);
      agg.total += s.total;
      agg.mask += s.mask;
      agg.boundary += s.boundary;
      total = total.defined() ? add(total, loss) : loss;
    }
    total = scalar_mul(total, 1.0f / static_cast<float>(batch.size()));
    tape.backward(total);
  }
  optim.step();
  const double n = static_cast<double>(batch.size());
  agg.total /= n;
  agg.mask /= n;
  agg.boundary /= n;
  return agg;
}

template struct Conv<float>;
template struct Conv<double>;
template class GsfmModel<float>;
template class GsfmModel<double>;
template Tensor<float> training_loss<float>(GsfmModel<float>&,
                                            const std::vector<Tensor<float>>&,
                                            const std::vector<Tensor<float>>&, double,
                                            StepStats*);
template Tensor<double> training_loss<double>(GsfmModel<double>&,
                                              const std::vector<Tensor<double>>&,
                                              const std::vector<Tensor<double>>&,
                                              double, StepStats*);

}  // namespace gsfm
