#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsfm/image_io.hpp"
#include "gsfm/metrics.hpp"
#include "gsfm/rng.hpp"
#include "gsfm/tensor.hpp"

namespace gsfm {

// Frames in [0,1], masks binary, indexed masks[object][frame]. Object ids are
// dense from 1; id i maps to masks[i-1].
struct VideoSample {
  std::string name;
  std::vector<Tensor<float>> frames;
  std::vector<std::vector<Tensor<float>>> masks;
  std::vector<int> object_ids;

  std::size_t length() const { return frames.size(); }
  std::size_t height() const { return frames.empty() ? 0 : frames[0].dim(1); }
  std::size_t width() const { return frames.empty() ? 0 : frames[0].dim(2); }
};

struct SynthConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  int num_shapes = 1;          // target objects (object ids 1..num_shapes)
  int distractor_count = 3;    // same-colored background shapes
  double color_delta = 0.05;   // max per-channel offset of distractor colors
  double max_speed = 2.0;      // px/frame
  double jitter = 0.3;         // motion noise, px
  double min_size = 10.0;      // shape radius/half-extent bounds, px
  double max_size = 16.0;
  bool occlusion_allowed = false;
  std::uint64_t seed = 0;
};

// Deterministic moving-shapes clip; target drawn on top so its analytic mask
// is exact. Distractors share the target color within +-color_delta.
VideoSample generate_sequence(const SynthConfig& cfg, std::size_t length);

// forward map of one augmented frame; sampling uses the inverse
struct AffineParams {
  double angle = 0.0;  // radians
  double scale = 1.0;
  double tx = 0.0;  // px
  double ty = 0.0;
};
AffineParams invert_affine(const AffineParams& p);
Tensor<float> warp_affine(const Tensor<float>& src, const AffineParams& p,
                          bool nearest);

// n jittered copies of a static (image, mask) pair; frame 0 is the original.
// Rotation <= 15 deg, scale in [0.9, 1.1], translation <= 10%.
VideoSample pseudo_video_from_image(const Tensor<float>& image,
                                    const Tensor<float>& mask, int n, Rng& rng,
                                    std::vector<AffineParams>* params_out = nullptr);

// DAVIS directory layout: JPEGImages/<seq>/NNNNN.jpg + Annotations/<seq>/NNNNN.png
std::vector<VideoSample> load_davis_dir(
    const std::string& root,
    std::optional<std::pair<std::size_t, std::size_t>> resize_to = std::nullopt);
void save_davis_sequence(const std::string& root, const VideoSample& sample);

// chronological triple with both gaps <= max_gap
std::array<std::size_t, 3> sample_three_frames(std::size_t length,
                                               std::size_t max_gap, Rng& rng);

// grows 1 -> 5 over the first 60% of training, then shrinks back to 2
std::size_t curriculum_max_gap(std::size_t step, std::size_t total_steps);

// conversions
Tensor<float> tensor_from_image(const ImageU8& img);
ImageU8 image_from_tensor(const Tensor<float>& t);
Mask mask_from_tensor(const Tensor<float>& t);
Tensor<float> tensor_from_mask(const Mask& m);
// merge per-object binary masks into palette indices (later objects win)
IndexedImage indexed_from_masks(const std::vector<Mask>& per_object);
std::vector<Mask> masks_from_indexed(const IndexedImage& img, int num_objects);

Tensor<float> resize_bilinear(const Tensor<float>& t, std::size_t oh, std::size_t ow);
Tensor<float> resize_nearest(const Tensor<float>& t, std::size_t oh, std::size_t ow);

// boundary ground truth cached next to the annotations as 1-bit PNGs
void cache_boundary_png(const std::string& path, const Tensor<float>& mask);
Tensor<float> load_boundary_png(const std::string& path);

}  // namespace gsfm
