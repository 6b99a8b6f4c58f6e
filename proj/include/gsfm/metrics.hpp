#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gsfm {

// binary mask, row-major, values strictly 0/1
struct Mask {
  std::size_t h = 0, w = 0;
  std::vector<std::uint8_t> v;

  Mask() = default;
  Mask(std::size_t h_, std::size_t w_) : h(h_), w(w_), v(h_ * w_, 0) {}
  std::uint8_t& at(std::size_t y, std::size_t x) { return v[y * w + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return v[y * w + x]; }
  std::size_t area() const;
};

// |pred & gt| / |pred | gt|; both empty -> 1
double jaccard(const Mask& pred, const Mask& gt);

// Boundary F-measure: boundaries from the Laplacian operator (threshold 0.1),
// matched by dilation with a disk of radius tolerance_px. Both boundaries
// empty -> 1; exactly one empty -> 0.
double contour_f(const Mask& pred, const Mask& gt, int tolerance_px);

// ceil(0.8% of the image diagonal), at least 1
int default_contour_tolerance(std::size_t h, std::size_t w);

struct SequenceScore {
  double j_mean = 0.0;
  double f_mean = 0.0;
  double jf = 0.0;
};

struct MetricsReport {
  std::map<std::string, SequenceScore> per_sequence;
  SequenceScore global;  // mean over all object tracks
};

// One sequence's predictions/ground truth: masks[object][frame]. Frame 0 is
// the given annotation and is excluded from scoring.
struct SequenceEval {
  std::string name;
  std::vector<std::vector<Mask>> pred;
  std::vector<std::vector<Mask>> gt;
};

MetricsReport evaluate(const std::vector<SequenceEval>& sequences,
                       int tolerance_px = -1);

std::string report_to_json(const MetricsReport& r);
std::string report_to_csv(const MetricsReport& r);

}  // namespace gsfm
