#include "gsfm/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gsfm/boundary.hpp"
#include "gsfm/tensor.hpp"

namespace gsfm {

std::size_t Mask::area() const {
  std::size_t n = 0;
  for (auto p : v) n += p ? 1 : 0;
  return n;
}

double jaccard(const Mask& pred, const Mask& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw std::invalid_argument("jaccard: shape mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    bool p = pred.v[i] != 0, g = gt.v[i] != 0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

Mask boundary_of(const Mask& m) {
  Tensor<double> t({1, m.h, m.w});
  for (std::size_t i = 0; i < m.v.size(); ++i) t.data()[i] = m.v[i] ? 1.0 : 0.0;
  Tensor<double> b = laplacian_boundary(t, 0.1);
  Mask out(m.h, m.w);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = b.data()[i] > 0.5 ? 1 : 0;
  return out;
}

Mask dilate_disk(const Mask& m, int radius) {
  if (radius <= 0) return m;
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) offs.emplace_back(dy, dx);
  Mask out(m.h, m.w);
  for (std::size_t y = 0; y < m.h; ++y)
    for (std::size_t x = 0; x < m.w; ++x) {
      if (!m.at(y, x)) continue;
      for (auto [dy, dx] : offs) {
        long ny = static_cast<long>(y) + dy, nx = static_cast<long>(x) + dx;
        if (ny >= 0 && ny < static_cast<long>(m.h) && nx >= 0 &&
            nx < static_cast<long>(m.w))
          out.at(ny, nx) = 1;
      }
    }
  return out;
}

double fraction_within(const Mask& src, const Mask& target_dilated) {
  std::size_t total = 0, hit = 0;
  for (std::size_t i = 0; i < src.v.size(); ++i) {
    if (!src.v[i]) continue;
    ++total;
    hit += target_dilated.v[i] ? 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

int default_contour_tolerance(std::size_t h, std::size_t w) {
  double diag = std::sqrt(static_cast<double>(h * h + w * w));
  int t = static_cast<int>(std::ceil(0.008 * diag));
  return t < 1 ? 1 : t;
}

double contour_f(const Mask& pred, const Mask& gt, int tolerance_px) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw std::invalid_argument("contour_f: shape mismatch");
  Mask bp = boundary_of(pred);
  Mask bg = boundary_of(gt);
  const bool p_empty = bp.area() == 0, g_empty = bg.area() == 0;
  if (p_empty && g_empty) return 1.0;
  if (p_empty || g_empty) return 0.0;
  Mask bp_d = dilate_disk(bp, tolerance_px);
  Mask bg_d = dilate_disk(bg, tolerance_px);
  double precision = fraction_within(bp, bg_d);
  double recall = fraction_within(bg, bp_d);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

MetricsReport evaluate(const std::vector<SequenceEval>& sequences, int tolerance_px) {
  MetricsReport report;
  double gj = 0.0, gf = 0.0;
  std::size_t tracks = 0;
  for (const auto& seq : sequences) {
    if (seq.pred.size() != seq.gt.size())
      throw std::invalid_argument("evaluate: object count mismatch in " + seq.name);
    double sj = 0.0, sf = 0.0;
    std::size_t objs = 0;
    for (std::size_t o = 0; o < seq.gt.size(); ++o) {
      if (seq.pred[o].size() != seq.gt[o].size())
        throw std::invalid_argument("evaluate: frame count mismatch in " + seq.name);
      if (seq.gt[o].size() < 2) continue;  // nothing to score beyond the given frame
      int tol = tolerance_px >= 0
                    ? tolerance_px
                    : default_contour_tolerance(seq.gt[o][0].h, seq.gt[o][0].w);
      double oj = 0.0, of = 0.0;
      std::size_t frames = 0;
      for (std::size_t f = 1; f < seq.gt[o].size(); ++f) {
        oj += jaccard(seq.pred[o][f], seq.gt[o][f]);
        of += contour_f(seq.pred[o][f], seq.gt[o][f], tol);
        ++frames;
      }
      oj /= static_cast<double>(frames);
      of /= static_cast<double>(frames);
      sj += oj;
      sf += of;
      gj += oj;
      gf += of;
      ++objs;
      ++tracks;
    }
    if (objs > 0) {
      SequenceScore s;
      s.j_mean = sj / static_cast<double>(objs);
      s.f_mean = sf / static_cast<double>(objs);
      s.jf = 0.5 * (s.j_mean + s.f_mean);
      report.per_sequence[seq.name] = s;
    }
  }
  if (tracks > 0) {
    report.global.j_mean = gj / static_cast<double>(tracks);
    report.global.f_mean = gf / static_cast<double>(tracks);
    report.global.jf = 0.5 * (report.global.j_mean + report.global.f_mean);
  }
  return report;
}

std::string report_to_json(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "{\n  \"global\": {\"J\": " << r.global.j_mean << ", \"F\": " << r.global.f_mean
     << ", \"JF\": " << r.global.jf << "},\n  \"per_sequence\": {";
  bool first = true;
  for (const auto& [name, s] : r.per_sequence) {
    os << (first ? "" : ",") << "\n    \"" << name << "\": {\"J\": " << s.j_mean
       << ", \"F\": " << s.f_mean << ", \"JF\": " << s.jf << "}";
    first = false;
  }
  os << "\n  }\n}\n";
  return os.str();
}

std::string report_to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "sequence,J,F,JF\n";
  for (const auto& [name, s] : r.per_sequence)
    os << name << "," << s.j_mean << "," << s.f_mean << "," << s.jf << "\n";
  os << "GLOBAL," << r.global.j_mean << "," << r.global.f_mean << "," << r.global.jf
     << "\n";
  return os.str();
}

}  // namespace gsfm
