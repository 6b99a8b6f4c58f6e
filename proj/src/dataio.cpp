#include "gsfm/dataio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <set>

#include "gsfm/boundary.hpp"

namespace fs = std::filesystem;

namespace gsfm {

namespace {

struct Shape2D {
  bool is_circle = false;
  double size = 8.0;  // radius (circle) or half-extent (square)
  double cx = 0.0, cy = 0.0;
  double vx = 0.0, vy = 0.0;
  std::array<double, 3> color{};

  bool contains(double px, double py) const {
    if (is_circle) {
      double dx = px - cx, dy = py - cy;
      return dx * dx + dy * dy <= size * size;
    }
    return px >= cx - size && px < cx + size && py >= cy - size && py < cy + size;
  }
  bool overlaps(const Shape2D& o) const {
    double dx = std::abs(cx - o.cx), dy = std::abs(cy - o.cy);
    return dx < size + o.size && dy < size + o.size;
  }
};

void step_shape(Shape2D& s, double h, double w, Rng& rng, double jitter) {
  s.cx += s.vx + (jitter > 0 ? rng.normal() * jitter : 0.0);
  s.cy += s.vy + (jitter > 0 ? rng.normal() * jitter : 0.0);
  // bounce so the shape stays fully inside the frame
  if (s.cx - s.size < 0) {
    s.cx = 2 * s.size - s.cx;
    s.vx = -s.vx;
  }
  if (s.cx + s.size > w) {
    s.cx = 2 * (w - s.size) - s.cx;
    s.vx = -s.vx;
  }
  if (s.cy - s.size < 0) {
    s.cy = 2 * s.size - s.cy;
    s.vy = -s.vy;
  }
  if (s.cy + s.size > h) {
    s.cy = 2 * (h - s.size) - s.cy;
    s.vy = -s.vy;
  }
}

void draw_shape(Tensor<float>& frame, const Shape2D& s) {
  const std::size_t h = frame.dim(1), w = frame.dim(2);
  const long y0 = std::max(0L, static_cast<long>(std::floor(s.cy - s.size - 1)));
  const long y1 = std::min(static_cast<long>(h), static_cast<long>(std::ceil(s.cy + s.size + 1)));
  const long x0 = std::max(0L, static_cast<long>(std::floor(s.cx - s.size - 1)));
  const long x1 = std::min(static_cast<long>(w), static_cast<long>(std::ceil(s.cx + s.size + 1)));
  for (long y = y0; y < y1; ++y)
    for (long x = x0; x < x1; ++x)
      if (s.contains(x + 0.5, y + 0.5))
        for (std::size_t c = 0; c < 3; ++c)
          frame.data()[c * h * w + y * w + x] = static_cast<float>(s.color[c]);
}

void rasterize_mask(Tensor<float>& mask, const Shape2D& s) {
  const std::size_t h = mask.dim(1), w = mask.dim(2);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (s.contains(x + 0.5, y + 0.5)) mask.data()[y * w + x] = 1.0f;
}

Shape2D random_shape(const SynthConfig& cfg, Rng& rng) {
  Shape2D s;
  s.is_circle = rng.uniform() < 0.5;
  s.size = rng.uniform(cfg.min_size, cfg.max_size) * 0.5;
  s.cx = rng.uniform(s.size, static_cast<double>(cfg.width) - s.size);
  s.cy = rng.uniform(s.size, static_cast<double>(cfg.height) - s.size);
  s.vx = rng.uniform(-cfg.max_speed, cfg.max_speed);
  s.vy = rng.uniform(-cfg.max_speed, cfg.max_speed);
  return s;
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

VideoSample generate_sequence(const SynthConfig& cfg, std::size_t length) {
  if (length < 1) throw std::invalid_argument("generate_sequence: length >= 1");
  if (cfg.num_shapes < 1) throw std::invalid_argument("generate_sequence: num_shapes");
  Rng rng(cfg.seed);

  std::vector<Shape2D> targets;
  for (int i = 0; i < cfg.num_shapes; ++i) {
    Shape2D t = random_shape(cfg, rng);
    t.color = {rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0)};
    targets.push_back(t);
  }

  std::vector<Shape2D> distractors;
  for (int i = 0; i < cfg.distractor_count; ++i) {
    const Shape2D& ref = targets[static_cast<std::size_t>(i) % targets.size()];
    Shape2D d;
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      d = random_shape(cfg, rng);
      d.is_circle = ref.is_circle;  // same identity class as its target
      placed = cfg.occlusion_allowed;
      if (!placed) {
        placed = true;
        for (const auto& t : targets)
          if (d.overlaps(t)) placed = false;
      }
    }
    for (std::size_t c = 0; c < 3; ++c)
      d.color[c] = clamp01(ref.color[c] +
                           rng.uniform(-cfg.color_delta, cfg.color_delta));
    distractors.push_back(d);
  }

  std::array<double, 3> bg = {rng.uniform(0.0, 0.15), rng.uniform(0.0, 0.15),
                              rng.uniform(0.0, 0.15)};

  VideoSample sample;
  sample.masks.resize(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i)
    sample.object_ids.push_back(static_cast<int>(i) + 1);

  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      for (auto& d : distractors)
        step_shape(d, cfg.height, cfg.width, rng, cfg.jitter);
      for (auto& s : targets) step_shape(s, cfg.height, cfg.width, rng, cfg.jitter);
    }
    Tensor<float> frame({3, cfg.height, cfg.width});
    for (std::size_t c = 0; c < 3; ++c)
      std::fill(frame.data() + c * cfg.height * cfg.width,
                frame.data() + (c + 1) * cfg.height * cfg.width,
                static_cast<float>(bg[c]));
    for (const auto& d : distractors) draw_shape(frame, d);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      draw_shape(frame, targets[i]);
      Tensor<float> mask({1, cfg.height, cfg.width});
      rasterize_mask(mask, targets[i]);
      sample.masks[i].push_back(std::move(mask));
    }
    sample.frames.push_back(std::move(frame));
  }
  return sample;
}

AffineParams invert_affine(const AffineParams& p) {
  // forward: q = s R(a) p + t  =>  p = (1/s) R(-a) (q - t)
  AffineParams inv;
  inv.angle = -p.angle;
  inv.scale = 1.0 / p.scale;
  const double ca = std::cos(-p.angle), sa = std::sin(-p.angle);
  inv.tx = -inv.scale * (ca * p.tx - sa * p.ty);
  inv.ty = -inv.scale * (sa * p.tx + ca * p.ty);
  return inv;
}

Tensor<float> warp_affine(const Tensor<float>& src, const AffineParams& p,
                          bool nearest) {
  const std::size_t c = src.dim(0), h = src.dim(1), w = src.dim(2);
  const double cy = 0.5 * (static_cast<double>(h) - 1.0);
  const double cx = 0.5 * (static_cast<double>(w) - 1.0);
  // sample with the inverse map: src_pos = (1/s) R(-a) (out - c - t) + c
  const double inv_s = 1.0 / p.scale;
  const double ca = std::cos(-p.angle), sa = std::sin(-p.angle);
  Tensor<float> out(src.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx - p.tx;
      const double dy = static_cast<double>(y) - cy - p.ty;
      const double sx = inv_s * (ca * dx - sa * dy) + cx;
      const double sy = inv_s * (sa * dx + ca * dy) + cy;
      if (nearest) {
        const long nx = static_cast<long>(std::lround(sx));
        const long ny = static_cast<long>(std::lround(sy));
        if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h))
          continue;
        for (std::size_t ch = 0; ch < c; ++ch)
          out.data()[(ch * h + y) * w + x] = src.data()[(ch * h + ny) * w + nx];
      } else {
        const long x0 = static_cast<long>(std::floor(sx));
        const long y0 = static_cast<long>(std::floor(sy));
        const double fx = sx - x0, fy = sy - y0;
        for (std::size_t ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (int oy = 0; oy < 2; ++oy)
            for (int ox = 0; ox < 2; ++ox) {
              long xx = x0 + ox, yy = y0 + oy;
              if (xx < 0 || yy < 0 || xx >= static_cast<long>(w) ||
                  yy >= static_cast<long>(h))
                continue;
              double wgt = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
              acc += wgt * src.data()[(ch * h + yy) * w + xx];
            }
          out.data()[(ch * h + y) * w + x] = static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

VideoSample pseudo_video_from_image(const Tensor<float>& image,
                                    const Tensor<float>& mask, int n, Rng& rng,
                                    std::vector<AffineParams>* params_out) {
  if (n < 1) throw std::invalid_argument("pseudo_video_from_image: n >= 1");
  VideoSample sample;
  sample.name = "pseudo";
  sample.object_ids = {1};
  sample.masks.resize(1);
  sample.frames.push_back(image.clone());
  sample.masks[0].push_back(mask.clone());
  if (params_out) params_out->push_back(AffineParams{});
  const double max_angle = 15.0 * 3.141592653589793 / 180.0;
  const double max_tx = 0.10 * static_cast<double>(image.dim(2));
  const double max_ty = 0.10 * static_cast<double>(image.dim(1));
  for (int i = 1; i < n; ++i) {
    AffineParams p;
    p.angle = rng.uniform(-max_angle, max_angle);
    p.scale = rng.uniform(0.9, 1.1);
    p.tx = rng.uniform(-max_tx, max_tx);
    p.ty = rng.uniform(-max_ty, max_ty);
    sample.frames.push_back(warp_affine(image, p, false));
    sample.masks[0].push_back(warp_affine(mask, p, true));
    if (params_out) params_out->push_back(p);
  }
  return sample;
}

namespace {

std::string frame_name(std::size_t idx, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu%s", idx, ext);
  return buf;
}

}  // namespace

std::vector<VideoSample> load_davis_dir(
    const std::string& root,
    std::optional<std::pair<std::size_t, std::size_t>> resize_to) {
  std::vector<VideoSample> out;
  const fs::path images = fs::path(root) / "JPEGImages";
  const fs::path annos = fs::path(root) / "Annotations";
  if (!fs::exists(images)) return out;

  std::vector<std::string> seqs;
  for (const auto& e : fs::directory_iterator(images))
    if (e.is_directory()) seqs.push_back(e.path().filename().string());
  std::sort(seqs.begin(), seqs.end());

  for (const auto& seq : seqs) {
    std::vector<std::size_t> frame_ids;
    for (const auto& e : fs::directory_iterator(images / seq)) {
      if (e.path().extension() != ".jpg") continue;
      frame_ids.push_back(std::stoul(e.path().stem().string()));
    }
    std::sort(frame_ids.begin(), frame_ids.end());
    if (frame_ids.empty()) continue;
    for (std::size_t i = 0; i < frame_ids.size(); ++i)
      if (frame_ids[i] != i)
        throw std::runtime_error("load_davis_dir: non-contiguous frames in " + seq);
    if (!fs::exists(annos / seq / frame_name(0, ".png")))
      throw std::runtime_error("load_davis_dir: missing annotation for frame 0 of " +
                               seq);

    VideoSample sample;
    sample.name = seq;

    IndexedImage first = read_png_indexed((annos / seq / frame_name(0, ".png")).string());
    int max_id = 0;
    for (auto v : first.idx) max_id = std::max(max_id, static_cast<int>(v));
    if (max_id == 0)
      throw std::runtime_error("load_davis_dir: empty first annotation in " + seq);
    for (int i = 1; i <= max_id; ++i) sample.object_ids.push_back(i);
    sample.masks.resize(max_id);

    for (std::size_t f = 0; f < frame_ids.size(); ++f) {
      ImageU8 img = read_jpeg((images / seq / frame_name(f, ".jpg")).string());
      Tensor<float> ft = tensor_from_image(img);
      if (resize_to) ft = resize_bilinear(ft, resize_to->first, resize_to->second);
      sample.frames.push_back(std::move(ft));

      const fs::path ap = annos / seq / frame_name(f, ".png");
      if (fs::exists(ap)) {
        IndexedImage ann = read_png_indexed(ap.string());
        std::vector<Mask> split = masks_from_indexed(ann, max_id);
        for (int o = 0; o < max_id; ++o) {
          Tensor<float> mt = tensor_from_mask(split[o]);
          if (resize_to) mt = resize_nearest(mt, resize_to->first, resize_to->second);
          sample.masks[o].push_back(std::move(mt));
        }
      } else {
        for (int o = 0; o < max_id; ++o) sample.masks[o].push_back(Tensor<float>{});
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

void save_davis_sequence(const std::string& root, const VideoSample& sample) {
  const fs::path images = fs::path(root) / "JPEGImages" / sample.name;
  const fs::path annos = fs::path(root) / "Annotations" / sample.name;
  fs::create_directories(images);
  fs::create_directories(annos);
  for (std::size_t f = 0; f < sample.frames.size(); ++f) {
    write_jpeg((images / frame_name(f, ".jpg")).string(),
               image_from_tensor(sample.frames[f]));
    std::vector<Mask> per_object;
    for (std::size_t o = 0; o < sample.masks.size(); ++o)
      per_object.push_back(mask_from_tensor(sample.masks[o][f]));
    write_png_indexed((annos / frame_name(f, ".png")).string(),
                      indexed_from_masks(per_object));
  }
}

std::array<std::size_t, 3> sample_three_frames(std::size_t length,
                                               std::size_t max_gap, Rng& rng) {
  if (length < 3) throw std::invalid_argument("sample_three_frames: length >= 3");
  const std::size_t gap = std::max<std::size_t>(1, max_gap);
  const std::size_t cap1 = std::min(gap, length - 2);
  const std::size_t g1 =
      static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(cap1)));
  const std::size_t cap2 = std::min(gap, length - 1 - g1);
  const std::size_t g2 =
      static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(cap2)));
  const std::size_t room = length - 1 - g1 - g2;
  const std::size_t i0 =
      static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(room)));
  return {i0, i0 + g1, i0 + g1 + g2};
}

std::size_t curriculum_max_gap(std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return 2;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  double g;
  if (t < 0.6)
    g = 1.0 + (5.0 - 1.0) * (t / 0.6);
  else
    g = 5.0 - (5.0 - 2.0) * ((t - 0.6) / 0.4);
  return static_cast<std::size_t>(std::lround(g));
}

Tensor<float> tensor_from_image(const ImageU8& img) {
  Tensor<float> t({3, img.h, img.w});
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        t.data()[(c * img.h + y) * img.w + x] =
            static_cast<float>(img.rgb[3 * (y * img.w + x) + c]) / 255.0f;
  return t;
}

ImageU8 image_from_tensor(const Tensor<float>& t) {
  ImageU8 img(t.dim(1), t.dim(2));
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        float v = t.data()[(c * img.h + y) * img.w + x];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        img.rgb[3 * (y * img.w + x) + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  return img;
}

Mask mask_from_tensor(const Tensor<float>& t) {
  Mask m(t.dim(1), t.dim(2));
  for (std::size_t i = 0; i < m.v.size(); ++i) m.v[i] = t.data()[i] > 0.5f ? 1 : 0;
  return m;
}

Tensor<float> tensor_from_mask(const Mask& m) {
  Tensor<float> t({1, m.h, m.w});
  for (std::size_t i = 0; i < m.v.size(); ++i) t.data()[i] = m.v[i] ? 1.0f : 0.0f;
  return t;
}

IndexedImage indexed_from_masks(const std::vector<Mask>& per_object) {
  if (per_object.empty()) throw std::invalid_argument("indexed_from_masks: empty");
  IndexedImage img(per_object[0].h, per_object[0].w);
  for (std::size_t o = 0; o < per_object.size(); ++o)
    for (std::size_t i = 0; i < img.idx.size(); ++i)
      if (per_object[o].v[i]) img.idx[i] = static_cast<std::uint8_t>(o + 1);
  return img;
}

std::vector<Mask> masks_from_indexed(const IndexedImage& img, int num_objects) {
  std::vector<Mask> out(num_objects, Mask(img.h, img.w));
  for (std::size_t i = 0; i < img.idx.size(); ++i) {
    int id = img.idx[i];
    if (id > 0 && id <= num_objects) out[id - 1].v[i] = 1;
  }
  return out;
}

Tensor<float> resize_bilinear(const Tensor<float>& t, std::size_t oh, std::size_t ow) {
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  if (h == oh && w == ow) return t;
  Tensor<float> out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double sy = (y + 0.5) * static_cast<double>(h) / oh - 0.5;
        double sx = (x + 0.5) * static_cast<double>(w) / ow - 0.5;
        long y0 = static_cast<long>(std::floor(sy)), x0 = static_cast<long>(std::floor(sx));
        double fy = sy - y0, fx = sx - x0;
        double acc = 0.0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            long yy = std::clamp(y0 + dy, 0L, static_cast<long>(h) - 1);
            long xx = std::clamp(x0 + dx, 0L, static_cast<long>(w) - 1);
            acc += (dy ? fy : 1 - fy) * (dx ? fx : 1 - fx) *
                   t.data()[(ch * h + yy) * w + xx];
          }
        out.data()[(ch * oh + y) * ow + x] = static_cast<float>(acc);
      }
  return out;
}

Tensor<float> resize_nearest(const Tensor<float>& t, std::size_t oh, std::size_t ow) {
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  if (h == oh && w == ow) return t;
  Tensor<float> out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t sy = std::min(h - 1, static_cast<std::size_t>(
                                             (y + 0.5) * static_cast<double>(h) / oh));
        std::size_t sx = std::min(w - 1, static_cast<std::size_t>(
                                             (x + 0.5) * static_cast<double>(w) / ow));
        out.data()[(ch * oh + y) * ow + x] = t.data()[(ch * h + sy) * w + sx];
      }
  return out;
}

void cache_boundary_png(const std::string& path, const Tensor<float>& mask) {
  Tensor<float> b = laplacian_boundary(mask);
  std::vector<std::uint8_t> bits(b.numel());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = b.data()[i] > 0.5f ? 1 : 0;
  write_png_1bit(path, bits, b.dim(1), b.dim(2));
}

Tensor<float> load_boundary_png(const std::string& path) {
  std::size_t h = 0, w = 0;
  std::vector<std::uint8_t> bits = read_png_1bit(path, h, w);
  Tensor<float> t({1, h, w});
  for (std::size_t i = 0; i < bits.size(); ++i) t.data()[i] = bits[i] ? 1.0f : 0.0f;
  return t;
}

}  // namespace gsfm
