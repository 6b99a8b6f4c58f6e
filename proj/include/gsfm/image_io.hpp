#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gsfm {

// 8-bit RGB image, row-major, interleaved
struct ImageU8 {
  std::size_t h = 0, w = 0;
  std::vector<std::uint8_t> rgb;  // 3 * h * w

  ImageU8() = default;
  ImageU8(std::size_t h_, std::size_t w_) : h(h_), w(w_), rgb(3 * h_ * w_, 0) {}
};

// palette-indexed image (DAVIS annotation convention: index 0 = background)
struct IndexedImage {
  std::size_t h = 0, w = 0;
  std::vector<std::uint8_t> idx;

  IndexedImage() = default;
  IndexedImage(std::size_t h_, std::size_t w_) : h(h_), w(w_), idx(h_ * w_, 0) {}
};

ImageU8 read_jpeg(const std::string& path);
void write_jpeg(const std::string& path, const ImageU8& img, int quality = 95);

// Reads a PNG; palette and gray files return raw indices, RGB files are
// rejected for annotations.
IndexedImage read_png_indexed(const std::string& path);
void write_png_indexed(const std::string& path, const IndexedImage& img);

// 1-bit grayscale PNG for boundary caches
void write_png_1bit(const std::string& path, const std::vector<std::uint8_t>& bits,
                    std::size_t h, std::size_t w);
std::vector<std::uint8_t> read_png_1bit(const std::string& path, std::size_t& h,
                                        std::size_t& w);

// the standard 256-entry VOC/DAVIS palette
const std::uint8_t* davis_palette();

}  // namespace gsfm
