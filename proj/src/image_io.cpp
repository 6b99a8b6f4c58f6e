#include "gsfm/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include <jpeglib.h>
#include <png.h>

namespace gsfm {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

struct JpegErr {
  jpeg_error_mgr pub;
  jmp_buf jb;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  longjmp(reinterpret_cast<JpegErr*>(cinfo->err)->jb, 1);
}

}  // namespace

ImageU8 read_jpeg(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegErr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  jpeg_create_decompress(&cinfo);
  ImageU8 img;
  if (setjmp(jerr.jb)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("jpeg read failed: " + path);
  }
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img = ImageU8(cinfo.output_height, cinfo.output_width);
  while (cinfo.output_scanline < cinfo.output_height) {
    std::uint8_t* row = img.rgb.data() + 3 * img.w * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

void write_jpeg(const std::string& path, const ImageU8& img, int quality) {
  FilePtr f = open_file(path, "wb");
  jpeg_compress_struct cinfo;
  JpegErr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  jpeg_create_compress(&cinfo);
  if (setjmp(jerr.jb)) {
    jpeg_destroy_compress(&cinfo);
    throw std::runtime_error("jpeg write failed: " + path);
  }
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = static_cast<JDIMENSION>(img.w);
  cinfo.image_height = static_cast<JDIMENSION>(img.h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    const std::uint8_t* row = img.rgb.data() + 3 * img.w * cinfo.next_scanline;
    JSAMPROW rows[1] = {const_cast<JSAMPROW>(row)};
    jpeg_write_scanlines(&cinfo, rows, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

namespace {

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

}  // namespace

IndexedImage read_png_indexed(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw std::runtime_error("png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("png read error: " + path);
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);

  const png_uint_32 w = png_get_image_width(r.png, r.info);
  const png_uint_32 h = png_get_image_height(r.png, r.info);
  const int color = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  if (color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY)
    throw std::runtime_error("annotation PNG must be palette or gray: " + path);
  if (depth < 8) png_set_packing(r.png);  // expand to one byte per pixel
  png_read_update_info(r.png, r.info);

  IndexedImage img(h, w);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.idx.data() + y * w;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return img;
}

void write_png_indexed(const std::string& path, const IndexedImage& img) {
  FilePtr f = open_file(path, "wb");
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) throw std::runtime_error("png_create_write_struct failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wr.png))) throw std::runtime_error("png write error: " + path);
  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(img.w),
               static_cast<png_uint_32>(img.h), 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_color palette[256];
  const std::uint8_t* p = davis_palette();
  for (int i = 0; i < 256; ++i) {
    palette[i].red = p[3 * i];
    palette[i].green = p[3 * i + 1];
    palette[i].blue = p[3 * i + 2];
  }
  png_set_PLTE(wr.png, wr.info, palette, 256);
  png_write_info(wr.png, wr.info);
  std::vector<png_bytep> rows(img.h);
  for (std::size_t y = 0; y < img.h; ++y)
    rows[y] = const_cast<png_bytep>(img.idx.data() + y * img.w);
  png_write_image(wr.png, rows.data());
  png_write_end(wr.png, nullptr);
}

void write_png_1bit(const std::string& path, const std::vector<std::uint8_t>& bits,
                    std::size_t h, std::size_t w) {
  if (bits.size() != h * w) throw std::invalid_argument("write_png_1bit: size");
  FilePtr f = open_file(path, "wb");
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) throw std::runtime_error("png_create_write_struct failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wr.png))) throw std::runtime_error("png write error: " + path);
  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 1, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);
  const std::size_t stride = (w + 7) / 8;
  std::vector<std::uint8_t> packed(stride * h, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (bits[y * w + x]) packed[y * stride + x / 8] |= (0x80 >> (x % 8));
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = packed.data() + y * stride;
  png_write_image(wr.png, rows.data());
  png_write_end(wr.png, nullptr);
}

std::vector<std::uint8_t> read_png_1bit(const std::string& path, std::size_t& h,
                                        std::size_t& w) {
  IndexedImage img = read_png_indexed(path);
  h = img.h;
  w = img.w;
  std::vector<std::uint8_t> bits(img.idx.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = img.idx[i] ? 1 : 0;
  return bits;
}

const std::uint8_t* davis_palette() {
  static std::uint8_t pal[768];
  static bool built = false;
  if (!built) {
    // VOC colormap: bit-reversal construction
    for (int i = 0; i < 256; ++i) {
      int r = 0, g = 0, b = 0, c = i;
      for (int j = 0; j < 8; ++j) {
        r |= ((c >> 0) & 1) << (7 - j);
        g |= ((c >> 1) & 1) << (7 - j);
        b |= ((c >> 2) & 1) << (7 - j);
        c >>= 3;
      }
      pal[3 * i] = static_cast<std::uint8_t>(r);
      pal[3 * i + 1] = static_cast<std::uint8_t>(g);
      pal[3 * i + 2] = static_cast<std::uint8_t>(b);
    }
    built = true;
  }
  return pal;
}

}  // namespace gsfm
