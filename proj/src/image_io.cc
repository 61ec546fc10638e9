#include "nlaic/image_io.h"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace nlaic {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Tensor from_rgb8(const std::vector<unsigned char>& rgb, int h, int w) {
  Tensor img({3, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const size_t base = (static_cast<size_t>(i) * w + j) * 3;
      for (int c = 0; c < 3; ++c) img.at3(c, i, j) = rgb[base + static_cast<size_t>(c)] / 255.0;
    }
  return img;
}

Tensor read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open image " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  std::vector<unsigned char> rgb;
  int w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path + ": PNG decode error");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  rgb.resize(static_cast<size_t>(w) * h * 3);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int i = 0; i < h; ++i) rows[static_cast<size_t>(i)] = rgb.data() + static_cast<size_t>(i) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_rgb8(rgb, h, w);
}

void skip_pnm_space(std::istream& is) {
  for (;;) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      is.get();
    } else {
      return;
    }
  }
}

Tensor read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open image " + path);
  char m0 = 0, m1 = 0;
  is.get(m0).get(m1);
  const bool gray = m1 == '5';
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw std::runtime_error(path + ": unsupported PNM type (need P5/P6)");
  int w = 0, h = 0, maxval = 0;
  skip_pnm_space(is);
  is >> w;
  skip_pnm_space(is);
  is >> h;
  skip_pnm_space(is);
  is >> maxval;
  is.get();  // single whitespace before raster
  if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error(path + ": unsupported PNM header");
  const int ch = gray ? 1 : 3;
  std::vector<unsigned char> buf(static_cast<size_t>(w) * h * ch);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(is.gcount()) != buf.size()) throw std::runtime_error(path + ": truncated PNM raster");
  Tensor img({3, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c)
        img.at3(c, i, j) = buf[(static_cast<size_t>(i) * w + j) * ch + (gray ? 0 : static_cast<size_t>(c))] / 255.0;
  return img;
}

bool has_suffix(const std::string& s, const char* suf) {
  const size_t n = std::strlen(suf);
  return s.size() >= n && s.compare(s.size() - n, n, suf) == 0;
}

unsigned char to_byte(double v) {
  double x = std::round(v * 255.0);
  if (x < 0.0) x = 0.0;
  if (x > 255.0) x = 255.0;
  return static_cast<unsigned char>(x);
}

void write_png(const std::string& path, const Tensor& img) {
  const int ch = img.dim(0), h = img.dim(1), w = img.dim(2);
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error(path + ": PNG encode error");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<size_t>(w) * ch);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < ch; ++c) row[static_cast<size_t>(j) * ch + c] = to_byte(img.at3(c, i, j));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pnm(const std::string& path, const Tensor& img) {
  const int ch = img.dim(0), h = img.dim(1), w = img.dim(2);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << (ch == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w) * ch);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < ch; ++c) row[static_cast<size_t>(j) * ch + c] = to_byte(img.at3(c, i, j));
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace

Tensor read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("cannot open image " + path);
  unsigned char sig[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(sig), 2);
  probe.close();
  if (sig[0] == 0x89 && sig[1] == 'P') return read_png(path);
  if (sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return read_pnm(path);
  throw std::runtime_error(path + ": unsupported image format (need PNG or binary PPM/PGM)");
}

void write_image(const std::string& path, const Tensor& img) {
  if (img.rank() != 3 || (img.dim(0) != 1 && img.dim(0) != 3))
    throw std::invalid_argument("write_image: need [1|3,H,W], got " + img.shape_str());
  if (has_suffix(path, ".png")) {
    write_png(path, img);
  } else if (has_suffix(path, ".ppm") || has_suffix(path, ".pgm")) {
    write_pnm(path, img);
  } else {
    throw std::invalid_argument("write_image: unsupported extension in " + path + " (use .png/.ppm/.pgm)");
  }
}

}  // namespace nlaic
