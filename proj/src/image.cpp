#include "ani/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace ani {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

RgbImage load_png(std::FILE* f, const std::string& path) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png init failed for " + path);
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt or unsupported PNG: " + path);
  }
  png_init_io(png, f);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // network order -> host LE
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);

  RgbImage img(static_cast<int>(h), static_cast<int>(w));
  const std::size_t stride = png_get_rowbytes(png, info);
  std::vector<png_byte> raw(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (depth == 16) {
    const auto* p = reinterpret_cast<const std::uint16_t*>(raw.data());
    for (std::size_t i = 0; i < img.data.size(); ++i)
      img.data[i] = static_cast<float>(p[i]) / 65535.0f;
  } else {
    for (std::size_t i = 0; i < img.data.size(); ++i)
      img.data[i] = static_cast<float>(raw[i]) / 255.0f;
  }
  return img;
}

int ppm_token(std::FILE* f) {
  // Next integer token, skipping whitespace and '#' comments.
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (!std::isspace(c)) {
      break;
    }
    c = std::fgetc(f);
  }
  int value = -1;
  while (c != EOF && std::isdigit(c)) {
    if (value < 0) value = 0;
    value = value * 10 + (c - '0');
    if (value > 1 << 30) return -1;
    c = std::fgetc(f);
  }
  return value;
}

RgbImage load_ppm(std::FILE* f, const std::string& path) {
  if (std::fgetc(f) != 'P' || std::fgetc(f) != '6')
    throw IoError("not a P6 PPM: " + path);
  const int w = ppm_token(f);
  const int h = ppm_token(f);
  const int maxval = ppm_token(f);
  if (w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535))
    throw IoError("unsupported PPM header in " + path);

  RgbImage img(h, w);
  const std::size_t n = img.data.size();
  if (maxval == 255) {
    std::vector<std::uint8_t> raw(n);
    if (std::fread(raw.data(), 1, n, f) != n)
      throw IoError("truncated PPM payload: " + path);
    for (std::size_t i = 0; i < n; ++i) img.data[i] = raw[i] / 255.0f;
  } else {
    std::vector<std::uint8_t> raw(n * 2);
    if (std::fread(raw.data(), 1, n * 2, f) != n * 2)
      throw IoError("truncated PPM payload: " + path);
    for (std::size_t i = 0; i < n; ++i) {
      const int v = raw[2 * i] << 8 | raw[2 * i + 1];  // big-endian samples
      img.data[i] = static_cast<float>(v) / 65535.0f;
    }
  }
  return img;
}

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void save_png(const RgbImage& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png init failed for " + path);
  }
  std::vector<std::uint8_t> raw(img.data.size());
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(img.data[i]);
  for (int y = 0; y < img.height; ++y)
    rows[y] = raw.data() + static_cast<std::size_t>(y) * img.width * 3;
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_ppm(const RgbImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<char> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<char>(to_byte(img.data[i]));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

RgbImage load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open: " + path);
  unsigned char magic[8] = {};
  const std::size_t got = std::fread(magic, 1, 8, f.get());
  std::rewind(f.get());
  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return load_png(f.get(), path);
  if (got >= 2 && magic[0] == 'P' && magic[1] == '6')
    return load_ppm(f.get(), path);
  throw IoError("unsupported image format (need PNG or P6 PPM): " + path);
}

void save_image(const RgbImage& img, const std::string& path) {
  if (img.height <= 0 || img.width <= 0)
    throw IoError("refusing to save empty image: " + path);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0)
    save_ppm(img, path);
  else
    save_png(img, path);
}

RgbImage crop(const RgbImage& img, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > img.width ||
      y + h > img.height) {
    throw DimensionError("crop out of bounds: " + std::to_string(x) + "," +
                         std::to_string(y) + " " + std::to_string(w) + "x" +
                         std::to_string(h) + " from " +
                         std::to_string(img.width) + "x" +
                         std::to_string(img.height));
  }
  RgbImage out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch)
        out.at(r, c, ch) = img.at(y + r, x + c, ch);
  return out;
}

RgbImage downscale(const RgbImage& img, int factor) {
  if (factor < 1) throw ConfigError("downscale factor must be >= 1");
  if (factor == 1) return img;
  const int h = img.height / factor;
  const int w = img.width / factor;
  if (h < 1 || w < 1) throw DimensionError("downscale factor exceeds image");
  RgbImage out(h, w);
  const float norm = 1.0f / (static_cast<float>(factor) * factor);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        float acc = 0.0f;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            acc += img.at(r * factor + dy, c * factor + dx, ch);
        out.at(r, c, ch) = acc * norm;
      }
    }
  }
  return out;
}

Matrix image_to_targets(const RgbImage& img) {
  Matrix t(static_cast<Index>(img.pixel_count()), 3);
  std::memcpy(t.data(), img.data.data(), img.data.size() * sizeof(float));
  return t;
}

RgbImage targets_to_image(const Matrix& rgb, int height, int width) {
  if (rgb.cols() != 3 ||
      rgb.rows() != static_cast<Index>(height) * width) {
    throw DimensionError("targets_to_image: got " +
                         shape_str(rgb.rows(), rgb.cols()) + " for " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  RgbImage img(height, width);
  for (Index i = 0; i < rgb.rows(); ++i)
    for (Index c = 0; c < 3; ++c)
      img.data[static_cast<std::size_t>(i) * 3 + c] =
          std::clamp(rgb(i, c), 0.0f, 1.0f);
  return img;
}

}  // namespace ani
