#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "error.hpp"

namespace metalvis {

// Row-major RGBA8 raster.
class RasterImage {
 public:
  RasterImage() = default;

  RasterImage(int width, int height, std::vector<std::uint8_t> rgba)
      : width_(width), height_(height), pixels_(std::move(rgba)) {
    if (width < 1 || height < 1) throw Error("image dimensions must be positive");
    if (pixels_.size() != 4u * static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw Error("pixel buffer length does not match 4*width*height");
  }

  static RasterImage filled(int width, int height, std::array<std::uint8_t, 4> rgba) {
    std::vector<std::uint8_t> px(4u * static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (std::size_t i = 0; i < px.size(); i += 4) std::copy(rgba.begin(), rgba.end(), px.begin() + i);
    return RasterImage(width, height, std::move(px));
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  std::span<const std::uint8_t, 4> at(int x, int y) const {
    return std::span<const std::uint8_t, 4>(pixels_.data() + offset(x, y), 4);
  }
  std::span<std::uint8_t, 4> at(int x, int y) {
    return std::span<std::uint8_t, 4>(pixels_.data() + offset(x, y), 4);
  }

  bool valid() const { return width_ >= 1 && height_ >= 1; }

  bool operator==(const RasterImage&) const = default;

 private:
  std::size_t offset(int x, int y) const {
    return 4u * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x));
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// ---------------------------------------------------------------------------
// Codecs. PNG through libpng's simplified API, JPEG decode through libjpeg.

inline std::vector<std::uint8_t> encode_png(const RasterImage& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels().data(), 0, nullptr))
    throw Error(std::string("png encode failed: ") + png.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels().data(), 0, nullptr))
    throw Error(std::string("png encode failed: ") + png.message);
  out.resize(size);
  return out;
}

inline RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw Error(std::string("png decode failed: ") + png.message);
  png.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, px.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(std::string("png decode failed: ") + png.message);
  }
  return RasterImage(static_cast<int>(png.width), static_cast<int>(png.height), std::move(px));
}

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr base;
  char message[JMSG_LENGTH_MAX];
};

[[noreturn]] inline void jpeg_throw(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  throw Error(std::string("jpeg decode failed: ") + err->message);
}

}  // namespace detail

inline RasterImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  detail::JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_throw;
  jpeg_create_decompress(&cinfo);
  std::unique_ptr<jpeg_decompress_struct, void (*)(jpeg_decompress_struct*)> guard(
      &cinfo, [](jpeg_decompress_struct* c) { jpeg_destroy_decompress(c); });

  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width);
  const int h = static_cast<int>(cinfo.output_height);
  std::vector<std::uint8_t> row(3u * static_cast<std::size_t>(w));
  std::vector<std::uint8_t> px(4u * static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  while (cinfo.output_scanline < cinfo.output_height) {
    const auto y = cinfo.output_scanline;
    JSAMPROW rows[1] = {row.data()};
    jpeg_read_scanlines(&cinfo, rows, 1);
    for (int x = 0; x < w; ++x) {
      auto* dst = px.data() + 4u * (static_cast<std::size_t>(y) * w + x);
      dst[0] = row[3 * x];
      dst[1] = row[3 * x + 1];
      dst[2] = row[3 * x + 2];
      dst[3] = 255;
    }
  }
  jpeg_finish_decompress(&cinfo);
  return RasterImage(w, h, std::move(px));
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Sniffs the signature; PNG and JPEG are supported.
inline RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t png_sig[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(std::begin(png_sig), std::end(png_sig), bytes.begin()))
    return decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return decode_jpeg(bytes);
  throw Error("unsupported image format (expected PNG or JPEG)");
}

inline RasterImage load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_bytes(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Resampling

// Bilinear sample of a single-channel plane at continuous position, with
// pixel centres at integer coordinates and edge clamping.
inline double sample_bilinear(std::span<const double> plane, int width, int height, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const auto at = [&](int xx, int yy) { return plane[static_cast<std::size_t>(yy) * width + xx]; };
  const double top = at(x0, y0) + (at(x1, y0) - at(x0, y0)) * fx;
  const double bottom = at(x0, y1) + (at(x1, y1) - at(x0, y1)) * fx;
  return top + (bottom - top) * fy;
}

// Resamples a plane to out_w x out_h. Equal sizes reproduce the input
// exactly (centres map onto centres).
inline std::vector<double> resample_plane(std::span<const double> plane, int width, int height,
                                          int out_w, int out_h) {
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  const double sx = static_cast<double>(width) / out_w;
  const double sy = static_cast<double>(height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      out[static_cast<std::size_t>(y) * out_w + x] = sample_bilinear(plane, width, height, src_x, src_y);
    }
  }
  return out;
}

// Centers the image on a transparent square canvas of side max(w, h) and
// resamples it to side x side, keeping the alpha channel.
inline RasterImage square_thumbnail(const RasterImage& image, int side) {
  const int canvas = std::max(image.width(), image.height());
  const int ox = (canvas - image.width()) / 2;
  const int oy = (canvas - image.height()) / 2;
  std::array<std::vector<double>, 4> planes;
  for (auto& p : planes) p.assign(static_cast<std::size_t>(canvas) * canvas, 0.0);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      auto px = image.at(x, y);
      const double a = px[3] / 255.0;
      const std::size_t i = static_cast<std::size_t>(y + oy) * canvas + (x + ox);
      // premultiplied, so transparent pixels do not bleed colour
      for (int c = 0; c < 3; ++c) planes[c][i] = px[c] * a;
      planes[3][i] = px[3];
    }
  std::array<std::vector<double>, 4> scaled;
  for (int c = 0; c < 4; ++c) scaled[c] = resample_plane(planes[c], canvas, canvas, side, side);
  std::vector<std::uint8_t> out(4u * static_cast<std::size_t>(side) * side);
  for (std::size_t i = 0; i < scaled[3].size(); ++i) {
    const double a = scaled[3][i];
    for (int c = 0; c < 3; ++c) {
      const double v = a > 0.0 ? scaled[c][i] * 255.0 / a : 0.0;
      out[4 * i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    out[4 * i + 3] = static_cast<std::uint8_t>(std::clamp(std::lround(a), 0L, 255L));
  }
  return RasterImage(side, side, std::move(out));
}

}  // namespace metalvis
