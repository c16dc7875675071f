#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace svkit {

/// Row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        cells_(static_cast<std::size_t>(checked(width)) * static_cast<std::size_t>(checked(height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return cells_.empty(); }

  T& operator()(int row, int col) { return cells_[index(row, col)]; }
  const T& operator()(int row, int col) const { return cells_[index(row, col)]; }

  std::span<T> row(int r) { return {cells_.data() + index(r, 0), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int r) const {
    return {cells_.data() + index(r, 0), static_cast<std::size_t>(width_)};
  }

  std::span<T> cells() { return cells_; }
  std::span<const T> cells() const { return cells_; }

  bool operator==(const Grid&) const = default;

 private:
  static int checked(int n) {
    if (n < 0) throw std::invalid_argument("negative grid dimension");
    return n;
  }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> cells_;
};

/// 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t* pixel(int row, int col) { return pixels_.data() + offset(row, col); }
  const std::uint8_t* pixel(int row, int col) const { return pixels_.data() + offset(row, col); }

  std::span<std::uint8_t> bytes() { return pixels_; }
  std::span<const std::uint8_t> bytes() const { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)) *
           static_cast<std::size_t>(channels_);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> pixels_;
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes a JPEG/PNG file. Color images come back as RGB.
Image read_image(const std::filesystem::path& path);
/// Encodes by file extension; `.jpg` uses the given quality.
void write_image(const std::filesystem::path& path, const Image& image, int jpeg_quality = 92);

/// Reads a single-channel 8-bit image (e.g. a PNG label sidecar) without
/// any conversion.
Grid<std::uint8_t> read_gray8(const std::filesystem::path& path);
void write_gray8_png(const std::filesystem::path& path, const Grid<std::uint8_t>& grid);

}  // namespace svkit
