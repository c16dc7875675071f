#include "svkit/raster.hpp"

#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace svkit {

namespace fs = std::filesystem;

Image::Image(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative image dimension");
  if (channels != 1 && channels != 3) throw std::invalid_argument("images have 1 or 3 channels");
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * static_cast<std::size_t>(channels),
                 fill);
}

Image read_image(const fs::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw ImageIoError("cannot decode " + path.string());
  if (mat.depth() != CV_8U) throw ImageIoError(path.string() + ": only 8-bit images are supported");
  const int src_channels = mat.channels();
  if (src_channels != 1 && src_channels != 3 && src_channels != 4) {
    throw ImageIoError(path.string() + ": unsupported channel count");
  }
  Image image(mat.cols, mat.rows, src_channels == 1 ? 1 : 3);
  for (int r = 0; r < mat.rows; ++r) {
    const std::uint8_t* src = mat.ptr(r);
    if (src_channels == 1) {
      std::memcpy(image.pixel(r, 0), src, static_cast<std::size_t>(mat.cols));
      continue;
    }
    for (int c = 0; c < mat.cols; ++c, src += src_channels) {
      std::uint8_t* dst = image.pixel(r, c);
      dst[0] = src[2];
      dst[1] = src[1];
      dst[2] = src[0];
    }
  }
  return image;
}

void write_image(const fs::path& path, const Image& image, int jpeg_quality) {
  if (image.empty()) throw ImageIoError("refusing to write an empty image to " + path.string());
  const int type = image.channels() == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat out(image.height(), image.width(), type);
  for (int r = 0; r < image.height(); ++r) {
    std::uint8_t* dst = out.ptr(r);
    if (image.channels() == 1) {
      std::memcpy(dst, image.pixel(r, 0), static_cast<std::size_t>(image.width()));
      continue;
    }
    for (int c = 0; c < image.width(); ++c, dst += 3) {
      const std::uint8_t* src = image.pixel(r, c);
      dst[0] = src[2];
      dst[1] = src[1];
      dst[2] = src[0];
    }
  }
  std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, jpeg_quality};
  if (!cv::imwrite(path.string(), out, params)) throw ImageIoError("cannot write " + path.string());
}

Grid<std::uint8_t> read_gray8(const fs::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw ImageIoError("cannot decode " + path.string());
  if (mat.depth() != CV_8U || mat.channels() != 1) {
    throw ImageIoError(path.string() + ": expected a single-channel 8-bit image");
  }
  Grid<std::uint8_t> grid(mat.cols, mat.rows);
  for (int r = 0; r < mat.rows; ++r) std::memcpy(grid.row(r).data(), mat.ptr(r), static_cast<std::size_t>(mat.cols));
  return grid;
}

void write_gray8_png(const fs::path& path, const Grid<std::uint8_t>& grid) {
  if (grid.empty()) throw ImageIoError("refusing to write an empty grid to " + path.string());
  cv::Mat mat(grid.height(), grid.width(), CV_8UC1, const_cast<std::uint8_t*>(grid.cells().data()));
  if (!cv::imwrite(path.string(), mat)) throw ImageIoError("cannot write " + path.string());
}

}  // namespace svkit
