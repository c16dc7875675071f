#include "svkit/quality.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace svkit {

void QualityThresholds::validate() const {
  for (double v : {contrast_min, tone_min, tone_floor}) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("quality thresholds must lie in [0,1]");
  }
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::LowTone: return "LowTone";
    case RejectReason::LowContrast: return "LowContrast";
    case RejectReason::NoRoad: return "NoRoad";
  }
  return "";
}

std::vector<double> luminance(const Image& image) {
  if (image.empty()) throw std::invalid_argument("empty image");
  std::vector<double> lum;
  lum.reserve(static_cast<std::size_t>(image.width()) * static_cast<std::size_t>(image.height()));
  const auto bytes = image.bytes();
  if (image.channels() == 1) {
    for (std::uint8_t v : bytes) lum.push_back(v / 255.0);
  } else {
    for (std::size_t i = 0; i + 2 < bytes.size(); i += 3) {
      lum.push_back((0.299 * bytes[i] + 0.587 * bytes[i + 1] + 0.114 * bytes[i + 2]) / 255.0);
    }
  }
  return lum;
}

double percentile(std::vector<double>& values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of no values");
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + frac * (b - a);
}

double contrast_score(const Image& image) {
  auto lum = luminance(image);
  const double p1 = percentile(lum, 0.01);
  const double p99 = percentile(lum, 0.99);
  return std::clamp(p99 - p1, 0.0, 1.0);
}

double tonemap_score(const Image& image) {
  constexpr int kBins = 64;
  const auto lum = luminance(image);
  std::array<double, kBins> hist{};
  for (double l : lum) {
    const int bin = std::min(kBins - 1, static_cast<int>(l * kBins));
    hist[static_cast<std::size_t>(bin)] += 1.0;
  }
  const double n = static_cast<double>(lum.size());
  double dark = 0.0;
  double bright = 0.0;
  int occupied = 0;
  for (int i = 0; i < kBins; ++i) {
    const double h = hist[static_cast<std::size_t>(i)] / n;
    if (i < 8) dark += h;
    if (i >= kBins - 8) bright += h;
    if (h >= 1.0 / 256.0) ++occupied;
  }
  const double spread = occupied / static_cast<double>(kBins);
  const double dark_factor = 1.0 - std::clamp(dark - 0.2, 0.0, 1.0) / 0.8;
  const double bright_factor = 1.0 - std::clamp(bright - 0.2, 0.0, 1.0) / 0.8;
  return std::clamp(spread * dark_factor * bright_factor, 0.0, 1.0);
}

QualityVerdict quality_pass(double contrast, double tonemap, const QualityThresholds& th) {
  if (!(th.tone_min < tonemap)) return {false, RejectReason::LowTone};
  if (!(th.contrast_min < contrast + std::max(0.0, tonemap - th.tone_floor))) {
    return {false, RejectReason::LowContrast};
  }
  return {true, std::nullopt};
}

bool road_check(const RoadMask& mask, const PeakParams& params) {
  if (mask.empty()) return false;
  const int rows = mask.height() - mask.height() / 4;
  RoadMask top(mask.width(), rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < mask.width(); ++c) top.set(r, c, mask.at(r, c));
  }
  PeakParams flat = params;
  flat.wrap = false;
  return !find_center_lines(column_road_scores(top), mask.width(), flat).empty();
}

CropWindow largest_centered_4x3(int width, int height) {
  if (width < 4 || height < 3) throw std::invalid_argument("frame too small for a 4:3 crop");
  const int unit = std::min(width / 4, height / 3);
  const int w = 4 * unit;
  const int h = 3 * unit;
  return {(width - w) / 2, (height - h) / 2, w, h};
}

FlatImageResult evaluate_image(const Image& image, const RoadMask& mask, const QualityThresholds& th,
                               bool require_road, const PeakParams& params) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw std::invalid_argument("image and mask dimensions differ");
  }
  FlatImageResult out;
  auto& rep = out.report;
  rep.contrast = contrast_score(image);
  rep.tonemap = tonemap_score(image);
  rep.road_check = require_road ? road_check(mask, params) : true;

  const auto verdict = quality_pass(rep.contrast, rep.tonemap, th);
  rep.reason = verdict.reason;
  if (verdict.passed && !rep.road_check) rep.reason = RejectReason::NoRoad;
  rep.passed = verdict.passed && rep.road_check;
  if (rep.passed) out.crop = largest_centered_4x3(image.width(), image.height());
  return out;
}

}  // namespace svkit
