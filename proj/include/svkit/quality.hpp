#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "svkit/panorama.hpp"
#include "svkit/raster.hpp"
#include "svkit/segmentation.hpp"

namespace svkit {

struct QualityThresholds {
  double contrast_min = 0.35;
  double tone_min = 0.35;
  double tone_floor = 0.8;

  void validate() const;
};

enum class RejectReason { LowTone, LowContrast, NoRoad };
std::string_view to_string(RejectReason reason);

struct QualityVerdict {
  bool passed = false;
  std::optional<RejectReason> reason;
};

/// Rec. 601 luma of every pixel, scaled to [0, 1], no linearization.
std::vector<double> luminance(const Image& image);

/// Linear-interpolated percentile (q in [0, 1]) of `values`; reorders them.
double percentile(std::vector<double>& values, double q);

/// Spread between the 1st and 99th luminance percentiles.
double contrast_score(const Image& image);

/// Penalizes luminance histograms that pile up in the darkest or brightest
/// eighth, scaled by how many of the 64 bins are meaningfully occupied.
double tonemap_score(const Image& image);

/// T_min < T  and  C_min < C + max(0, T - T_floor). The tone test is
/// reported first.
QualityVerdict quality_pass(double contrast, double tonemap, const QualityThresholds& th = {});

/// Whether a flat (non-panoramic) photo shows at least one road center line
/// in the top three quarters of its mask.
bool road_check(const RoadMask& mask, const PeakParams& params = {});

struct QualityReport {
  double contrast = 0.0;
  double tonemap = 0.0;
  /// Outcome of the road gate; true when the gate is disabled.
  bool road_check = false;
  bool passed = false;
  std::optional<RejectReason> reason;
};

struct FlatImageResult {
  QualityReport report;
  /// Present only for passing images.
  std::optional<CropWindow> crop;
};

/// Largest 4:3 window centered in a w x h frame.
CropWindow largest_centered_4x3(int width, int height);

FlatImageResult evaluate_image(const Image& image, const RoadMask& mask, const QualityThresholds& th = {},
                               bool require_road = true, const PeakParams& params = {});

}  // namespace svkit
