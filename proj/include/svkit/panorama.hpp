#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "svkit/raster.hpp"
#include "svkit/segmentation.hpp"

namespace svkit {

/// Road mask of an equirectangular panorama with the bottom quarter removed
/// and the first quarter of columns appended on the right.
struct ExtendedMask {
  int original_width = 0;
  int original_height = 0;
  /// Original width after right-padding to a multiple of four.
  int padded_width = 0;
  RoadMask mask;
};

ExtendedMask prepare_extended_mask(const RoadMask& mask);

/// Per-column evidence for a road running away from the camera.
struct ColumnScores {
  /// B: rows from the bottom edge up to and including the topmost road pixel.
  std::vector<int> reach;
  /// C: road pixels in the bottom half.
  std::vector<int> support;
  double k = 0.125;
  /// R = B + k C
  std::vector<double> score;
  int rows = 0;

  std::size_t size() const { return score.size(); }
};

ColumnScores column_road_scores(const RoadMask& mask, double k = 0.125);
ColumnScores column_road_scores(const ExtendedMask& em, double k = 0.125);

struct PeakParams {
  /// Minimum distance between accepted peaks, as a fraction of the width.
  double min_separation = 0.25;
  /// Peaks closer than this (fraction of width, around the ring) are one road.
  double dedup_tolerance = 0.01;
  /// Gate: B >= min_reach * rows and C >= min_support * rows / 2.
  double min_reach = 0.2;
  double min_support = 0.05;
  /// Treat columns as a 360° ring (panoramas) or as a flat strip.
  bool wrap = true;
};

struct CenterLine {
  int x = 0;
  double score = 0.0;

  bool operator==(const CenterLine&) const = default;
};

struct CenterLineSet {
  /// Ascending by column.
  std::vector<CenterLine> centers;

  std::vector<int> columns() const;
  bool empty() const { return centers.empty(); }
  std::size_t size() const { return centers.size(); }
  bool operator==(const CenterLineSet&) const = default;
};

/// Local maxima of R (plateaus resolved to their middle column), gated,
/// reduced into [0, width), merged across the wrap seam and thinned to the
/// minimum separation, strongest first.
CenterLineSet find_center_lines(const ColumnScores& scores, int width, const PeakParams& params = {});

enum class CropOffset { Left, Center, Right };
std::string_view to_string(CropOffset offset);

/// Pixel window; x0 is taken modulo the source width so windows may cross
/// the panorama seam.
struct CropWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  bool operator==(const CropWindow&) const = default;
};

struct CropSpec {
  std::int64_t source_image_id = 0;
  int center_x = 0;
  CropOffset offset = CropOffset::Center;
  /// Horizontal center of this crop, modulo the source width.
  int view_x = 0;
  CropWindow window;

  bool operator==(const CropSpec&) const = default;
};

struct CropGeometry {
  /// Crop width as a fraction of the panorama width (90° of 360°).
  double field_of_view = 0.25;
  /// Lateral shift of the left/right crops (30° of 360°).
  double lateral_offset = 1.0 / 12.0;
};

class CropError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Left, center and right 4:3 views around one road center, vertically
/// centered on the horizon row.
std::vector<CropSpec> plan_crops(int center, int width, int height, std::int64_t source_image_id = 0,
                                 const CropGeometry& geometry = {});

/// Copies the window verbatim, addressing columns modulo the source width.
Image apply_crop(const Image& image, const CropWindow& window);
inline Image apply_crop(const Image& image, const CropSpec& spec) { return apply_crop(image, spec.window); }

/// `<image_id>_c<center>_<offset>.jpg`
std::string crop_file_name(const CropSpec& spec);

struct PanoramaAnalysis {
  ColumnScores scores;
  CenterLineSet centers;
  std::vector<CropSpec> crops;
};

/// Full pipeline for one panorama mask of the given photo size.
PanoramaAnalysis analyze_panorama(const RoadMask& mask, std::int64_t image_id, double k = 0.125,
                                  const PeakParams& peaks = {}, const CropGeometry& geometry = {});

}  // namespace svkit
