#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "svkit/raster.hpp"

namespace svkit {

using ClassId = std::uint8_t;

class SegmentationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Class id -> class name. Only the "road" entry matters downstream.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::map<ClassId, std::string> names) : names_(std::move(names)) {}

  /// The 19 Cityscapes training classes, road = 0.
  static const LabelMap& cityscapes();
  /// Line-delimited `id<TAB>name`; `#` starts a comment line.
  static LabelMap load(const std::filesystem::path& path);

  bool contains(ClassId id) const { return names_.contains(id); }
  const std::string& name(ClassId id) const;
  std::optional<ClassId> find(const std::string& name) const;
  const std::map<ClassId, std::string>& entries() const { return names_; }

  bool operator==(const LabelMap&) const = default;

 private:
  std::map<ClassId, std::string> names_;
};

inline constexpr const char* kRoadClass = "road";

/// Per-pixel class ids aligned with a photo.
struct LabelMatrix {
  Grid<ClassId> labels;
  LabelMap label_map;

  int width() const { return labels.width(); }
  int height() const { return labels.height(); }

  /// Throws SegmentationError when a label has no label_map entry.
  void validate() const;
};

/// Binary road / non-road mask.
class RoadMask {
 public:
  RoadMask() = default;
  RoadMask(int width, int height) : bits_(width, height, 0) {}

  int width() const { return bits_.width(); }
  int height() const { return bits_.height(); }
  bool empty() const { return bits_.empty(); }

  bool at(int row, int col) const { return bits_(row, col) != 0; }
  void set(int row, int col, bool road) { bits_(row, col) = road ? 1 : 0; }
  std::size_t count() const;

  const Grid<std::uint8_t>& bits() const { return bits_; }
  bool operator==(const RoadMask&) const = default;

 private:
  Grid<std::uint8_t> bits_;
};

/// `<image_id>.labels.png` next to the photo.
std::filesystem::path label_sidecar_path(const std::filesystem::path& image_path);

/// Loads a sidecar PNG (pixel value = class id). When `expected_size` is
/// given as (width, height) the matrix must match it.
LabelMatrix load_label_matrix(const std::filesystem::path& path, const LabelMap& label_map = LabelMap::cityscapes(),
                              std::optional<std::pair<int, int>> expected_size = std::nullopt);
void save_label_matrix(const std::filesystem::path& path, const LabelMatrix& matrix);

RoadMask road_mask(const LabelMatrix& matrix);

struct SyntheticPanorama {
  LabelMatrix labels;
  /// Ground-truth road center columns, ascending.
  std::vector<int> centers;
};

/// Builds a labeled equirectangular scene: sky above the horizon (row H/2),
/// ground below it, and one road triangle per center with its apex on the
/// horizon widening to `half_width_at_bottom` on the last row. Triangles wrap
/// across the left/right seam and must not touch each other.
SyntheticPanorama synthesize_road_panorama(int width, int height, std::span<const int> road_centers,
                                           double half_width_at_bottom);

/// Circular column distance on a ring of `width` columns.
int wrap_distance(int a, int b, int width);

}  // namespace svkit
