#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "svkit/geo.hpp"

namespace svkit {

struct GridSpec {
  BoundingBox bbox;
  double spacing_m = 20.0;
};

/// Axis-aligned lattice anchored at the south-west corner, boundary rows and
/// columns included. An axis shorter than the spacing collapses to its
/// midpoint. Row-major from south-west.
std::vector<LonLat> build_grid(const GridSpec& spec);

struct PlacedImage {
  std::int64_t image_id = 0;
  LonLat position;
};

/// For every grid point, the nearest image within spacing/sqrt(2) meters
/// (haversine; ties go to the lower id). Result is ascending and unique.
std::vector<std::int64_t> assign_nearest(std::span<const PlacedImage> images, std::span<const LonLat> grid,
                                         double spacing_m);

/// Uniformly random subset of size min(target, |selected|), ascending.
/// Reproducible for a given seed on every platform.
std::vector<std::int64_t> downsample(std::span<const std::int64_t> selected, std::size_t target,
                                     std::uint64_t seed);

struct ManifestRecord {
  std::int64_t image_id = 0;
  std::int64_t source_image_id = 0;
  std::string url;
  std::string cityname;
  LonLat position;
  bool enabled = false;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<ManifestRecord> records;
};

/// What the manifest needs to know about one selected source image.
struct SourceImage {
  LonLat position;
  /// Survey image file, relative to the imagery root.
  std::string file;

  bool operator==(const SourceImage&) const = default;
};

struct ManifestOptions {
  std::string cityname;
  /// Prepended to the file path to form the served URL.
  std::string url_prefix;
  std::int64_t first_image_id = 1;
  std::uint64_t seed = 0;
};

class ManifestError : public std::runtime_error {
 public:
  ManifestError(const std::string& what, std::vector<std::int64_t> ids = {})
      : std::runtime_error(what), ids_(std::move(ids)) {}
  const std::vector<std::int64_t>& ids() const { return ids_; }

 private:
  std::vector<std::int64_t> ids_;
};

/// One disabled record per final id, survey ids assigned sequentially in
/// ascending source-id order. Throws ManifestError naming every id without
/// metadata.
Manifest emit_manifest(std::span<const std::int64_t> final_ids, const std::map<std::int64_t, SourceImage>& metadata,
                       const ManifestOptions& options);

/// JSON lines; the first line is a header carrying the sampling seed.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// One `UPDATE images SET enabled = TRUE WHERE image_id = N;` per record.
std::string enable_script(const Manifest& manifest);
/// Image ids named by an enable script; throws ManifestError on any other
/// statement.
std::vector<std::int64_t> parse_enable_script(std::string_view script);

}  // namespace svkit
