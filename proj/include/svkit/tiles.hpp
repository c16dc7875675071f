#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svkit/geo.hpp"

namespace svkit {

/// Web-Mercator slippy-map tile address.
struct TileCoord {
  int z = 0;
  int x = 0;
  int y = 0;

  auto operator<=>(const TileCoord&) const = default;
  std::string to_string() const;
};

inline constexpr int kMaxZoom = 22;

/// Every tile whose extent intersects `bbox`, row-major (north to south, then
/// west to east).
std::vector<TileCoord> enumerate_tiles(const BoundingBox& bbox, int zoom);

/// Fractional tile coordinates of a point; latitudes beyond the Mercator
/// limit are clamped.
double lon_to_tile_x(double lon, int zoom);
double lat_to_tile_y(double lat, int zoom);

/// Geographic extent of a tile.
BoundingBox tile_bounds(const TileCoord& tile);

struct ImageMeta {
  std::int64_t image_id = 0;
  std::string sequence_id;
  double compass_angle = 0.0;
  LonLat position;
  /// Milliseconds since the Unix epoch.
  std::int64_t captured_at = 0;
  bool is_pano = false;
};

class TileParseError : public std::runtime_error {
 public:
  TileParseError(const TileCoord& tile, const std::string& what)
      : std::runtime_error("tile " + tile.to_string() + ": " + what), tile_(tile) {}
  const TileCoord& tile() const { return tile_; }

 private:
  TileCoord tile_;
};

struct ParsedTile {
  std::vector<ImageMeta> images;
  /// Features dropped for a missing or ill-typed required property.
  std::size_t skipped = 0;
  /// Well-formed features lying outside the bounding box.
  std::size_t outside = 0;
};

/// Parses one cached tile payload: a GeoJSON FeatureCollection of Point
/// features whose properties carry `id`, `sequence_id` and optionally
/// `compass_angle`, `captured_at`, `is_pano`.
ParsedTile parse_tile_features(std::string_view payload, const BoundingBox& bbox,
                               const TileCoord& tile = {});

}  // namespace svkit
