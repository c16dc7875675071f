#include "svkit/tiles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>

#include <json.hpp>

namespace svkit {
namespace {

constexpr double kMercatorLatLimit = 85.0511287798066;

int clamp_index(double v, int n) {
  const auto i = static_cast<long long>(std::floor(v));
  return static_cast<int>(std::clamp<long long>(i, 0, n - 1));
}

std::optional<std::int64_t> as_id(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc{} && ptr == s.data() + s.size()) return out;
  }
  return std::nullopt;
}

std::optional<std::string> as_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  return std::nullopt;
}

}  // namespace

std::string TileCoord::to_string() const {
  return std::to_string(z) + "/" + std::to_string(x) + "/" + std::to_string(y);
}

double lon_to_tile_x(double lon, int zoom) {
  return (lon + 180.0) / 360.0 * std::ldexp(1.0, zoom);
}

double lat_to_tile_y(double lat, int zoom) {
  lat = std::clamp(lat, -kMercatorLatLimit, kMercatorLatLimit);
  const double phi = lat * std::numbers::pi / 180.0;
  const double merc = std::log(std::tan(phi) + 1.0 / std::cos(phi));
  return (1.0 - merc / std::numbers::pi) / 2.0 * std::ldexp(1.0, zoom);
}

BoundingBox tile_bounds(const TileCoord& tile) {
  const double n = std::ldexp(1.0, tile.z);
  auto lon = [n](double x) { return x / n * 360.0 - 180.0; };
  auto lat = [n](double y) {
    return std::atan(std::sinh(std::numbers::pi * (1.0 - 2.0 * y / n))) * 180.0 / std::numbers::pi;
  };
  return {lon(tile.x), lat(tile.y + 1), lon(tile.x + 1), lat(tile.y)};
}

std::vector<TileCoord> enumerate_tiles(const BoundingBox& bbox, int zoom) {
  bbox.validate();
  if (zoom < 0 || zoom > kMaxZoom) {
    throw GeoError("zoom must be in [0," + std::to_string(kMaxZoom) + "]");
  }
  const int n = 1 << zoom;
  const int x0 = clamp_index(lon_to_tile_x(bbox.west, zoom), n);
  const int x1 = clamp_index(lon_to_tile_x(bbox.east, zoom), n);
  const int y0 = clamp_index(lat_to_tile_y(bbox.north, zoom), n);
  const int y1 = clamp_index(lat_to_tile_y(bbox.south, zoom), n);

  std::vector<TileCoord> tiles;
  tiles.reserve(static_cast<std::size_t>(x1 - x0 + 1) * static_cast<std::size_t>(y1 - y0 + 1));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) tiles.push_back({zoom, x, y});
  }
  return tiles;
}

ParsedTile parse_tile_features(std::string_view payload, const BoundingBox& bbox,
                               const TileCoord& tile) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::parse_error& e) {
    throw TileParseError(tile, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array()) {
    throw TileParseError(tile, "payload is not a FeatureCollection");
  }

  ParsedTile out;
  for (const auto& feature : doc["features"]) {
    if (!feature.is_object()) {
      ++out.skipped;
      continue;
    }
    const auto geom = feature.find("geometry");
    const auto props = feature.find("properties");
    if (geom == feature.end() || props == feature.end() || !props->is_object() ||
        !geom->is_object() || geom->value("type", "") != "Point") {
      ++out.skipped;
      continue;
    }
    const auto coords = geom->find("coordinates");
    if (coords == geom->end() || !coords->is_array() || coords->size() < 2 ||
        !(*coords)[0].is_number() || !(*coords)[1].is_number()) {
      ++out.skipped;
      continue;
    }
    std::optional<std::int64_t> id;
    std::optional<std::string> sequence;
    if (auto it = props->find("id"); it != props->end()) id = as_id(*it);
    if (auto it = props->find("sequence_id"); it != props->end()) sequence = as_text(*it);
    if (!id || !sequence || sequence->empty()) {
      ++out.skipped;
      continue;
    }

    ImageMeta meta;
    meta.image_id = *id;
    meta.sequence_id = std::move(*sequence);
    meta.position = {(*coords)[0].get<double>(), (*coords)[1].get<double>()};
    if (auto it = props->find("compass_angle"); it != props->end() && it->is_number()) {
      const double a = std::fmod(it->get<double>(), 360.0);
      meta.compass_angle = a < 0 ? a + 360.0 : a;
    }
    if (auto it = props->find("captured_at"); it != props->end() && it->is_number()) {
      meta.captured_at = it->get<std::int64_t>();
    }
    if (auto it = props->find("is_pano"); it != props->end() && it->is_boolean()) {
      meta.is_pano = it->get<bool>();
    }
    if (!bbox.contains(meta.position)) {
      ++out.outside;
      continue;
    }
    out.images.push_back(std::move(meta));
  }
  return out;
}

}  // namespace svkit
