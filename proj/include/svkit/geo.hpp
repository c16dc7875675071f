#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace svkit {

/// Mean Earth radius (IUGG), meters.
inline constexpr double kEarthRadiusM = 6371008.8;

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;

  bool operator==(const LonLat&) const = default;
};

class GeoError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// WGS 84 rectangle. A box may collapse to a line or a point; inverted boxes
/// are rejected by validate().
struct BoundingBox {
  double west = 0.0;
  double south = 0.0;
  double east = 0.0;
  double north = 0.0;

  /// Parses "W,S,E,N" and validates the result.
  static BoundingBox parse(std::string_view text);

  void validate() const;
  bool contains(LonLat p) const;
  LonLat center() const;
  double mean_latitude() const { return 0.5 * (south + north); }

  bool operator==(const BoundingBox&) const = default;
};

/// Great-circle distance in meters.
double haversine_m(LonLat a, LonLat b);

/// Local equirectangular projection around a reference latitude. Meters east
/// and north of the given origin.
class LocalFrame {
 public:
  LocalFrame(LonLat origin, double reference_lat);
  explicit LocalFrame(LonLat origin) : LocalFrame(origin, origin.lat) {}

  struct Point {
    double x = 0.0;
    double y = 0.0;
  };

  Point to_meters(LonLat p) const;
  LonLat to_lonlat(Point p) const;

  double meters_per_degree_lon() const { return m_per_deg_lon_; }
  double meters_per_degree_lat() const { return m_per_deg_lat_; }

 private:
  LonLat origin_;
  double m_per_deg_lon_;
  double m_per_deg_lat_;
};

}  // namespace svkit
