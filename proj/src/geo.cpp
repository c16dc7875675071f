#include "svkit/geo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

namespace svkit {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw GeoError("not a number: '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

BoundingBox BoundingBox::parse(std::string_view text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    parts.push_back(parse_double(text.substr(start, comma - start)));
    start = comma + 1;
  }
  if (parts.size() != 4) {
    throw GeoError("bounding box needs four values W,S,E,N");
  }
  BoundingBox box{parts[0], parts[1], parts[2], parts[3]};
  box.validate();
  return box;
}

void BoundingBox::validate() const {
  auto in = [](double v, double lim) { return std::isfinite(v) && v >= -lim && v <= lim; };
  if (!in(west, 180.0) || !in(east, 180.0)) throw GeoError("longitude out of [-180,180]");
  if (!in(south, 90.0) || !in(north, 90.0)) throw GeoError("latitude out of [-90,90]");
  if (west > east) throw GeoError("west must not exceed east");
  if (south > north) throw GeoError("south must not exceed north");
}

bool BoundingBox::contains(LonLat p) const {
  return p.lon >= west && p.lon <= east && p.lat >= south && p.lat <= north;
}

LonLat BoundingBox::center() const { return {0.5 * (west + east), 0.5 * (south + north)}; }

double haversine_m(LonLat a, LonLat b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2);
  const double s2 = std::sin(dlambda / 2);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

LocalFrame::LocalFrame(LonLat origin, double reference_lat)
    : origin_(origin),
      m_per_deg_lon_(kEarthRadiusM * kDegToRad * std::cos(reference_lat * kDegToRad)),
      m_per_deg_lat_(kEarthRadiusM * kDegToRad) {}

LocalFrame::Point LocalFrame::to_meters(LonLat p) const {
  return {(p.lon - origin_.lon) * m_per_deg_lon_, (p.lat - origin_.lat) * m_per_deg_lat_};
}

LonLat LocalFrame::to_lonlat(Point p) const {
  return {origin_.lon + p.x / m_per_deg_lon_, origin_.lat + p.y / m_per_deg_lat_};
}

}  // namespace svkit
