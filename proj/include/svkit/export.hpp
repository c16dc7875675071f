#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "svkit/backend/types.hpp"
#include "svkit/geo.hpp"

namespace svkit {

struct AnonymizedRow {
  std::int64_t id = 0;
  backend::Timestamp timestamp = 0;
  std::int64_t sess = 0;
  std::int64_t image = 0;
  int cat = 0;
  int score = 0;
  std::optional<std::string> postcode;
  std::optional<std::string> country;
  int age = 0;
  std::optional<double> mgi;
  std::optional<backend::Education> education;
  std::optional<std::string> gender;
};

struct PerturbationBounds {
  int age_years = 2;
  backend::Timestamp session_offset_us = 24LL * 3600 * 1'000'000;
  backend::Timestamp row_jitter_us = 2'000'000;
};

/// First character kept; every later letter or digit becomes '-', spaces
/// and punctuation stay. Multi-byte characters count as one.
std::string redact_postcode(std::string_view postcode);

/// Draws depend only on seed and session id, so a session's treatment does
/// not change when unrelated rows are added.
std::vector<AnonymizedRow> anonymize(std::span<const backend::RatingView> views, std::uint64_t seed,
                                     const PerturbationBounds& bounds = {});

/// "YYYY-MM-DD HH:MM:SS.uuuuuu", UTC.
std::string format_timestamp(backend::Timestamp us);
std::string to_csv(std::span<const AnonymizedRow> rows);

struct ScoredPoint {
  LonLat position;
  double score = 0.0;
};

struct HexBin {
  int q = 0;
  int r = 0;
  LonLat center;
  double mean = 0.0;
  std::size_t count = 0;
};

struct HexLattice {
  double hex_w = 650.0;
  double hex_h = 600.0;
};

struct HexGrid {
  /// Frame origin and reference latitude: the points' mean position.
  LonLat origin;
  HexLattice lattice;
  /// Sorted by (r, q).
  std::vector<HexBin> bins;

  LocalFrame frame() const { return LocalFrame(origin); }
};

/// Pointy-top lattice with horizontal pitch hex_w and vertical pitch hex_h.
HexGrid hexbin_aggregate(std::span<const ScoredPoint> points, const HexLattice& lattice = {});
/// Axial (q, r) of the cell holding a point in the given frame.
std::pair<int, int> hex_cell(const LocalFrame& frame, LonLat p, const HexLattice& lattice);
LonLat hex_center(const LocalFrame& frame, int q, int r, const HexLattice& lattice);
/// FeatureCollection of hexagon polygons with mean/count properties.
nlohmann::json hexbins_geojson(const HexGrid& grid, std::optional<int> category = std::nullopt);

struct SummaryStats {
  std::size_t sessions_total = 0;
  std::size_t sessions_ge_50 = 0;
  std::size_t sessions_eq_100 = 0;
  std::optional<double> median_completion_minutes;
  std::optional<double> frac_completion_le_30min;
  std::optional<double> median_interval_seconds;
  std::optional<double> frac_intervals_le_10s;
  std::size_t ratings_total = 0;
  std::size_t images_rated = 0;
};

struct TimedRating {
  std::int64_t session_id = 0;
  std::int64_t image_id = 0;
  backend::Timestamp timestamp = 0;
};

/// Sessions are those with at least one rating. Medians take the lower
/// middle element.
SummaryStats summary_stats(std::span<const TimedRating> ratings);
std::vector<TimedRating> timed(std::span<const backend::RatingRecord> ratings);
std::vector<TimedRating> timed(std::span<const AnonymizedRow> rows);
nlohmann::json to_json(const SummaryStats& stats);

}  // namespace svkit
