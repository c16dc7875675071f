#include "svkit/export.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace svkit {
namespace {

using backend::Timestamp;

constexpr double kSqrt3 = 1.7320508075688772;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t key, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32), tag};
  return std::mt19937_64(seq);
}

bool is_alnum_ascii(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string number(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T lower_median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

}  // namespace

std::string redact_postcode(std::string_view postcode) {
  std::string out;
  std::size_t i = 0;
  bool first = true;
  while (i < postcode.size()) {
    const auto lead = static_cast<unsigned char>(postcode[i]);
    const std::size_t len = std::min(utf8_length(lead), postcode.size() - i);
    if (first) {
      out.append(postcode.substr(i, len));
      first = false;
    } else if (len > 1 || is_alnum_ascii(lead)) {
      out += '-';
    } else {
      out += static_cast<char>(lead);
    }
    i += len;
  }
  return out;
}

std::vector<AnonymizedRow> anonymize(std::span<const backend::RatingView> views, std::uint64_t seed,
                                     const PerturbationBounds& bounds) {
  struct SessionDraw {
    Timestamp offset;
    int age_delta;
  };
  std::map<std::int64_t, SessionDraw> draws;
  std::vector<AnonymizedRow> rows;
  rows.reserve(views.size());
  for (const auto& v : views) {
    const auto sid = v.rating.session_id;
    auto it = draws.find(sid);
    if (it == draws.end()) {
      auto rng = stream(seed, static_cast<std::uint64_t>(sid), 0);
      const Timestamp offset =
          std::uniform_int_distribution<Timestamp>(-bounds.session_offset_us, bounds.session_offset_us)(rng);
      const int age_delta = std::uniform_int_distribution<int>(-bounds.age_years, bounds.age_years)(rng);
      it = draws.emplace(sid, SessionDraw{offset, age_delta}).first;
    }
    auto jitter_rng = stream(seed, static_cast<std::uint64_t>(v.rating.id), 1);
    const Timestamp jitter =
        std::uniform_int_distribution<Timestamp>(-bounds.row_jitter_us, bounds.row_jitter_us)(jitter_rng);

    AnonymizedRow row;
    row.id = v.rating.id;
    row.timestamp = v.rating.timestamp + it->second.offset + jitter;
    row.sess = sid;
    row.image = v.rating.image_id;
    row.cat = v.rating.category_id;
    row.score = v.rating.score;
    if (v.participant.postcode) row.postcode = redact_postcode(*v.participant.postcode);
    row.country = v.participant.country;
    row.age = std::max(backend::kMinimumAge, v.participant.age + it->second.age_delta);
    row.mgi = v.participant.monthly_gross_income;
    row.education = v.participant.education;
    row.gender = v.participant.gender;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return rows;
}

std::string format_timestamp(Timestamp us) {
  Timestamp secs = us / 1'000'000;
  Timestamp frac = us % 1'000'000;
  if (frac < 0) {
    frac += 1'000'000;
    --secs;
  }
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char date[32];
  std::strftime(date, sizeof date, "%Y-%m-%d %H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%06lld", date, static_cast<long long>(frac));
  return out;
}

std::string to_csv(std::span<const AnonymizedRow> rows) {
  std::ostringstream out;
  out << "id,timestamp,sess,image,cat,score,postcode,country,age,mgi,education,gender\n";
  for (const auto& r : rows) {
    out << r.id << ',' << format_timestamp(r.timestamp) << ',' << r.sess << ',' << r.image << ',' << r.cat << ','
        << r.score << ',' << csv_field(r.postcode.value_or("")) << ',' << csv_field(r.country.value_or("")) << ','
        << r.age << ',' << (r.mgi ? number(*r.mgi) : "") << ','
        << (r.education ? std::string(backend::to_string(*r.education)) : "") << ','
        << csv_field(r.gender.value_or("")) << '\n';
  }
  return out.str();
}

std::pair<int, int> hex_cell(const LocalFrame& frame, LonLat p, const HexLattice& lattice) {
  const auto m = frame.to_meters(p);
  // Rescale so the lattice becomes a regular hexagon grid of size 1.
  const double x = m.x / lattice.hex_w * kSqrt3;
  const double y = m.y / lattice.hex_h * 1.5;
  const double fq = kSqrt3 / 3.0 * x - y / 3.0;
  const double fr = 2.0 / 3.0 * y;
  const double fs = -fq - fr;
  double q = std::round(fq);
  double r = std::round(fr);
  const double s = std::round(fs);
  const double dq = std::abs(q - fq);
  const double dr = std::abs(r - fr);
  const double ds = std::abs(s - fs);
  if (dq > dr && dq > ds) {
    q = -r - s;
  } else if (dr > ds) {
    r = -q - s;
  }
  return {static_cast<int>(q), static_cast<int>(r)};
}

LonLat hex_center(const LocalFrame& frame, int q, int r, const HexLattice& lattice) {
  const double x = kSqrt3 * (q + r / 2.0);
  const double y = 1.5 * r;
  return frame.to_lonlat({x / kSqrt3 * lattice.hex_w, y / 1.5 * lattice.hex_h});
}

HexGrid hexbin_aggregate(std::span<const ScoredPoint> points, const HexLattice& lattice) {
  if (!(lattice.hex_w > 0) || !(lattice.hex_h > 0)) throw std::invalid_argument("hex extents must be positive");
  HexGrid grid;
  grid.lattice = lattice;
  if (points.empty()) return grid;
  double lon = 0;
  double lat = 0;
  for (const auto& p : points) {
    lon += p.position.lon;
    lat += p.position.lat;
  }
  const auto n = static_cast<double>(points.size());
  grid.origin = {lon / n, lat / n};
  const LocalFrame frame = grid.frame();

  struct Acc {
    double sum = 0;
    std::size_t count = 0;
  };
  std::map<std::pair<int, int>, Acc> acc;  // keyed (r, q)
  for (const auto& p : points) {
    const auto [q, r] = hex_cell(frame, p.position, lattice);
    auto& a = acc[{r, q}];
    a.sum += p.score;
    ++a.count;
  }
  for (const auto& [key, a] : acc) {
    const auto [r, q] = key;
    grid.bins.push_back({q, r, hex_center(frame, q, r, lattice), a.sum / static_cast<double>(a.count), a.count});
  }
  return grid;
}

nlohmann::json hexbins_geojson(const HexGrid& grid, std::optional<int> category) {
  using nlohmann::json;
  const LocalFrame frame = grid.frame();
  json features = json::array();
  // Corner offsets of a pointy-top hexagon, scaled back to meters.
  const double half_w = grid.lattice.hex_w / 2.0;
  const double side_h = grid.lattice.hex_h / 3.0;
  const double corners[6][2] = {{0, 2 * side_h},  {half_w, side_h},  {half_w, -side_h},
                                {0, -2 * side_h}, {-half_w, -side_h}, {-half_w, side_h}};
  for (const auto& bin : grid.bins) {
    const auto c = frame.to_meters(bin.center);
    json ring = json::array();
    for (int i = 0; i <= 6; ++i) {
      const auto& d = corners[i % 6];
      const LonLat v = frame.to_lonlat({c.x + d[0], c.y + d[1]});
      ring.push_back({v.lon, v.lat});
    }
    json props = {{"q", bin.q}, {"r", bin.r}, {"mean", bin.mean}, {"count", bin.count}};
    if (category) props["category"] = *category;
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                        {"properties", props}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

SummaryStats summary_stats(std::span<const TimedRating> ratings) {
  SummaryStats s;
  s.ratings_total = ratings.size();
  std::map<std::int64_t, std::vector<Timestamp>> by_session;
  std::set<std::int64_t> images;
  for (const auto& r : ratings) {
    by_session[r.session_id].push_back(r.timestamp);
    images.insert(r.image_id);
  }
  s.images_rated = images.size();
  s.sessions_total = by_session.size();

  std::vector<Timestamp> completions;
  std::vector<Timestamp> intervals;
  for (auto& [sid, times] : by_session) {
    if (times.size() >= 50) ++s.sessions_ge_50;
    if (times.size() == 100) ++s.sessions_eq_100;
    if (times.size() < 2) continue;
    std::sort(times.begin(), times.end());
    completions.push_back(times.back() - times.front());
    for (std::size_t i = 1; i < times.size(); ++i) intervals.push_back(times[i] - times[i - 1]);
  }
  if (!completions.empty()) {
    s.median_completion_minutes = static_cast<double>(lower_median(completions)) / 60e6;
    const auto within = std::count_if(completions.begin(), completions.end(),
                                      [](Timestamp t) { return t <= 30LL * 60 * 1'000'000; });
    s.frac_completion_le_30min = static_cast<double>(within) / static_cast<double>(completions.size());
  }
  if (!intervals.empty()) {
    s.median_interval_seconds = static_cast<double>(lower_median(intervals)) / 1e6;
    const auto within =
        std::count_if(intervals.begin(), intervals.end(), [](Timestamp t) { return t <= 10LL * 1'000'000; });
    s.frac_intervals_le_10s = static_cast<double>(within) / static_cast<double>(intervals.size());
  }
  return s;
}

std::vector<TimedRating> timed(std::span<const backend::RatingRecord> ratings) {
  std::vector<TimedRating> out;
  out.reserve(ratings.size());
  for (const auto& r : ratings) out.push_back({r.session_id, r.image_id, r.timestamp});
  return out;
}

std::vector<TimedRating> timed(std::span<const AnonymizedRow> rows) {
  std::vector<TimedRating> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.sess, r.image, r.timestamp});
  return out;
}

nlohmann::json to_json(const SummaryStats& s) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"sessions_total", s.sessions_total},
          {"sessions_ge_50", s.sessions_ge_50},
          {"sessions_eq_100", s.sessions_eq_100},
          {"median_completion_minutes", opt(s.median_completion_minutes)},
          {"frac_completion_le_30min", opt(s.frac_completion_le_30min)},
          {"median_interval_seconds", opt(s.median_interval_seconds)},
          {"frac_intervals_le_10s", opt(s.frac_intervals_le_10s)},
          {"ratings_total", s.ratings_total},
          {"images_rated", s.images_rated}};
}

}  // namespace svkit
