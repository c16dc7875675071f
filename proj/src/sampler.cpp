#include "svkit/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace svkit {

namespace fs = std::filesystem;

namespace {

constexpr double kRelEps = 1e-9;

std::vector<double> axis(double lo, double hi, double extent_m, double spacing_m, double m_per_deg) {
  if (spacing_m >= extent_m * (1.0 - kRelEps)) return {0.5 * (lo + hi)};
  const auto steps = static_cast<std::size_t>(std::floor(extent_m / spacing_m + kRelEps));
  std::vector<double> out;
  out.reserve(steps + 1);
  const double step_deg = spacing_m / m_per_deg;
  for (std::size_t i = 0; i <= steps; ++i) out.push_back(std::min(hi, lo + static_cast<double>(i) * step_deg));
  return out;
}

// Unbiased integer in [0, bound) from a 64-bit engine.
std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v = 0;
  do {
    v = gen();
  } while (v >= limit);
  return v % bound;
}

}  // namespace

std::vector<LonLat> build_grid(const GridSpec& spec) {
  spec.bbox.validate();
  if (!(spec.spacing_m > 0)) throw GeoError("grid spacing must be positive");
  const LocalFrame frame(LonLat{spec.bbox.west, spec.bbox.south}, spec.bbox.mean_latitude());
  const double width_m = (spec.bbox.east - spec.bbox.west) * frame.meters_per_degree_lon();
  const double height_m = (spec.bbox.north - spec.bbox.south) * frame.meters_per_degree_lat();
  const auto lons = axis(spec.bbox.west, spec.bbox.east, width_m, spec.spacing_m, frame.meters_per_degree_lon());
  const auto lats = axis(spec.bbox.south, spec.bbox.north, height_m, spec.spacing_m, frame.meters_per_degree_lat());

  std::vector<LonLat> grid;
  grid.reserve(lons.size() * lats.size());
  for (double lat : lats) {
    for (double lon : lons) grid.push_back({lon, lat});
  }
  return grid;
}

std::vector<std::int64_t> assign_nearest(std::span<const PlacedImage> images, std::span<const LonLat> grid,
                                         double spacing_m) {
  if (images.empty() || grid.empty()) return {};
  if (!(spacing_m > 0)) throw GeoError("grid spacing must be positive");
  const double radius = spacing_m / std::sqrt(2.0);

  double lat_sum = 0.0;
  for (const auto& g : grid) lat_sum += g.lat;
  const LocalFrame frame(grid.front(), lat_sum / static_cast<double>(grid.size()));
  // Buckets a little wider than the radius, so the 3x3 neighbourhood covers it.
  const double cell = radius * 1.01;
  auto key = [cell](LocalFrame::Point p) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell));
    return std::pair{cx, cy};
  };
  auto pack = [](std::int64_t cx, std::int64_t cy) { return (cx << 32) ^ (cy & 0xffffffff); };

  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto [cx, cy] = key(frame.to_meters(images[i].position));
    buckets[pack(cx, cy)].push_back(i);
  }

  std::vector<std::int64_t> chosen;
  for (const auto& point : grid) {
    auto [cx, cy] = key(frame.to_meters(point));
    const PlacedImage* best = nullptr;
    double best_d = 0.0;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = buckets.find(pack(cx + dx, cy + dy));
        if (it == buckets.end()) continue;
        for (std::size_t i : it->second) {
          const auto& img = images[i];
          const double d = haversine_m(point, img.position);
          if (d > radius) continue;
          if (best == nullptr || d < best_d || (d == best_d && img.image_id < best->image_id)) {
            best = &img;
            best_d = d;
          }
        }
      }
    }
    if (best != nullptr) chosen.push_back(best->image_id);
  }
  std::sort(chosen.begin(), chosen.end());
  chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
  return chosen;
}

std::vector<std::int64_t> downsample(std::span<const std::int64_t> selected, std::size_t target,
                                     std::uint64_t seed) {
  std::vector<std::int64_t> pool(selected.begin(), selected.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (target >= pool.size()) return pool;

  std::mt19937_64 gen(seed);
  for (std::size_t i = 0; i < target; ++i) {
    const auto j = i + static_cast<std::size_t>(bounded(gen, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(target);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Manifest emit_manifest(std::span<const std::int64_t> final_ids, const std::map<std::int64_t, SourceImage>& metadata,
                       const ManifestOptions& options) {
  std::vector<std::int64_t> ids(final_ids.begin(), final_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<std::int64_t> missing;
  for (auto id : ids) {
    if (!metadata.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "no metadata for " << missing.size() << " image(s):";
    for (auto id : missing) msg << ' ' << id;
    throw ManifestError(msg.str(), std::move(missing));
  }

  Manifest manifest;
  manifest.seed = options.seed;
  manifest.records.reserve(ids.size());
  std::int64_t next_id = options.first_image_id;
  for (auto id : ids) {
    const auto& src = metadata.at(id);
    manifest.records.push_back({next_id++, id, options.url_prefix + src.file, options.cityname, src.position, false});
  }
  return manifest;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ManifestError("cannot write " + path.string());
  nlohmann::json header = {{"header", {{"format", "svkit-manifest"}, {"version", 1}, {"seed", manifest.seed},
                                       {"count", manifest.records.size()}}}};
  out << header.dump() << '\n';
  for (const auto& r : manifest.records) {
    nlohmann::json j = {{"image_id", r.image_id}, {"source_image_id", r.source_image_id}, {"url", r.url},
                        {"cityname", r.cityname}, {"lon", r.position.lon}, {"lat", r.position.lat},
                        {"enabled", r.enabled}};
    out << j.dump() << '\n';
  }
  if (!out) throw ManifestError("write to " + path.string() + " failed");
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot read " + path.string());
  Manifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("header")) {
        manifest.seed = j["header"].value("seed", std::uint64_t{0});
        continue;
      }
      ManifestRecord r;
      r.image_id = j.at("image_id").get<std::int64_t>();
      r.source_image_id = j.value("source_image_id", std::int64_t{0});
      r.url = j.at("url").get<std::string>();
      r.cityname = j.value("cityname", "");
      r.position = {j.at("lon").get<double>(), j.at("lat").get<double>()};
      r.enabled = j.value("enabled", false);
      manifest.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return manifest;
}

std::string enable_script(const Manifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    out += "UPDATE images SET enabled = TRUE WHERE image_id = " + std::to_string(r.image_id) + ";\n";
  }
  return out;
}

std::vector<std::int64_t> parse_enable_script(std::string_view script) {
  static const std::regex statement(R"(^\s*UPDATE\s+images\s+SET\s+enabled\s*=\s*TRUE\s+WHERE\s+image_id\s*=\s*(-?\d+)\s*;\s*$)",
                                    std::regex::icase);
  std::vector<std::int64_t> ids;
  std::istringstream in{std::string(script)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.rfind("--", 0) == 0) continue;
    std::smatch m;
    if (!std::regex_match(line, m, statement)) {
      throw ManifestError("enable script line " + std::to_string(line_no) + " is not an enable statement");
    }
    ids.push_back(std::stoll(m[1].str()));
  }
  return ids;
}

}  // namespace svkit
