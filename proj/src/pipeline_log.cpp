#include "svkit/pipeline_log.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

namespace svkit {

namespace fs = std::filesystem;

namespace {

template <typename T>
nlohmann::json summary(const std::vector<T>& v) {
  if (v.empty()) return {{"min", 0}, {"max", 0}, {"mean", 0.0}};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return {{"min", *lo}, {"max", *hi}, {"mean", mean}};
}

nlohmann::json base_record(const char* kind, const LoggedImage& image) {
  nlohmann::json j = {{"kind", kind},          {"image_id", image.image_id}, {"path", image.path},
                      {"width", image.width},  {"height", image.height}};
  if (image.meta) {
    j["sequence_id"] = image.meta->sequence_id;
    j["lon"] = image.meta->position.lon;
    j["lat"] = image.meta->position.lat;
    j["compass_angle"] = image.meta->compass_angle;
    j["captured_at"] = image.meta->captured_at;
    j["is_pano"] = image.meta->is_pano;
  }
  return j;
}

nlohmann::json window_json(const CropWindow& w) {
  return {{"x0", w.x0}, {"y0", w.y0}, {"width", w.width}, {"height", w.height}};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

nlohmann::json panorama_record(const LoggedImage& image, const PanoramaAnalysis& analysis) {
  auto j = base_record("panorama", image);
  j["k"] = analysis.scores.k;
  j["scores"] = {{"B", summary(analysis.scores.reach)},
                 {"C", summary(analysis.scores.support)},
                 {"R", summary(analysis.scores.score)}};
  auto centers = nlohmann::json::array();
  for (const auto& c : analysis.centers.centers) centers.push_back({{"x", c.x}, {"score", c.score}});
  j["centers"] = std::move(centers);

  const fs::path dir = fs::path(image.path).parent_path();
  auto crops = nlohmann::json::array();
  for (const auto& spec : analysis.crops) {
    auto cj = window_json(spec.window);
    cj["center_x"] = spec.center_x;
    cj["offset"] = std::string(to_string(spec.offset));
    cj["view_x"] = spec.view_x;
    cj["file"] = (dir / crop_file_name(spec)).generic_string();
    crops.push_back(std::move(cj));
  }
  j["crops"] = std::move(crops);
  j["accepted"] = !analysis.centers.empty();
  return j;
}

std::string flat_crop_file_name(std::int64_t image_id, const CropWindow& window) {
  return std::to_string(image_id) + "_c" + std::to_string(window.x0 + window.width / 2) + "_center.jpg";
}

nlohmann::json flat_record(const LoggedImage& image, const FlatImageResult& result,
                           const std::optional<std::string>& crop_file) {
  auto j = base_record("flat", image);
  const auto& rep = result.report;
  j["contrast"] = rep.contrast;
  j["tonemap"] = rep.tonemap;
  j["road_check"] = rep.road_check;
  j["passed"] = rep.passed;
  j["reject_reason"] = rep.reason ? nlohmann::json(std::string(to_string(*rep.reason))) : nlohmann::json(nullptr);
  if (result.crop) {
    auto cj = window_json(*result.crop);
    if (crop_file) cj["file"] = *crop_file;
    j["crop"] = std::move(cj);
  }
  j["accepted"] = rep.passed;
  return j;
}

CandidateScan read_candidates(const fs::path& log_dir) {
  CandidateScan scan;
  std::vector<fs::path> logs;
  for (const auto& entry : fs::directory_iterator(log_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());

  std::map<std::int64_t, SurveyCandidate> by_id;
  for (const auto& log : logs) {
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        spdlog::warn("{}: unreadable record: {}", log.string(), e.what());
        continue;
      }
      if (!j.value("accepted", false)) {
        ++scan.rejected;
        continue;
      }
      if (!j.contains("lon") || !j.contains("lat")) {
        ++scan.without_position;
        continue;
      }
      SurveyCandidate cand;
      cand.source_image_id = j.at("image_id").get<std::int64_t>();
      cand.position = {j["lon"].get<double>(), j["lat"].get<double>()};
      if (j.value("kind", "") == "panorama") {
        for (const auto& c : j.value("crops", nlohmann::json::array())) {
          if (c.contains("file")) cand.files.push_back(c["file"].get<std::string>());
        }
      } else if (j.contains("crop") && j["crop"].contains("file")) {
        cand.files.push_back(j["crop"]["file"].get<std::string>());
      }
      if (cand.files.empty()) {
        ++scan.rejected;
        continue;
      }
      by_id.insert_or_assign(cand.source_image_id, std::move(cand));
    }
  }
  for (auto& [id, cand] : by_id) scan.candidates.push_back(std::move(cand));
  return scan;
}

std::map<std::int64_t, SourceImage> choose_survey_files(const std::vector<SurveyCandidate>& candidates,
                                                        std::uint64_t seed) {
  std::map<std::int64_t, SourceImage> out;
  for (const auto& cand : candidates) {
    if (cand.files.empty()) continue;
    const auto pick = splitmix64(seed ^ static_cast<std::uint64_t>(cand.source_image_id)) % cand.files.size();
    out[cand.source_image_id] = {cand.position, cand.files[pick]};
  }
  return out;
}

}  // namespace svkit
