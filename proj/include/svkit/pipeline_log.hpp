#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "svkit/panorama.hpp"
#include "svkit/quality.hpp"
#include "svkit/sampler.hpp"
#include "svkit/tiles.hpp"

// Per-image JSON-lines records written by the `process` and `filter` steps and
// read back by `sample`.
namespace svkit {

struct LoggedImage {
  std::int64_t image_id = 0;
  /// Photo path relative to the imagery root.
  std::string path;
  int width = 0;
  int height = 0;
  /// From the tile cache, when known.
  std::optional<ImageMeta> meta;
};

nlohmann::json panorama_record(const LoggedImage& image, const PanoramaAnalysis& analysis);
nlohmann::json flat_record(const LoggedImage& image, const FlatImageResult& result,
                           const std::optional<std::string>& crop_file);

/// `<image_id>_c<center>_center.jpg` for the single crop of a flat photo.
std::string flat_crop_file_name(std::int64_t image_id, const CropWindow& window);

struct SurveyCandidate {
  std::int64_t source_image_id = 0;
  LonLat position;
  /// Survey-ready files (relative to the imagery root) derived from the photo.
  std::vector<std::string> files;
};

struct CandidateScan {
  std::vector<SurveyCandidate> candidates;
  std::size_t rejected = 0;
  std::size_t without_position = 0;
};

/// Accepted images from every `*.jsonl` file in `log_dir`.
CandidateScan read_candidates(const std::filesystem::path& log_dir);

/// Picks one survey file per candidate, reproducibly for a seed.
std::map<std::int64_t, SourceImage> choose_survey_files(const std::vector<SurveyCandidate>& candidates,
                                                        std::uint64_t seed);

}  // namespace svkit
