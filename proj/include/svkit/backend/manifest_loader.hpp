#pragma once

#include <filesystem>
#include <string_view>

#include "svkit/backend/store.hpp"
#include "svkit/sampler.hpp"

namespace svkit::backend {

struct EnableReport {
  std::size_t enabled = 0;
  /// Ids named by the script that the store does not know.
  std::vector<std::int64_t> unknown;
};

/// Inserts every record disabled, regardless of the record's flag. Returns
/// the number of images written.
std::size_t load_manifest(SurveyStore& store, const Manifest& manifest);
std::size_t load_manifest(SurveyStore& store, const std::filesystem::path& path);

EnableReport apply_enable_script(SurveyStore& store, std::string_view script);
EnableReport apply_enable_script(SurveyStore& store, const std::filesystem::path& path);

}  // namespace svkit::backend
