#include "svkit/backend/manifest_loader.hpp"

#include <fstream>
#include <sstream>

namespace svkit::backend {

std::size_t load_manifest(SurveyStore& store, const Manifest& manifest) {
  for (const auto& r : manifest.records) {
    store.upsert_image({r.image_id, r.url, r.cityname, r.position, false});
  }
  return manifest.records.size();
}

std::size_t load_manifest(SurveyStore& store, const std::filesystem::path& path) {
  return load_manifest(store, read_manifest(path));
}

EnableReport apply_enable_script(SurveyStore& store, std::string_view script) {
  EnableReport report;
  for (std::int64_t id : parse_enable_script(script)) {
    if (store.set_image_enabled(id, true)) {
      ++report.enabled;
    } else {
      report.unknown.push_back(id);
    }
  }
  return report;
}

EnableReport apply_enable_script(SurveyStore& store, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return apply_enable_script(store, std::string_view(text.str()));
}

}  // namespace svkit::backend
