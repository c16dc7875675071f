#include <algorithm>
#include <atomic>
#include <charconv>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "svkit/backend/http_api.hpp"
#include "svkit/backend/manifest_loader.hpp"
#include "svkit/export.hpp"
#include "svkit/http_fetch.hpp"
#include "svkit/ingest.hpp"
#include "svkit/ingest_ledger.hpp"
#include "svkit/pipeline_log.hpp"

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void run_command(const std::string& command) {
  spdlog::debug("running: {}", command);
  const int rc = std::system(command.c_str());
  if (rc != 0) throw std::runtime_error("command failed (" + std::to_string(rc) + "): " + command);
}

/// Photos under `root`, skipping sidecars, tile cache and our own crops.
std::vector<fs::path> list_photos(const fs::path& root) {
  static const std::regex crop_name(R"(\d+_c\d+_(left|center|right)\.jpg)");
  std::vector<fs::path> out;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (it->is_directory() && it->path().filename() == "tiles") {
      it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file()) continue;
    const auto name = it->path().filename().string();
    auto ext = it->path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".jpg" && ext != ".jpeg" && ext != ".png") continue;
    if (name.ends_with(".labels.png") || std::regex_match(name, crop_name)) continue;
    out.push_back(it->path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::int64_t> photo_id(const fs::path& photo) {
  const auto stem = photo.stem().string();
  std::int64_t id = 0;
  auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), id);
  if (ec != std::errc{} || ptr != stem.data() + stem.size()) return std::nullopt;
  return id;
}

bool is_panorama(const std::optional<svkit::ImageMeta>& meta, int width, int height) {
  if (meta) return meta->is_pano;
  return width == 2 * height;
}

svkit::LabelMatrix load_or_segment(const fs::path& photo, const fs::path& sidecar, const svkit::LabelMap& labels,
                                   const std::string& segmenter, int width, int height) {
  if (!fs::exists(sidecar)) {
    if (segmenter.empty()) throw std::runtime_error("no label sidecar " + sidecar.string());
    fs::create_directories(sidecar.parent_path());
    run_command(svkit::expand_template(segmenter, {{"image", shell_quote(photo.string())},
                                                   {"out", shell_quote(sidecar.string())}}));
  }
  return svkit::load_label_matrix(sidecar, labels, std::pair{width, height});
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path) {
    if (path.empty()) return;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open log " + path);
  }
  void write(const nlohmann::json& j) {
    if (out_.is_open()) {
      out_ << j.dump() << '\n';
      out_.flush();
    } else {
      std::cout << j.dump() << '\n';
    }
  }

 private:
  std::ofstream out_;
};

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string bbox;
  int zoom = 14;
  std::string out;
  std::string api_key;
  std::string retry_file;
  std::string only_ids;
  std::string tile_url = "https://tiles.mapillary.com/maps/vtp/mly1_public/2/{z}/{x}/{y}?access_token={key}";
  std::string lookup_url = "https://graph.mapillary.com/{id}?fields=thumb_original_url&access_token={key}";
  std::string url_field = "thumb_original_url";
  std::string tile_adapter;
  int workers = 4;
  double rps = 10.0;
  int max_attempts = 6;
  long base_delay_ms = 1000;
};

int cmd_ingest(const IngestArgs& a) {
  svkit::IngestConfig cfg;
  cfg.out_dir = a.out;
  cfg.zoom = a.zoom;
  cfg.endpoints.tile_url = a.tile_url;
  cfg.endpoints.image_lookup_url = a.lookup_url;
  cfg.endpoints.image_url_field = a.url_field;
  cfg.endpoints.api_key = a.api_key;
  if (cfg.endpoints.api_key.empty()) {
    if (const char* env = std::getenv("SVKIT_API_KEY")) cfg.endpoints.api_key = env;
  }
  cfg.policy.max_attempts = a.max_attempts;
  cfg.policy.base_delay = svkit::Millis(a.base_delay_ms);
  cfg.workers = a.workers;
  cfg.requests_per_second = a.rps;
  for (const auto* list : {&a.retry_file, &a.only_ids}) {
    if (list->empty()) continue;
    if (!cfg.only_ids) cfg.only_ids.emplace();
    for (auto id : svkit::read_id_list(*list)) cfg.only_ids->insert(id);
  }
  if (!a.tile_adapter.empty()) {
    const std::string command = a.tile_adapter;
    const fs::path scratch = fs::path(a.out) / "tiles" / ".adapter";
    cfg.tile_adapter = [command, scratch](const std::string& raw, const svkit::TileCoord& t) {
      fs::create_directories(scratch);
      const auto stem = std::to_string(t.z) + "_" + std::to_string(t.x) + "_" + std::to_string(t.y);
      const fs::path in = scratch / (stem + ".raw");
      const fs::path out = scratch / (stem + ".json");
      write_file(in, raw);
      run_command(svkit::expand_template(command, {{"in", shell_quote(in.string())},
                                                   {"out", shell_quote(out.string())},
                                                   {"z", std::to_string(t.z)},
                                                   {"x", std::to_string(t.x)},
                                                   {"y", std::to_string(t.y)}}));
      auto json = read_file(out);
      fs::remove(in);
      fs::remove(out);
      return json;
    };
  }
  cfg.on_result = [](const svkit::ImageMeta& meta, const svkit::DownloadResult& r) {
    if (r.status == svkit::DownloadResult::Status::Failed) {
      spdlog::warn("image {} failed after {} attempts: {}", meta.image_id, r.attempts, r.last_error);
    }
  };

  const auto bbox = svkit::BoundingBox::parse(a.bbox);
  std::stop_source stop;
  std::jthread watcher([&stop](std::stop_token st) {
    while (!st.stop_requested()) {
      if (g_interrupted) {
        spdlog::warn("interrupted; finishing in-flight downloads");
        stop.request_stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  });
  svkit::CurlFetcher fetcher;
  const auto report = svkit::run_ingest(bbox, cfg, fetcher, stop.get_token());
  watcher.request_stop();
  spdlog::info("tiles {} ({} cached, {} failed), images {}: {} downloaded, {} present, {} failed", report.tiles,
               report.tiles_from_cache, report.tiles_failed, report.images_found, report.downloaded, report.skipped,
               report.failed);
  if (report.interrupted) return 130;
  return report.failed > 0 || report.tiles_failed > 0 ? 2 : 0;
}

// ---------------------------------------------------------------- process

struct ProcessArgs {
  std::string images;
  double k = 0.125;
  bool emit_crops = false;
  std::string log;
  std::string label_map;
  std::string meta;
  std::string segmenter;
};

int cmd_process(const ProcessArgs& a) {
  const fs::path root = a.images;
  const auto labels = a.label_map.empty() ? svkit::LabelMap::cityscapes() : svkit::LabelMap::load(a.label_map);
  const auto metadata = svkit::scan_tile_cache(a.meta.empty() ? root : fs::path(a.meta));
  JsonlWriter log(a.log);
  std::size_t done = 0;
  std::size_t errors = 0;
  for (const auto& photo : list_photos(root)) {
    const auto id = photo_id(photo);
    if (!id) continue;
    try {
      const auto image = svkit::read_image(photo);
      std::optional<svkit::ImageMeta> meta;
      if (auto it = metadata.find(*id); it != metadata.end()) meta = it->second;
      if (!is_panorama(meta, image.width(), image.height())) continue;
      const auto matrix = load_or_segment(photo, svkit::label_sidecar_path(photo), labels, a.segmenter,
                                          image.width(), image.height());
      const auto analysis = svkit::analyze_panorama(svkit::road_mask(matrix), *id, a.k);
      const svkit::LoggedImage logged{*id, fs::relative(photo, root).generic_string(), image.width(),
                                      image.height(), meta};
      if (a.emit_crops) {
        for (const auto& spec : analysis.crops) {
          svkit::write_image(photo.parent_path() / svkit::crop_file_name(spec), svkit::apply_crop(image, spec));
        }
      }
      log.write(svkit::panorama_record(logged, analysis));
      ++done;
    } catch (const std::exception& e) {
      ++errors;
      spdlog::error("{}: {}", photo.string(), e.what());
    }
  }
  spdlog::info("processed {} panoramas, {} errors", done, errors);
  return errors > 0 ? 2 : 0;
}

// ---------------------------------------------------------------- filter

struct FilterArgs {
  std::string images;
  std::string masks;
  svkit::QualityThresholds th;
  bool no_road_check = false;
  std::string log;
  std::string label_map;
  std::string meta;
  std::string segmenter;
};

int cmd_filter(const FilterArgs& a) {
  a.th.validate();
  const fs::path root = a.images;
  const fs::path masks = a.masks.empty() ? root : fs::path(a.masks);
  const auto labels = a.label_map.empty() ? svkit::LabelMap::cityscapes() : svkit::LabelMap::load(a.label_map);
  const auto metadata = svkit::scan_tile_cache(a.meta.empty() ? root : fs::path(a.meta));
  JsonlWriter log(a.log);
  std::size_t passed = 0;
  std::size_t rejected = 0;
  std::size_t errors = 0;
  for (const auto& photo : list_photos(root)) {
    const auto id = photo_id(photo);
    if (!id) continue;
    try {
      const auto image = svkit::read_image(photo);
      std::optional<svkit::ImageMeta> meta;
      if (auto it = metadata.find(*id); it != metadata.end()) meta = it->second;
      if (is_panorama(meta, image.width(), image.height())) continue;
      const auto rel = fs::relative(photo, root);
      const auto sidecar = svkit::label_sidecar_path(masks / rel);
      const auto matrix = load_or_segment(photo, sidecar, labels, a.segmenter, image.width(), image.height());
      const auto result = svkit::evaluate_image(image, svkit::road_mask(matrix), a.th, !a.no_road_check);
      std::optional<std::string> crop_file;
      if (result.crop) {
        const auto name = svkit::flat_crop_file_name(*id, *result.crop);
        svkit::write_image(photo.parent_path() / name, svkit::apply_crop(image, *result.crop));
        crop_file = (rel.parent_path() / name).generic_string();
      }
      log.write(svkit::flat_record({*id, rel.generic_string(), image.width(), image.height(), meta}, result,
                                   crop_file));
      result.report.passed ? ++passed : ++rejected;
    } catch (const std::exception& e) {
      ++errors;
      spdlog::error("{}: {}", photo.string(), e.what());
    }
  }
  spdlog::info("filter: {} passed, {} rejected, {} errors", passed, rejected, errors);
  return errors > 0 ? 2 : 0;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string bbox;
  double spacing = 20.0;
  std::size_t target = 20000;
  std::uint64_t seed = 0;
  std::string log;
  std::string out = "manifest.jsonl";
  std::string enable_script = "enable.sql";
  std::string city = "Amsterdam";
  std::string url_prefix;
};

int cmd_sample(const SampleArgs& a) {
  const auto bbox = svkit::BoundingBox::parse(a.bbox);
  const auto scan = svkit::read_candidates(a.log);
  std::vector<svkit::PlacedImage> placed;
  std::vector<svkit::SurveyCandidate> inside;
  for (const auto& c : scan.candidates) {
    if (!bbox.contains(c.position)) continue;
    placed.push_back({c.source_image_id, c.position});
    inside.push_back(c);
  }
  const auto grid = svkit::build_grid({bbox, a.spacing});
  const auto selected = svkit::assign_nearest(placed, grid, a.spacing);
  const auto final_ids = svkit::downsample(selected, a.target, a.seed);
  const auto files = svkit::choose_survey_files(inside, a.seed);
  const auto manifest = svkit::emit_manifest(final_ids, files, {a.city, a.url_prefix, 1, a.seed});
  svkit::write_manifest(a.out, manifest);
  write_file(a.enable_script, svkit::enable_script(manifest));
  spdlog::info("{} accepted ({} rejected, {} without position), {} inside bbox, {} grid points, {} selected, {} in "
               "manifest",
               scan.candidates.size(), scan.rejected, scan.without_position, placed.size(), grid.size(),
               selected.size(), manifest.records.size());
  return 0;
}

// ---------------------------------------------------------------- backend

void load_into(svkit::backend::SurveyStore& store, const std::string& manifest, const std::string& script) {
  if (!manifest.empty()) {
    spdlog::info("loaded {} images from {}", svkit::backend::load_manifest(store, fs::path(manifest)), manifest);
  }
  if (!script.empty()) {
    const auto report = svkit::backend::apply_enable_script(store, fs::path(script));
    spdlog::info("enabled {} images", report.enabled);
    if (!report.unknown.empty()) spdlog::warn("{} ids in {} are not in the store", report.unknown.size(), script);
  }
}

struct ServeArgs {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string store = "memory";
  std::vector<std::string> cors;
  std::string manifest;
  std::string enable_script;
  int threads = 16;
};

int cmd_serve(const ServeArgs& a) {
  auto store = svkit::backend::open_store(a.store);
  load_into(*store, a.manifest, a.enable_script);
  svkit::backend::SurveyService service(*store);
  svkit::backend::ApiServer server(service, {a.bind, a.port, a.cors, a.threads});
  const int port = server.start();
  spdlog::info("listening on {}:{}", a.bind, port);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  spdlog::info("shutting down");
  server.stop();
  return 0;
}

struct ExportArgs {
  std::string store;
  std::uint64_t seed = 0;
  std::string anonymized;
  std::string hexbin;
  int category = 1;
  std::string stats;
  double hex_w = 650.0;
  double hex_h = 600.0;
};

int cmd_export(const ExportArgs& a) {
  auto store = svkit::backend::open_store(a.store);
  const auto views = store->rating_views();
  if (!a.anonymized.empty()) {
    write_file(a.anonymized, svkit::to_csv(svkit::anonymize(views, a.seed)));
    spdlog::info("wrote {} anonymized rows to {}", views.size(), a.anonymized);
  }
  if (!a.hexbin.empty()) {
    std::vector<svkit::ScoredPoint> points;
    for (const auto& v : views) {
      if (v.rating.category_id == a.category) points.push_back({v.position, static_cast<double>(v.rating.score)});
    }
    const auto grid = svkit::hexbin_aggregate(points, {a.hex_w, a.hex_h});
    write_file(a.hexbin, svkit::hexbins_geojson(grid, a.category).dump(1) + "\n");
    spdlog::info("wrote {} bins ({} points, category {}) to {}", grid.bins.size(), points.size(), a.category,
                 a.hexbin);
  }
  if (!a.stats.empty()) {
    const auto ratings = store->ratings();
    write_file(a.stats, svkit::to_json(svkit::summary_stats(svkit::timed(ratings))).dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Street-view perception survey toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  IngestArgs ingest;
  auto* ing = app.add_subcommand("ingest", "Download photos inside a bounding box");
  ing->add_option("--bbox", ingest.bbox, "W,S,E,N")->required();
  ing->add_option("--zoom", ingest.zoom, "Tile zoom level")->capture_default_str();
  ing->add_option("--out", ingest.out, "Output directory")->required();
  ing->add_option("--api-key", ingest.api_key, "API key (falls back to SVKIT_API_KEY)");
  ing->add_option("--retry-file", ingest.retry_file, "Retry only the ids listed in this file");
  ing->add_option("--only-ids", ingest.only_ids, "Restrict to ids listed in this file");
  ing->add_option("--tile-url", ingest.tile_url, "Tile URL template ({z} {x} {y} {key})")->capture_default_str();
  ing->add_option("--lookup-url", ingest.lookup_url, "Image lookup template ({id} {key})")->capture_default_str();
  ing->add_option("--url-field", ingest.url_field, "Lookup field holding the photo URL")->capture_default_str();
  ing->add_option("--tile-adapter", ingest.tile_adapter, "Command turning a raw tile ({in}) into GeoJSON ({out})");
  ing->add_option("--workers", ingest.workers)->capture_default_str()->check(CLI::PositiveNumber);
  ing->add_option("--rps", ingest.rps, "Request starts per second, <= 0 for unlimited")->capture_default_str();
  ing->add_option("--max-attempts", ingest.max_attempts)->capture_default_str()->check(CLI::PositiveNumber);
  ing->add_option("--base-delay-ms", ingest.base_delay_ms)->capture_default_str();

  ProcessArgs process;
  auto* proc = app.add_subcommand("process", "Find road center lines in panoramas and plan crops");
  proc->add_option("--images", process.images)->required()->check(CLI::ExistingDirectory);
  proc->add_option("--k", process.k, "Weight of the lower-half road count")->capture_default_str();
  proc->add_flag("--emit-crops", process.emit_crops, "Write crop files next to each panorama");
  proc->add_option("--log", process.log, "JSON-lines log (stdout when omitted)");
  proc->add_option("--label-map", process.label_map, "id<TAB>name file (default: Cityscapes)");
  proc->add_option("--meta", process.meta, "Root holding tiles/ (default: --images)");
  proc->add_option("--segmenter", process.segmenter, "Command writing a sidecar: {image} {out}");

  FilterArgs filter;
  auto* filt = app.add_subcommand("filter", "Quality-filter flat photos and crop them to 4:3");
  filt->add_option("--images", filter.images)->required()->check(CLI::ExistingDirectory);
  filt->add_option("--masks", filter.masks, "Sidecar root mirroring --images (default: --images)");
  filt->add_option("--c-min", filter.th.contrast_min)->capture_default_str();
  filt->add_option("--t-min", filter.th.tone_min)->capture_default_str();
  filt->add_option("--t-floor", filter.th.tone_floor)->capture_default_str();
  filt->add_flag("--no-road-check", filter.no_road_check, "Accept photos without a visible road");
  filt->add_option("--log", filter.log, "JSON-lines log")->required();
  filt->add_option("--label-map", filter.label_map);
  filt->add_option("--meta", filter.meta, "Root holding tiles/ (default: --images)");
  filt->add_option("--segmenter", filter.segmenter, "Command writing a sidecar: {image} {out}");

  SampleArgs sample;
  auto* samp = app.add_subcommand("sample", "Thin accepted photos to a grid and emit a manifest");
  samp->add_option("--bbox", sample.bbox)->required();
  samp->add_option("--spacing", sample.spacing, "Grid spacing, meters")->capture_default_str();
  samp->add_option("--target", sample.target)->capture_default_str();
  samp->add_option("--seed", sample.seed)->required();
  samp->add_option("--log", sample.log, "Directory of process/filter logs")->required()->check(CLI::ExistingDirectory);
  samp->add_option("--out", sample.out)->capture_default_str();
  samp->add_option("--enable-script", sample.enable_script)->capture_default_str();
  samp->add_option("--city", sample.city)->capture_default_str();
  samp->add_option("--url-prefix", sample.url_prefix, "Prepended to each survey file path");

  ServeArgs serve;
  auto* srv = app.add_subcommand("serve", "Run the survey API");
  srv->add_option("--bind", serve.bind)->capture_default_str();
  srv->add_option("--port", serve.port)->capture_default_str();
  srv->add_option("--store", serve.store, "memory, sqlite:PATH or PATH")->capture_default_str();
  srv->add_option("--cors", serve.cors, "Allowed origin (repeatable, * for any)");
  srv->add_option("--manifest", serve.manifest);
  srv->add_option("--enable-script", serve.enable_script);
  srv->add_option("--threads", serve.threads)->capture_default_str()->check(CLI::PositiveNumber);

  std::string lm_store;
  std::string lm_manifest;
  std::string lm_script;
  auto* lm = app.add_subcommand("load-manifest", "Insert a manifest (disabled) and optionally enable it");
  lm->add_option("--store", lm_store)->required();
  lm->add_option("--manifest", lm_manifest)->required();
  lm->add_option("--enable-script", lm_script);

  ExportArgs exp;
  auto* ex = app.add_subcommand("export", "Anonymized ratings, hex-bin aggregate and summary statistics");
  ex->add_option("--store", exp.store)->required();
  ex->add_option("--seed", exp.seed)->required();
  ex->add_option("--anonymized", exp.anonymized, "CSV output");
  ex->add_option("--hexbin", exp.hexbin, "GeoJSON output");
  ex->add_option("--category", exp.category)->capture_default_str()->check(CLI::Range(1, 5));
  ex->add_option("--stats", exp.stats, "JSON output");
  ex->add_option("--hex-w", exp.hex_w)->capture_default_str();
  ex->add_option("--hex-h", exp.hex_h)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*ing) return cmd_ingest(ingest);
    if (*proc) return cmd_process(process);
    if (*filt) return cmd_filter(filter);
    if (*samp) return cmd_sample(sample);
    if (*srv) return cmd_serve(serve);
    if (*lm) {
      auto store = svkit::backend::open_store(lm_store);
      load_into(*store, lm_manifest, lm_script);
      return 0;
    }
    if (*ex) return cmd_export(exp);
  } catch (const svkit::ManifestError& e) {
    spdlog::error("{}", e.what());
    for (auto id : e.ids()) std::cerr << id << '\n';
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
