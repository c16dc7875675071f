#include "svkit/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace svkit {

namespace fs = std::filesystem;

Millis RetryPolicy::delay_after(int failed_attempts) const {
  const double scale = std::pow(multiplier, std::max(0, failed_attempts - 1));
  const double ms = static_cast<double>(base_delay.count()) * scale;
  if (!std::isfinite(ms) || ms >= static_cast<double>(max_delay.count())) return max_delay;
  return Millis(static_cast<Millis::rep>(ms));
}

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw IngestError(IngestError::Kind::Config, "max retries must be >= 1");
  if (base_delay.count() < 0 || max_delay < base_delay) {
    throw IngestError(IngestError::Kind::Config, "back-off delays must satisfy 0 <= base <= max");
  }
  if (multiplier < 1.0) throw IngestError(IngestError::Kind::Config, "back-off multiplier must be >= 1");
}

std::string expand_template(std::string text, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
      text.replace(pos, token.size(), value);
    }
  }
  return text;
}

void sleep_for(Millis delay) { std::this_thread::sleep_for(delay); }

fs::path image_path(const fs::path& root, const ImageMeta& meta) {
  return root / meta.sequence_id / (std::to_string(meta.image_id) + ".jpg");
}

fs::path tile_cache_path(const fs::path& root, const TileCoord& tile) {
  return root / "tiles" / std::to_string(tile.z) / std::to_string(tile.x) /
         (std::to_string(tile.y) + ".json");
}

namespace {

bool credential_rejected(const HttpResponse& r) { return r.status == 401 || r.status == 403; }

std::string describe(const HttpResponse& r) {
  if (r.status == 0) return r.error.empty() ? "transfer failed" : r.error;
  return "HTTP " + std::to_string(r.status);
}

HttpResponse paced_get(const DownloadContext& ctx, const std::string& url) {
  if (ctx.pacer != nullptr) ctx.pacer->acquire();
  auto response = ctx.fetcher.get(url);
  if (credential_rejected(response)) {
    throw IngestError(IngestError::Kind::Credential, "credential rejected (" + describe(response) + ") for " + url);
  }
  return response;
}

void write_file_atomically(const fs::path& target, std::string_view bytes) {
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw IngestError(IngestError::Kind::Disk, "cannot create " + target.parent_path().string() + ": " + ec.message());
  const fs::path partial = target.string() + ".part";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(partial, ec);
      throw IngestError(IngestError::Kind::Disk, "write to " + partial.string() + " failed");
    }
  }
  fs::rename(partial, target, ec);
  if (ec) throw IngestError(IngestError::Kind::Disk, "rename to " + target.string() + " failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// One full lookup + fetch. Returns the photo bytes or an error message.
std::optional<std::string> attempt_image(const ImageMeta& meta, const DownloadContext& ctx,
                                         std::string& error) {
  const auto& ep = ctx.endpoints;
  const auto lookup_url =
      expand_template(ep.image_lookup_url, {{"id", std::to_string(meta.image_id)}, {"key", ep.api_key}});
  auto lookup = paced_get(ctx, lookup_url);
  if (!lookup.ok()) {
    error = "lookup: " + describe(lookup);
    return std::nullopt;
  }
  std::string photo_url;
  try {
    const auto doc = nlohmann::json::parse(lookup.body);
    photo_url = doc.at(ep.image_url_field).get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    error = std::string("lookup response: ") + e.what();
    return std::nullopt;
  }
  auto photo = paced_get(ctx, photo_url);
  if (!photo.ok()) {
    error = "photo: " + describe(photo);
    return std::nullopt;
  }
  if (photo.body.empty()) {
    error = "photo: empty body";
    return std::nullopt;
  }
  return std::move(photo.body);
}

}  // namespace

DownloadResult download_image(const ImageMeta& meta, const fs::path& dest_root, const RetryPolicy& policy,
                              IngestLedger& ledger, const DownloadContext& ctx) {
  DownloadResult result;
  result.path = image_path(dest_root, meta);

  std::error_code ec;
  if (fs::is_regular_file(result.path, ec)) {
    ledger.mark_downloaded(meta.image_id);
    result.status = DownloadResult::Status::AlreadyPresent;
    return result;
  }

  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    result.attempts = attempt;
    auto bytes = attempt_image(meta, ctx, result.last_error);
    if (bytes) {
      write_file_atomically(result.path, *bytes);
      ledger.mark_downloaded(meta.image_id);
      result.status = DownloadResult::Status::Saved;
      return result;
    }
    if (attempt < policy.max_attempts) {
      const auto delay = policy.delay_after(attempt);
      result.delays.push_back(delay);
      ctx.sleep(delay);
    }
  }
  spdlog::debug("image {} failed after {} attempts: {}", meta.image_id, result.attempts, result.last_error);
  ledger.mark_failed(meta.image_id);
  result.status = DownloadResult::Status::Failed;
  return result;
}

namespace {

// Returns the tile payload (already adapted), or nullopt after exhausting
// retries.
std::optional<std::string> load_tile(const TileCoord& tile, const IngestConfig& config, IngestLedger& ledger,
                                     const DownloadContext& ctx, IngestReport& report) {
  const fs::path cached = tile_cache_path(config.out_dir, tile);
  std::error_code ec;
  if (fs::is_regular_file(cached, ec)) {
    ++report.tiles_from_cache;
    ledger.record_tile(tile, fs::relative(cached, config.out_dir));
    return read_file(cached);
  }

  const auto url = expand_template(config.endpoints.tile_url,
                                   {{"z", std::to_string(tile.z)},
                                    {"x", std::to_string(tile.x)},
                                    {"y", std::to_string(tile.y)},
                                    {"key", config.endpoints.api_key}});
  for (int attempt = 1; attempt <= config.policy.max_attempts; ++attempt) {
    auto response = paced_get(ctx, url);
    if (response.ok()) {
      std::string payload = config.tile_adapter ? config.tile_adapter(response.body, tile) : std::move(response.body);
      write_file_atomically(cached, payload);
      ledger.record_tile(tile, fs::relative(cached, config.out_dir));
      return payload;
    }
    spdlog::debug("tile {} attempt {}: {}", tile.to_string(), attempt, describe(response));
    if (attempt < config.policy.max_attempts) ctx.sleep(config.policy.delay_after(attempt));
  }
  ++report.tiles_failed;
  spdlog::warn("tile {} failed after {} attempts", tile.to_string(), config.policy.max_attempts);
  return std::nullopt;
}

}  // namespace

IngestReport run_ingest(const BoundingBox& bbox, const IngestConfig& config, HttpFetcher& fetcher,
                        std::stop_token stop) {
  if (config.endpoints.api_key.empty()) {
    throw IngestError(IngestError::Kind::Config, "no API key configured");
  }
  if (config.workers < 1) throw IngestError(IngestError::Kind::Config, "workers must be >= 1");
  config.policy.validate();

  IngestLedger ledger(config.out_dir);
  RequestPacer pacer(config.requests_per_second);
  DownloadContext ctx{fetcher, config.endpoints, config.sleep ? config.sleep : Sleeper(sleep_for), &pacer};

  IngestReport report;
  const auto tiles = enumerate_tiles(bbox, config.zoom);
  report.tiles = tiles.size();

  std::map<std::int64_t, ImageMeta> found;
  for (const auto& tile : tiles) {
    if (stop.stop_requested()) break;
    auto payload = load_tile(tile, config, ledger, ctx, report);
    if (!payload) continue;
    auto parsed = parse_tile_features(*payload, bbox, tile);
    report.features_skipped += parsed.skipped;
    for (auto& meta : parsed.images) found.try_emplace(meta.image_id, std::move(meta));
  }

  std::vector<ImageMeta> work;
  work.reserve(found.size());
  for (auto& [id, meta] : found) {
    if (!config.only_ids || config.only_ids->contains(id)) work.push_back(std::move(meta));
  }
  report.images_found = work.size();
  spdlog::info("{} tiles ({} cached, {} failed), {} eligible images", report.tiles, report.tiles_from_cache,
               report.tiles_failed, work.size());

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> saved{0}, present{0}, failed{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    while (!abort.load() && !stop.stop_requested()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      try {
        auto result = download_image(work[i], config.out_dir, config.policy, ledger, ctx);
        switch (result.status) {
          case DownloadResult::Status::Saved: ++saved; break;
          case DownloadResult::Status::AlreadyPresent: ++present; break;
          case DownloadResult::Status::Failed: ++failed; break;
        }
        if (config.on_result) config.on_result(work[i], result);
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      }
    }
  };

  const int n_workers = std::min<int>(config.workers, static_cast<int>(std::max<std::size_t>(1, work.size())));
  {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  report.downloaded = saved;
  report.skipped = present;
  report.failed = failed;
  report.interrupted = stop.stop_requested() && next.load() < work.size();
  ledger.compact();
  return report;
}

std::map<std::int64_t, ImageMeta> scan_tile_cache(const fs::path& root) {
  std::map<std::int64_t, ImageMeta> index;
  const fs::path tiles = root / "tiles";
  std::error_code ec;
  if (!fs::is_directory(tiles, ec)) return index;
  const BoundingBox world{-180, -90, 180, 90};
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(tiles)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    try {
      for (auto& meta : parse_tile_features(read_file(file), world).images) {
        index.try_emplace(meta.image_id, std::move(meta));
      }
    } catch (const TileParseError& e) {
      spdlog::warn("skipping {}: {}", file.string(), e.what());
    }
  }
  return index;
}

}  // namespace svkit
