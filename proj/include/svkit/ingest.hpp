#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <vector>

#include "svkit/http_fetch.hpp"
#include "svkit/ingest_ledger.hpp"
#include "svkit/tiles.hpp"

namespace svkit {

using Millis = std::chrono::milliseconds;

/// Exponential back-off. `max_attempts` caps the total number of tries for
/// one resource, the first one included.
struct RetryPolicy {
  int max_attempts = 6;
  Millis base_delay{1000};
  double multiplier = 2.0;
  Millis max_delay{60000};

  /// Pause after the `failed_attempts`-th consecutive failure (1-based).
  Millis delay_after(int failed_attempts) const;
  void validate() const;
};

/// URL templates. Placeholders: {z} {x} {y} for tiles, {id} for the image
/// lookup, {key} for the access token in either.
struct Endpoints {
  std::string tile_url;
  std::string image_lookup_url;
  /// Field of the lookup response holding the photo URL.
  std::string image_url_field = "thumb_original_url";
  std::string api_key;
};

std::string expand_template(std::string text, const std::map<std::string, std::string>& values);

using Sleeper = std::function<void(Millis)>;

/// Real wall-clock sleep.
void sleep_for(Millis delay);

struct DownloadContext {
  HttpFetcher& fetcher;
  const Endpoints& endpoints;
  Sleeper sleep = sleep_for;
  RequestPacer* pacer = nullptr;
};

struct DownloadResult {
  enum class Status { Saved, AlreadyPresent, Failed };
  Status status = Status::Failed;
  int attempts = 0;
  /// Back-off pauses taken between attempts, in order.
  std::vector<Millis> delays;
  std::filesystem::path path;
  std::string last_error;
};

/// `<root>/<sequence_id>/<image_id>.jpg`
std::filesystem::path image_path(const std::filesystem::path& root, const ImageMeta& meta);

/// Fetches one photo with retries. A file already on disk short-circuits
/// without touching the network. Exhausted retries land the id on the
/// ledger's failed list; rejected credentials and write errors throw
/// IngestError.
DownloadResult download_image(const ImageMeta& meta, const std::filesystem::path& dest_root,
                              const RetryPolicy& policy, IngestLedger& ledger,
                              const DownloadContext& ctx);

/// Converts a raw tile response into a GeoJSON FeatureCollection payload.
using TileAdapter = std::function<std::string(const std::string& raw, const TileCoord& tile)>;

struct IngestConfig {
  std::filesystem::path out_dir;
  int zoom = 14;
  Endpoints endpoints;
  RetryPolicy policy;
  int workers = 4;
  /// Global cap on request starts per second; <= 0 disables pacing.
  double requests_per_second = 10.0;
  /// When set, only these ids are attempted (tiles come from the cache when
  /// present).
  std::optional<std::set<std::int64_t>> only_ids;
  TileAdapter tile_adapter;
  Sleeper sleep = sleep_for;
  /// Invoked after each image, from worker threads.
  std::function<void(const ImageMeta&, const DownloadResult&)> on_result;
};

struct IngestReport {
  std::size_t tiles = 0;
  std::size_t tiles_from_cache = 0;
  std::size_t tiles_failed = 0;
  std::size_t features_skipped = 0;
  std::size_t images_found = 0;
  std::size_t downloaded = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  bool interrupted = false;
};

/// Enumerates, caches and parses tiles over `bbox`, then downloads every
/// eligible photo. Safe to rerun: cached tiles are reused and photos already
/// on disk are skipped. Stops handing out new work once `stop` is requested.
IngestReport run_ingest(const BoundingBox& bbox, const IngestConfig& config, HttpFetcher& fetcher,
                        std::stop_token stop = {});

/// `<root>/tiles/<z>/<x>/<y>.json`
std::filesystem::path tile_cache_path(const std::filesystem::path& root, const TileCoord& tile);

/// Metadata of every image in the tile cache under `root`, keyed by id.
std::map<std::int64_t, ImageMeta> scan_tile_cache(const std::filesystem::path& root);

}  // namespace svkit
