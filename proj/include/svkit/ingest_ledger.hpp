#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "svkit/tiles.hpp"

namespace svkit {

/// Fatal, run-ending ingest failure.
class IngestError : public std::runtime_error {
 public:
  enum class Kind { Config, Credential, Disk };
  IngestError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Persistent record of what a download run has achieved.
///
/// Every mutation is appended to `<root>/ledger.txt` and flushed at once, so a
/// crash loses at most the line being written. compact() rewrites the ledger
/// in sorted form and regenerates `<root>/failed_ids.txt`. All members are
/// safe to call concurrently.
class IngestLedger {
 public:
  explicit IngestLedger(std::filesystem::path root);
  IngestLedger(const IngestLedger&) = delete;
  IngestLedger& operator=(const IngestLedger&) = delete;

  bool is_downloaded(std::int64_t image_id) const;
  bool is_failed(std::int64_t image_id) const;
  void mark_downloaded(std::int64_t image_id);
  /// No-op for images already downloaded; an id is listed at most once.
  void mark_failed(std::int64_t image_id);

  std::set<std::int64_t> downloaded() const;
  std::vector<std::int64_t> failed() const;

  void record_tile(const TileCoord& tile, const std::filesystem::path& relative_path);
  std::optional<std::filesystem::path> cached_tile(const TileCoord& tile) const;

  void compact();

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path ledger_path() const { return root_ / "ledger.txt"; }
  std::filesystem::path failed_path() const { return root_ / "failed_ids.txt"; }

 private:
  void load();
  void append_line(const std::string& line);

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::set<std::int64_t> downloaded_;
  std::set<std::int64_t> failed_;
  std::map<TileCoord, std::filesystem::path> tiles_;
  std::ofstream log_;
};

/// Reads one integer id per line; blank lines and `#` comments are ignored.
std::vector<std::int64_t> read_id_list(const std::filesystem::path& path);

}  // namespace svkit
