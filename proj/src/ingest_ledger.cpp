#include "svkit/ingest_ledger.hpp"

#include <sstream>
#include <string>

namespace svkit {

namespace fs = std::filesystem;

IngestLedger::IngestLedger(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw IngestError(IngestError::Kind::Disk, "cannot create " + root_.string() + ": " + ec.message());
  load();
  log_.open(ledger_path(), std::ios::app);
  if (!log_) throw IngestError(IngestError::Kind::Disk, "cannot open " + ledger_path().string());
}

void IngestLedger::load() {
  for (auto id : read_id_list(failed_path())) failed_.insert(id);

  std::ifstream in(ledger_path());
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2) continue;
    std::istringstream fields(line.substr(1));
    switch (line[0]) {
      case '+': {
        std::int64_t id = 0;
        if (fields >> id) {
          downloaded_.insert(id);
          failed_.erase(id);
        }
        break;
      }
      case '-': {
        std::int64_t id = 0;
        if (fields >> id && !downloaded_.contains(id)) failed_.insert(id);
        break;
      }
      case 'T': {
        TileCoord t;
        std::string rel;
        if (fields >> t.z >> t.x >> t.y >> rel) tiles_[t] = rel;
        break;
      }
      default:
        break;  // torn line from an interrupted write
    }
  }
}

void IngestLedger::append_line(const std::string& line) {
  log_ << line << '\n';
  log_.flush();
  if (!log_) {
    throw IngestError(IngestError::Kind::Disk, "write to " + ledger_path().string() + " failed");
  }
}

bool IngestLedger::is_downloaded(std::int64_t image_id) const {
  std::lock_guard lock(mutex_);
  return downloaded_.contains(image_id);
}

bool IngestLedger::is_failed(std::int64_t image_id) const {
  std::lock_guard lock(mutex_);
  return failed_.contains(image_id);
}

void IngestLedger::mark_downloaded(std::int64_t image_id) {
  std::lock_guard lock(mutex_);
  if (!downloaded_.insert(image_id).second) return;
  failed_.erase(image_id);
  append_line("+" + std::to_string(image_id));
}

void IngestLedger::mark_failed(std::int64_t image_id) {
  std::lock_guard lock(mutex_);
  if (downloaded_.contains(image_id) || !failed_.insert(image_id).second) return;
  append_line("-" + std::to_string(image_id));
}

std::set<std::int64_t> IngestLedger::downloaded() const {
  std::lock_guard lock(mutex_);
  return downloaded_;
}

std::vector<std::int64_t> IngestLedger::failed() const {
  std::lock_guard lock(mutex_);
  return {failed_.begin(), failed_.end()};
}

void IngestLedger::record_tile(const TileCoord& tile, const fs::path& relative_path) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = tiles_.insert_or_assign(tile, relative_path);
  if (!inserted && it->second == relative_path) return;
  append_line("T " + std::to_string(tile.z) + " " + std::to_string(tile.x) + " " +
              std::to_string(tile.y) + " " + relative_path.generic_string());
}

std::optional<fs::path> IngestLedger::cached_tile(const TileCoord& tile) const {
  std::lock_guard lock(mutex_);
  auto it = tiles_.find(tile);
  if (it == tiles_.end()) return std::nullopt;
  return it->second;
}

void IngestLedger::compact() {
  std::lock_guard lock(mutex_);
  auto write_atomically = [](const fs::path& target, const std::string& content) {
    const fs::path tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << content;
      out.flush();
      if (!out) throw IngestError(IngestError::Kind::Disk, "write to " + tmp.string() + " failed");
    }
    fs::rename(tmp, target);
  };

  std::ostringstream ledger;
  for (const auto& [t, rel] : tiles_) {
    ledger << "T " << t.z << ' ' << t.x << ' ' << t.y << ' ' << rel.generic_string() << '\n';
  }
  for (auto id : downloaded_) ledger << '+' << id << '\n';
  for (auto id : failed_) ledger << '-' << id << '\n';

  std::ostringstream failed;
  for (auto id : failed_) failed << id << '\n';

  log_.close();
  write_atomically(ledger_path(), ledger.str());
  write_atomically(failed_path(), failed.str());
  log_.open(ledger_path(), std::ios::app);
  if (!log_) throw IngestError(IngestError::Kind::Disk, "cannot reopen " + ledger_path().string());
}

std::vector<std::int64_t> read_id_list(const fs::path& path) {
  std::vector<std::int64_t> ids;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      ids.push_back(std::stoll(line.substr(first)));
    } catch (const std::exception&) {
      throw IngestError(IngestError::Kind::Config, "bad id '" + line + "' in " + path.string());
    }
  }
  return ids;
}

}  // namespace svkit
