#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <unordered_map>

#include "svkit/backend/store.hpp"

namespace svkit::backend {
namespace {

class MemoryStore final : public SurveyStore {
 public:
  Session create_session(const Participant& participant, const std::string& cookie_hash,
                         Timestamp created_at) override {
    std::unique_lock lock(mutex_);
    if (by_cookie_.contains(cookie_hash)) throw StoreError("cookie hash collision");
    Participant p = participant;
    p.id = static_cast<std::int64_t>(participants_.size()) + 1;
    participants_.push_back(p);
    Session s{static_cast<std::int64_t>(sessions_.size()) + 1, cookie_hash, p.id, created_at};
    sessions_.push_back({s, {}, {}});
    by_cookie_.emplace(cookie_hash, s.session_id);
    return s;
  }

  std::optional<Session> find_session(std::int64_t session_id) const override {
    std::shared_lock lock(mutex_);
    if (const auto* s = session(session_id)) return s->info;
    return std::nullopt;
  }

  std::optional<Session> find_session_by_cookie(const std::string& cookie_hash) const override {
    std::shared_lock lock(mutex_);
    auto it = by_cookie_.find(cookie_hash);
    if (it == by_cookie_.end()) return std::nullopt;
    return session(it->second)->info;
  }

  std::vector<Participant> participants() const override {
    std::shared_lock lock(mutex_);
    return participants_;
  }

  void upsert_image(const SurveyImage& image) override {
    std::unique_lock lock(mutex_);
    images_[image.image_id] = image;
  }

  bool set_image_enabled(std::int64_t image_id, bool enabled) override {
    std::unique_lock lock(mutex_);
    auto it = images_.find(image_id);
    if (it == images_.end()) return false;
    it->second.enabled = enabled;
    return true;
  }

  std::optional<SurveyImage> find_image(std::int64_t image_id) const override {
    std::shared_lock lock(mutex_);
    auto it = images_.find(image_id);
    if (it == images_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::int64_t> unrated_enabled_images(std::int64_t session_id) const override {
    std::shared_lock lock(mutex_);
    const auto* s = session(session_id);
    std::vector<std::int64_t> out;
    for (const auto& [id, img] : images_) {
      if (img.enabled && (s == nullptr || !s->rated.contains(id))) out.push_back(id);
    }
    return out;
  }

  bool has_rating(std::int64_t session_id, std::int64_t image_id) const override {
    std::shared_lock lock(mutex_);
    const auto* s = session(session_id);
    return s != nullptr && s->rated.contains(image_id);
  }

  CategoryCounts category_counts(std::int64_t session_id) const override {
    std::shared_lock lock(mutex_);
    CategoryCounts counts{};
    if (const auto* s = session(session_id)) {
      for (const auto& [image, rating_id] : s->rated) {
        ++counts[static_cast<std::size_t>(ratings_.at(rating_id).category_id - 1)];
      }
    }
    return counts;
  }

  std::int64_t add_rating(const RatingRecord& rating) override {
    std::unique_lock lock(mutex_);
    auto* s = session(rating.session_id);
    if (s == nullptr) throw StoreError("no session " + std::to_string(rating.session_id));
    if (s->rated.contains(rating.image_id)) throw StoreError("duplicate rating");
    RatingRecord r = rating;
    r.id = ++last_rating_id_;
    ratings_.emplace(r.id, r);
    s->rated.emplace(r.image_id, r.id);
    s->undo = {r.id, false};
    return r.id;
  }

  bool undo_rating(std::int64_t session_id, std::int64_t rating_id) override {
    std::unique_lock lock(mutex_);
    auto* s = session(session_id);
    auto it = ratings_.find(rating_id);
    if (s == nullptr || it == ratings_.end() || it->second.session_id != session_id) return false;
    s->rated.erase(it->second.image_id);
    ratings_.erase(it);
    s->undo.consumed = true;
    return true;
  }

  UndoState undo_state(std::int64_t session_id) const override {
    std::shared_lock lock(mutex_);
    if (const auto* s = session(session_id)) return s->undo;
    return {};
  }

  std::vector<RatingRecord> ratings() const override {
    std::shared_lock lock(mutex_);
    std::vector<RatingRecord> out;
    out.reserve(ratings_.size());
    for (const auto& [id, r] : ratings_) out.push_back(r);
    return out;
  }

  std::vector<RatingView> rating_views() const override {
    std::shared_lock lock(mutex_);
    std::vector<RatingView> out;
    out.reserve(ratings_.size());
    for (const auto& [id, r] : ratings_) {
      const auto* s = session(r.session_id);
      RatingView v;
      v.rating = r;
      v.cookie_hash = s->info.cookie_hash;
      v.participant = participants_.at(static_cast<std::size_t>(s->info.participant_id - 1));
      if (auto img = images_.find(r.image_id); img != images_.end()) v.position = img->second.position;
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  struct SessionRow {
    Session info;
    std::unordered_map<std::int64_t, std::int64_t> rated;  // image -> rating id
    UndoState undo;
  };

  SessionRow* session(std::int64_t id) {
    if (id < 1 || id > static_cast<std::int64_t>(sessions_.size())) return nullptr;
    return &sessions_[static_cast<std::size_t>(id - 1)];
  }
  const SessionRow* session(std::int64_t id) const { return const_cast<MemoryStore*>(this)->session(id); }

  mutable std::shared_mutex mutex_;
  std::vector<Participant> participants_;
  std::vector<SessionRow> sessions_;
  std::unordered_map<std::string, std::int64_t> by_cookie_;
  std::map<std::int64_t, SurveyImage> images_;
  std::map<std::int64_t, RatingRecord> ratings_;
  std::int64_t last_rating_id_ = 0;
};

}  // namespace

std::unique_ptr<SurveyStore> make_memory_store() { return std::make_unique<MemoryStore>(); }

std::unique_ptr<SurveyStore> open_store(const std::string& uri) {
  if (uri == "memory" || uri == "memory:") return make_memory_store();
  constexpr std::string_view prefix = "sqlite:";
  if (uri.rfind(prefix, 0) == 0) return make_sqlite_store(uri.substr(prefix.size()));
  return make_sqlite_store(uri);
}

}  // namespace svkit::backend
