#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svkit/backend/errors.hpp"
#include "svkit/backend/types.hpp"

namespace svkit::backend {

/// Persistence behind the survey API. Each call is atomic on its own; the
/// service layer adds per-session serialization on top.
class SurveyStore {
 public:
  virtual ~SurveyStore() = default;

  /// Stores participant and session together. Throws StoreError if the
  /// cookie hash is already taken.
  virtual Session create_session(const Participant& participant, const std::string& cookie_hash,
                                 Timestamp created_at) = 0;
  virtual std::optional<Session> find_session(std::int64_t session_id) const = 0;
  virtual std::optional<Session> find_session_by_cookie(const std::string& cookie_hash) const = 0;
  virtual std::vector<Participant> participants() const = 0;

  virtual void upsert_image(const SurveyImage& image) = 0;
  /// False when the image does not exist.
  virtual bool set_image_enabled(std::int64_t image_id, bool enabled) = 0;
  virtual std::optional<SurveyImage> find_image(std::int64_t image_id) const = 0;
  /// Enabled images the session has not rated, ascending.
  virtual std::vector<std::int64_t> unrated_enabled_images(std::int64_t session_id) const = 0;

  virtual bool has_rating(std::int64_t session_id, std::int64_t image_id) const = 0;
  virtual CategoryCounts category_counts(std::int64_t session_id) const = 0;
  /// Inserts the rating (id assigned here) and makes it the session's undo
  /// target in one step. Returns the new id.
  virtual std::int64_t add_rating(const RatingRecord& rating) = 0;
  /// Deletes the rating and marks the session's undo as consumed in one
  /// step. False when there was no such rating.
  virtual bool undo_rating(std::int64_t session_id, std::int64_t rating_id) = 0;
  virtual UndoState undo_state(std::int64_t session_id) const = 0;

  /// Every rating, ascending by id.
  virtual std::vector<RatingRecord> ratings() const = 0;
  /// Ratings joined with session, participant and image.
  virtual std::vector<RatingView> rating_views() const = 0;
};

std::unique_ptr<SurveyStore> make_memory_store();
/// Opens (creating if needed) an SQLite database file.
std::unique_ptr<SurveyStore> make_sqlite_store(const std::filesystem::path& path);

/// "memory", "sqlite:<path>" or a bare file path (SQLite).
std::unique_ptr<SurveyStore> open_store(const std::string& uri);

}  // namespace svkit::backend
