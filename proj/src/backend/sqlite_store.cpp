#include <mutex>
#include <string>

#include <sqlite3.h>

#include "svkit/backend/store.hpp"

namespace svkit::backend {
namespace {

constexpr const char* kSchema = R"sql(
PRAGMA foreign_keys = ON;
CREATE TABLE IF NOT EXISTS participants (
  id INTEGER PRIMARY KEY AUTOINCREMENT,
  age INTEGER NOT NULL CHECK (age >= 18),
  monthly_gross_income REAL,
  education TEXT,
  gender TEXT,
  country TEXT,
  postcode TEXT,
  consent INTEGER NOT NULL CHECK (consent = 1)
);
CREATE TABLE IF NOT EXISTS sessions (
  id INTEGER PRIMARY KEY AUTOINCREMENT,
  cookie_hash TEXT NOT NULL UNIQUE,
  participant_id INTEGER NOT NULL REFERENCES participants(id),
  created_at INTEGER NOT NULL,
  last_rating_id INTEGER,
  undo_consumed INTEGER NOT NULL DEFAULT 1
);
CREATE TABLE IF NOT EXISTS images (
  image_id INTEGER PRIMARY KEY,
  url TEXT NOT NULL,
  cityname TEXT NOT NULL,
  lon REAL NOT NULL,
  lat REAL NOT NULL,
  enabled INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS ratings (
  id INTEGER PRIMARY KEY AUTOINCREMENT,
  ts INTEGER NOT NULL,
  session_id INTEGER NOT NULL REFERENCES sessions(id),
  image_id INTEGER NOT NULL REFERENCES images(image_id),
  category_id INTEGER NOT NULL CHECK (category_id BETWEEN 1 AND 5),
  score INTEGER NOT NULL CHECK (score BETWEEN 1 AND 5),
  UNIQUE (session_id, image_id)
);
CREATE INDEX IF NOT EXISTS ratings_by_session ON ratings(session_id);
)sql";

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      throw StoreError(std::string("prepare failed: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, std::int64_t v) {
    check(sqlite3_bind_int64(stmt_, i, v));
    return *this;
  }
  Statement& bind(int i, double v) {
    check(sqlite3_bind_double(stmt_, i, v));
    return *this;
  }
  Statement& bind(int i, const std::string& v) {
    check(sqlite3_bind_text(stmt_, i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind_null(int i) {
    check(sqlite3_bind_null(stmt_, i));
    return *this;
  }
  template <typename T>
  Statement& bind(int i, const std::optional<T>& v) {
    return v ? bind(i, *v) : bind_null(i);
  }

  /// True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw StoreError(std::string("step failed: ") + sqlite3_errmsg(db_));
  }

  std::int64_t int64(int col) const { return sqlite3_column_int64(stmt_, col); }
  double real(int col) const { return sqlite3_column_double(stmt_, col); }
  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }
  std::string text(int col) const {
    const auto* p = sqlite3_column_text(stmt_, col);
    return p == nullptr ? std::string() : std::string(reinterpret_cast<const char*>(p));
  }
  std::optional<std::string> opt_text(int col) const {
    return is_null(col) ? std::nullopt : std::optional<std::string>(text(col));
  }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) throw StoreError(std::string("bind failed: ") + sqlite3_errmsg(db_));
  }

  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

class SqliteStore final : public SurveyStore {
 public:
  explicit SqliteStore(const std::filesystem::path& path) {
    if (sqlite3_open_v2(path.string().c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
      const std::string msg = db_ != nullptr ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw StoreError("cannot open " + path.string() + ": " + msg);
    }
    sqlite3_busy_timeout(db_, 5000);
    exec(kSchema);
  }
  ~SqliteStore() override { sqlite3_close(db_); }

  Session create_session(const Participant& p, const std::string& cookie_hash, Timestamp created_at) override {
    std::lock_guard lock(mutex_);
    Transaction tx(*this);
    {
      Statement s(db_, "SELECT 1 FROM sessions WHERE cookie_hash = ?");
      if (s.bind(1, cookie_hash).step()) throw StoreError("cookie hash collision");
    }
    Statement ins(db_,
                  "INSERT INTO participants (age, monthly_gross_income, education, gender, country, postcode, consent)"
                  " VALUES (?, ?, ?, ?, ?, ?, ?)");
    std::optional<std::string> education;
    if (p.education) education = std::string(to_string(*p.education));
    ins.bind(1, static_cast<std::int64_t>(p.age))
        .bind(2, p.monthly_gross_income)
        .bind(3, education)
        .bind(4, p.gender)
        .bind(5, p.country)
        .bind(6, p.postcode)
        .bind(7, std::int64_t{p.consent ? 1 : 0});
    ins.step();
    const std::int64_t participant_id = sqlite3_last_insert_rowid(db_);

    Statement sess(db_, "INSERT INTO sessions (cookie_hash, participant_id, created_at) VALUES (?, ?, ?)");
    sess.bind(1, cookie_hash).bind(2, participant_id).bind(3, created_at);
    sess.step();
    Session out{sqlite3_last_insert_rowid(db_), cookie_hash, participant_id, created_at};
    tx.commit();
    return out;
  }

  std::optional<Session> find_session(std::int64_t session_id) const override {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT id, cookie_hash, participant_id, created_at FROM sessions WHERE id = ?");
    if (!s.bind(1, session_id).step()) return std::nullopt;
    return Session{s.int64(0), s.text(1), s.int64(2), s.int64(3)};
  }

  std::optional<Session> find_session_by_cookie(const std::string& cookie_hash) const override {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT id, cookie_hash, participant_id, created_at FROM sessions WHERE cookie_hash = ?");
    if (!s.bind(1, cookie_hash).step()) return std::nullopt;
    return Session{s.int64(0), s.text(1), s.int64(2), s.int64(3)};
  }

  std::vector<Participant> participants() const override {
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "SELECT id, age, monthly_gross_income, education, gender, country, postcode, consent"
                " FROM participants ORDER BY id");
    std::vector<Participant> out;
    while (s.step()) out.push_back(read_participant(s, 0));
    return out;
  }

  void upsert_image(const SurveyImage& image) override {
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "INSERT INTO images (image_id, url, cityname, lon, lat, enabled) VALUES (?, ?, ?, ?, ?, ?)"
                " ON CONFLICT(image_id) DO UPDATE SET url = excluded.url, cityname = excluded.cityname,"
                " lon = excluded.lon, lat = excluded.lat, enabled = excluded.enabled");
    s.bind(1, image.image_id)
        .bind(2, image.url)
        .bind(3, image.cityname)
        .bind(4, image.position.lon)
        .bind(5, image.position.lat)
        .bind(6, std::int64_t{image.enabled ? 1 : 0});
    s.step();
  }

  bool set_image_enabled(std::int64_t image_id, bool enabled) override {
    std::lock_guard lock(mutex_);
    Statement s(db_, "UPDATE images SET enabled = ? WHERE image_id = ?");
    s.bind(1, std::int64_t{enabled ? 1 : 0}).bind(2, image_id);
    s.step();
    return sqlite3_changes(db_) > 0;
  }

  std::optional<SurveyImage> find_image(std::int64_t image_id) const override {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT image_id, url, cityname, lon, lat, enabled FROM images WHERE image_id = ?");
    if (!s.bind(1, image_id).step()) return std::nullopt;
    return SurveyImage{s.int64(0), s.text(1), s.text(2), {s.real(3), s.real(4)}, s.int64(5) != 0};
  }

  std::vector<std::int64_t> unrated_enabled_images(std::int64_t session_id) const override {
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "SELECT image_id FROM images WHERE enabled = 1 AND image_id NOT IN"
                " (SELECT image_id FROM ratings WHERE session_id = ?) ORDER BY image_id");
    s.bind(1, session_id);
    std::vector<std::int64_t> out;
    while (s.step()) out.push_back(s.int64(0));
    return out;
  }

  bool has_rating(std::int64_t session_id, std::int64_t image_id) const override {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT 1 FROM ratings WHERE session_id = ? AND image_id = ?");
    return s.bind(1, session_id).bind(2, image_id).step();
  }

  CategoryCounts category_counts(std::int64_t session_id) const override {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT category_id, COUNT(*) FROM ratings WHERE session_id = ? GROUP BY category_id");
    s.bind(1, session_id);
    CategoryCounts counts{};
    while (s.step()) {
      const auto cat = s.int64(0);
      if (cat >= 1 && cat <= kCategoryCount) counts[static_cast<std::size_t>(cat - 1)] = static_cast<int>(s.int64(1));
    }
    return counts;
  }

  std::int64_t add_rating(const RatingRecord& r) override {
    std::lock_guard lock(mutex_);
    Transaction tx(*this);
    Statement ins(db_, "INSERT INTO ratings (ts, session_id, image_id, category_id, score) VALUES (?, ?, ?, ?, ?)");
    ins.bind(1, r.timestamp)
        .bind(2, r.session_id)
        .bind(3, r.image_id)
        .bind(4, static_cast<std::int64_t>(r.category_id))
        .bind(5, static_cast<std::int64_t>(r.score));
    ins.step();
    const std::int64_t id = sqlite3_last_insert_rowid(db_);
    Statement upd(db_, "UPDATE sessions SET last_rating_id = ?, undo_consumed = 0 WHERE id = ?");
    upd.bind(1, id).bind(2, r.session_id);
    upd.step();
    tx.commit();
    return id;
  }

  bool undo_rating(std::int64_t session_id, std::int64_t rating_id) override {
    std::lock_guard lock(mutex_);
    Transaction tx(*this);
    Statement del(db_, "DELETE FROM ratings WHERE id = ? AND session_id = ?");
    del.bind(1, rating_id).bind(2, session_id);
    del.step();
    if (sqlite3_changes(db_) == 0) return false;
    Statement upd(db_, "UPDATE sessions SET undo_consumed = 1 WHERE id = ?");
    upd.bind(1, session_id);
    upd.step();
    tx.commit();
    return true;
  }

  UndoState undo_state(std::int64_t session_id) const override {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT last_rating_id, undo_consumed FROM sessions WHERE id = ?");
    if (!s.bind(1, session_id).step()) return {};
    UndoState st;
    if (!s.is_null(0)) st.last_rating_id = s.int64(0);
    st.consumed = s.int64(1) != 0;
    return st;
  }

  std::vector<RatingRecord> ratings() const override {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT id, ts, session_id, image_id, category_id, score FROM ratings ORDER BY id");
    std::vector<RatingRecord> out;
    while (s.step()) {
      out.push_back({s.int64(0), s.int64(1), s.int64(2), s.int64(3), static_cast<int>(s.int64(4)),
                     static_cast<int>(s.int64(5))});
    }
    return out;
  }

  std::vector<RatingView> rating_views() const override {
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "SELECT r.id, r.ts, r.session_id, r.image_id, r.category_id, r.score, s.cookie_hash,"
                " p.id, p.age, p.monthly_gross_income, p.education, p.gender, p.country, p.postcode, p.consent,"
                " i.lon, i.lat"
                " FROM ratings r JOIN sessions s ON s.id = r.session_id"
                " JOIN participants p ON p.id = s.participant_id"
                " LEFT JOIN images i ON i.image_id = r.image_id ORDER BY r.id");
    std::vector<RatingView> out;
    while (s.step()) {
      RatingView v;
      v.rating = {s.int64(0), s.int64(1), s.int64(2), s.int64(3), static_cast<int>(s.int64(4)),
                  static_cast<int>(s.int64(5))};
      v.cookie_hash = s.text(6);
      v.participant = read_participant(s, 7);
      v.position = {s.real(15), s.real(16)};
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  class Transaction {
   public:
    explicit Transaction(SqliteStore& store) : store_(store) { store_.exec("BEGIN IMMEDIATE"); }
    ~Transaction() {
      if (!done_) sqlite3_exec(store_.db_, "ROLLBACK", nullptr, nullptr, nullptr);
    }
    void commit() {
      store_.exec("COMMIT");
      done_ = true;
    }

   private:
    SqliteStore& store_;
    bool done_ = false;
  };

  static Participant read_participant(const Statement& s, int first) {
    Participant p;
    p.id = s.int64(first);
    p.age = static_cast<int>(s.int64(first + 1));
    if (!s.is_null(first + 2)) p.monthly_gross_income = s.real(first + 2);
    if (auto e = s.opt_text(first + 3)) p.education = parse_education(*e);
    p.gender = s.opt_text(first + 4);
    p.country = s.opt_text(first + 5);
    p.postcode = s.opt_text(first + 6);
    p.consent = s.int64(first + 7) != 0;
    return p;
  }

  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      const std::string msg = err != nullptr ? err : "unknown error";
      sqlite3_free(err);
      throw StoreError("sqlite: " + msg);
    }
  }

  sqlite3* db_ = nullptr;
  mutable std::recursive_mutex mutex_;
};

}  // namespace

std::unique_ptr<SurveyStore> make_sqlite_store(const std::filesystem::path& path) {
  return std::make_unique<SqliteStore>(path);
}

}  // namespace svkit::backend
