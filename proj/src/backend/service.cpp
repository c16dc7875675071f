#include "svkit/backend/service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cctype>
#include <cmath>

#include <sodium.h>

namespace svkit::backend {
namespace {

std::optional<std::string> present(const std::optional<std::string>& v) {
  if (!v || v->empty()) return std::nullopt;
  return v;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool parse_consent(const std::string& text) {
  const std::string v = lower(text);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ApiError(ApiErrorCode::ValidationError, "consent must be a boolean");
}

int parse_age(const std::string& text) {
  int age = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, age);
  if (ec != std::errc{} || ptr != end || age <= 0) {
    throw ApiError(ApiErrorCode::ValidationError, "age must be a positive integer");
  }
  return age;
}

double parse_income(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v) && v >= 0) return v;
  } catch (const std::exception&) {
  }
  throw ApiError(ApiErrorCode::ValidationError, "monthly_gross_income must be a non-negative number");
}

}  // namespace

Timestamp system_clock_us() {
  using namespace std::chrono;
  return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

std::string random_cookie_hash() {
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw StoreError("libsodium failed to initialize");
  unsigned char buf[16];
  randombytes_buf(buf, sizeof buf);
  char hex[sizeof buf * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, buf, sizeof buf);
  return std::string(hex, sizeof buf * 2);
}

SurveyService::SurveyService(SurveyStore& store, Clock clock, TokenGenerator tokens, std::uint64_t seed)
    : store_(store), clock_(std::move(clock)), tokens_(std::move(tokens)), rng_(seed) {}

std::mutex& SurveyService::stripe(std::int64_t session_id) {
  return stripes_[static_cast<std::uint64_t>(session_id) % kStripes];
}

Session SurveyService::authenticate(std::int64_t session_id, const std::string& cookie_hash) const {
  auto session = store_.find_session(session_id);
  if (!session) throw ApiError(ApiErrorCode::NotFound, "unknown session");
  if (cookie_hash.size() != session->cookie_hash.size() ||
      sodium_memcmp(cookie_hash.data(), session->cookie_hash.data(), cookie_hash.size()) != 0) {
    throw ApiError(ApiErrorCode::AuthError, "session_id and cookie_hash do not match");
  }
  return *session;
}

SessionIds SurveyService::newperson(const NewPersonForm& form) {
  const auto age_text = present(form.age);
  if (!age_text) throw ApiError(ApiErrorCode::ValidationError, "age is required");
  const int age = parse_age(*age_text);
  const auto consent_text = present(form.consent);
  if (!consent_text) throw ApiError(ApiErrorCode::ValidationError, "consent is required");
  if (!parse_consent(*consent_text)) throw ApiError(ApiErrorCode::NoConsent);
  if (age < kMinimumAge) throw ApiError(ApiErrorCode::Underage);

  Participant p;
  p.age = age;
  p.consent = true;
  if (auto v = present(form.monthly_gross_income)) p.monthly_gross_income = parse_income(*v);
  if (auto v = present(form.education)) {
    p.education = parse_education(*v);
    if (!p.education) throw ApiError(ApiErrorCode::ValidationError, "unknown education level");
  }
  p.gender = present(form.gender);
  p.country = present(form.country);
  p.postcode = present(form.postcode);

  // A collision on 128 random bits means the generator is broken; a few
  // retries cover a test generator that repeats.
  for (int attempt = 0;; ++attempt) {
    const std::string token = tokens_();
    try {
      const Session s = store_.create_session(p, token, clock_());
      return {s.session_id, s.cookie_hash};
    } catch (const StoreError&) {
      if (attempt >= 3 || !store_.find_session_by_cookie(token)) throw;
    }
  }
}

SessionIds SurveyService::getsession(std::optional<std::int64_t> session_id, std::optional<std::string> cookie_hash) {
  if (cookie_hash && cookie_hash->empty()) cookie_hash.reset();
  if (session_id.has_value() == cookie_hash.has_value()) {
    throw ApiError(ApiErrorCode::ValidationError, "supply exactly one of session_id and cookie_hash");
  }
  auto s = session_id ? store_.find_session(*session_id) : store_.find_session_by_cookie(*cookie_hash);
  if (!s) throw ApiError(ApiErrorCode::NotFound, "unknown session");
  return {s->session_id, s->cookie_hash};
}

FetchedImage SurveyService::fetch(std::int64_t session_id) {
  std::lock_guard session_lock(stripe(session_id));
  if (!store_.find_session(session_id)) throw ApiError(ApiErrorCode::NotFound, "unknown session");
  const auto candidates = store_.unrated_enabled_images(session_id);
  if (candidates.empty()) throw ApiError(ApiErrorCode::Exhausted);
  std::size_t pick = 0;
  {
    std::lock_guard lock(rng_mutex_);
    pick = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng_);
  }
  const auto image = store_.find_image(candidates[pick]);
  if (!image) throw ApiError(ApiErrorCode::NotFound, "image vanished");
  return {image->cityname, image->url, image->image_id};
}

CategoryCounts SurveyService::new_rating(std::int64_t session_id, const std::string& cookie_hash,
                                         std::int64_t image_id, int category_id, int score) {
  if (category_id < 1 || category_id > kCategoryCount) {
    throw ApiError(ApiErrorCode::ValidationError, "category_id out of range");
  }
  if (score < 1 || score > 5) throw ApiError(ApiErrorCode::ValidationError, "rating out of range");

  std::lock_guard session_lock(stripe(session_id));
  authenticate(session_id, cookie_hash);
  const auto image = store_.find_image(image_id);
  if (!image || !image->enabled) throw ApiError(ApiErrorCode::NotFound, "unknown image");
  if (store_.has_rating(session_id, image_id)) throw ApiError(ApiErrorCode::Duplicate);
  CategoryCounts counts = store_.category_counts(session_id);
  if (counts[static_cast<std::size_t>(category_id - 1)] >= kRatingsPerCategory) {
    throw ApiError(ApiErrorCode::CategoryFull);
  }
  store_.add_rating({0, clock_(), session_id, image_id, category_id, score});
  ++counts[static_cast<std::size_t>(category_id - 1)];
  return counts;
}

CategoryCounts SurveyService::undo(std::int64_t session_id, const std::string& cookie_hash) {
  std::lock_guard session_lock(stripe(session_id));
  authenticate(session_id, cookie_hash);
  const UndoState state = store_.undo_state(session_id);
  if (!state.available() || !store_.undo_rating(session_id, *state.last_rating_id)) {
    throw ApiError(ApiErrorCode::UndoUnavailable);
  }
  return store_.category_counts(session_id);
}

CategoryCounts SurveyService::count_ratings_by_category(std::int64_t session_id) {
  std::lock_guard session_lock(stripe(session_id));
  if (!store_.find_session(session_id)) throw ApiError(ApiErrorCode::NotFound, "unknown session");
  return store_.category_counts(session_id);
}

}  // namespace svkit::backend
