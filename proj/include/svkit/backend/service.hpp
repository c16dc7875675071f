#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include "svkit/backend/store.hpp"

namespace svkit::backend {

using Clock = std::function<Timestamp()>;
using TokenGenerator = std::function<std::string()>;

/// Wall clock in microseconds.
Timestamp system_clock_us();
/// 16 bytes from the OS CSPRNG, lowercase hex.
std::string random_cookie_hash();

/// Raw newperson inputs as they arrive over the wire. Empty strings count
/// as absent for the optional fields.
struct NewPersonForm {
  std::optional<std::string> age;
  std::optional<std::string> monthly_gross_income;
  std::optional<std::string> education;
  std::optional<std::string> gender;
  std::optional<std::string> country;
  std::optional<std::string> postcode;
  std::optional<std::string> consent;
};

struct SessionIds {
  std::int64_t session_id = 0;
  std::string cookie_hash;
};

struct FetchedImage {
  std::string cityname;
  std::string url;
  std::int64_t image_id = 0;
};

/// Public API v1 semantics on top of a store. Thread-safe; mutations for the
/// same session are serialized.
class SurveyService {
 public:
  explicit SurveyService(SurveyStore& store, Clock clock = system_clock_us,
                         TokenGenerator tokens = random_cookie_hash, std::uint64_t seed = std::random_device{}());

  SessionIds newperson(const NewPersonForm& form);
  SessionIds getsession(std::optional<std::int64_t> session_id, std::optional<std::string> cookie_hash);
  FetchedImage fetch(std::int64_t session_id);
  CategoryCounts new_rating(std::int64_t session_id, const std::string& cookie_hash, std::int64_t image_id,
                            int category_id, int score);
  CategoryCounts undo(std::int64_t session_id, const std::string& cookie_hash);
  CategoryCounts count_ratings_by_category(std::int64_t session_id);

  SurveyStore& store() { return store_; }

 private:
  static constexpr std::size_t kStripes = 64;

  std::mutex& stripe(std::int64_t session_id);
  Session authenticate(std::int64_t session_id, const std::string& cookie_hash) const;

  SurveyStore& store_;
  Clock clock_;
  TokenGenerator tokens_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
  std::array<std::mutex, kStripes> stripes_;
};

}  // namespace svkit::backend
