#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "svkit/geo.hpp"

namespace svkit::backend {

/// Microseconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

inline constexpr int kCategoryCount = 5;
inline constexpr int kRatingsPerCategory = 20;
inline constexpr int kMinimumAge = 18;

/// 1=Walkability, 2=Bikeability, 3=Pleasantness, 4=Greenness, 5=Safety.
std::string_view category_name(int category_id);
/// 1=awful ... 5=great.
std::string_view score_label(int score);

enum class Education { Primary, Secondary, Tertiary, Postgraduate };
std::string_view to_string(Education e);
std::optional<Education> parse_education(std::string_view text);

struct Participant {
  std::int64_t id = 0;
  int age = 0;
  std::optional<double> monthly_gross_income;
  std::optional<Education> education;
  std::optional<std::string> gender;
  std::optional<std::string> country;
  std::optional<std::string> postcode;
  bool consent = false;
};

struct Session {
  std::int64_t session_id = 0;
  std::string cookie_hash;
  std::int64_t participant_id = 0;
  Timestamp created_at = 0;
};

struct SurveyImage {
  std::int64_t image_id = 0;
  std::string url;
  std::string cityname;
  LonLat position;
  bool enabled = false;
};

struct RatingRecord {
  std::int64_t id = 0;
  Timestamp timestamp = 0;
  std::int64_t session_id = 0;
  std::int64_t image_id = 0;
  int category_id = 0;
  int score = 0;
};

/// The single rating a session may still take back.
struct UndoState {
  std::optional<std::int64_t> last_rating_id;
  bool consumed = true;

  bool available() const { return last_rating_id.has_value() && !consumed; }
};

/// Index 0 holds category 1.
using CategoryCounts = std::array<int, kCategoryCount>;

inline int total(const CategoryCounts& counts) {
  int sum = 0;
  for (int c : counts) sum += c;
  return sum;
}

/// Rating joined with its session, participant and image; the analysis view.
struct RatingView {
  RatingRecord rating;
  std::string cookie_hash;
  Participant participant;
  LonLat position;
};

}  // namespace svkit::backend
