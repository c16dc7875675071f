#include "svkit/backend/errors.hpp"

#include <algorithm>
#include <cctype>

#include "svkit/backend/types.hpp"

namespace svkit::backend {

std::string_view to_string(ApiErrorCode code) {
  switch (code) {
    case ApiErrorCode::ValidationError: return "ValidationError";
    case ApiErrorCode::Underage: return "Underage";
    case ApiErrorCode::NoConsent: return "NoConsent";
    case ApiErrorCode::AuthError: return "AuthError";
    case ApiErrorCode::NotFound: return "NotFound";
    case ApiErrorCode::Duplicate: return "Duplicate";
    case ApiErrorCode::CategoryFull: return "CategoryFull";
    case ApiErrorCode::UndoUnavailable: return "UndoUnavailable";
    case ApiErrorCode::Exhausted: return "Exhausted";
  }
  return "ValidationError";
}

int http_status(ApiErrorCode code) {
  switch (code) {
    case ApiErrorCode::ValidationError:
    case ApiErrorCode::Underage:
    case ApiErrorCode::NoConsent: return 400;
    case ApiErrorCode::AuthError: return 401;
    case ApiErrorCode::NotFound:
    case ApiErrorCode::Exhausted: return 404;
    case ApiErrorCode::Duplicate:
    case ApiErrorCode::CategoryFull:
    case ApiErrorCode::UndoUnavailable: return 409;
  }
  return 400;
}

std::string_view category_name(int category_id) {
  static constexpr std::string_view names[] = {"Walkability", "Bikeability", "Pleasantness", "Greenness", "Safety"};
  if (category_id < 1 || category_id > kCategoryCount) return "";
  return names[category_id - 1];
}

std::string_view score_label(int score) {
  static constexpr std::string_view labels[] = {"awful", "bad", "neutral", "good", "great"};
  if (score < 1 || score > 5) return "";
  return labels[score - 1];
}

std::string_view to_string(Education e) {
  switch (e) {
    case Education::Primary: return "Primary";
    case Education::Secondary: return "Secondary";
    case Education::Tertiary: return "Tertiary";
    case Education::Postgraduate: return "Postgraduate";
  }
  return "";
}

std::optional<Education> parse_education(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "primary") return Education::Primary;
  if (lower == "secondary") return Education::Secondary;
  if (lower == "tertiary") return Education::Tertiary;
  if (lower == "postgraduate") return Education::Postgraduate;
  return std::nullopt;
}

}  // namespace svkit::backend
