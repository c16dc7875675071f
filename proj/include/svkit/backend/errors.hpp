#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace svkit::backend {

enum class ApiErrorCode {
  ValidationError,
  Underage,
  NoConsent,
  AuthError,
  NotFound,
  Duplicate,
  CategoryFull,
  UndoUnavailable,
  Exhausted,
};

/// Wire name, e.g. "CategoryFull".
std::string_view to_string(ApiErrorCode code);
/// 400, 401, 404 or 409.
int http_status(ApiErrorCode code);

class ApiError : public std::runtime_error {
 public:
  ApiError(ApiErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  explicit ApiError(ApiErrorCode code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

  ApiErrorCode code() const { return code_; }

 private:
  ApiErrorCode code_;
};

/// Storage-layer failure (I/O, constraint violation that should not happen).
class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svkit::backend
