#pragma once

#include <chrono>
#include <mutex>
#include <string>

namespace svkit {

struct HttpResponse {
  /// HTTP status, or 0 when the transfer itself failed.
  int status = 0;
  std::string body;
  std::string error;

  bool ok() const { return status >= 200 && status < 300; }
};

/// Blocking GET. Implementations must be safe to call from several threads.
class HttpFetcher {
 public:
  virtual ~HttpFetcher() = default;
  virtual HttpResponse get(const std::string& url) = 0;
};

/// libcurl-backed fetcher; one easy handle per call.
class CurlFetcher final : public HttpFetcher {
 public:
  explicit CurlFetcher(std::chrono::seconds timeout = std::chrono::seconds(60));
  ~CurlFetcher() override;
  CurlFetcher(const CurlFetcher&) = delete;
  CurlFetcher& operator=(const CurlFetcher&) = delete;

  HttpResponse get(const std::string& url) override;

 private:
  std::chrono::seconds timeout_;
};

/// Spaces requests globally so that at most `per_second` start each second.
/// A non-positive rate disables pacing.
class RequestPacer {
 public:
  explicit RequestPacer(double per_second);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

}  // namespace svkit
