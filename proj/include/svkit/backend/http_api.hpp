#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "svkit/backend/service.hpp"

namespace svkit::backend {

using Params = std::map<std::string, std::string, std::less<>>;

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Runs one API function (newperson, getsession, fetch, new, undo,
/// countratingsbycategory) as the HTTP layer would, without a socket.
/// Errors come back as {"error": "<Code>"} with the mapped status.
ApiResponse dispatch(SurveyService& service, std::string_view function, const Params& params);

nlohmann::json counts_json(const CategoryCounts& counts);

struct ServerConfig {
  std::string bind_address = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Origins echoed in Access-Control-Allow-Origin; "*" allows any.
  std::vector<std::string> cors_origins;
  int worker_threads = 16;
};

class ApiServer {
 public:
  ApiServer(SurveyService& service, ServerConfig config);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds the socket and returns the port actually used.
  int bind();
  /// Serves until stop(); call bind() first.
  void serve();
  /// bind() and serve() on a background thread; returns the port.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace svkit::backend
