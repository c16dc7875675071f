#include "svkit/backend/http_api.hpp"

#include <algorithm>
#include <charconv>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace svkit::backend {
namespace {

using nlohmann::json;

std::optional<std::string> param(const Params& p, std::string_view key) {
  auto it = p.find(key);
  if (it == p.end()) return std::nullopt;
  return it->second;
}

std::int64_t required_int(const Params& p, std::string_view key) {
  const auto text = param(p, key);
  if (!text || text->empty()) throw ApiError(ApiErrorCode::ValidationError, std::string(key) + " is required");
  std::int64_t v = 0;
  const auto* end = text->data() + text->size();
  auto [ptr, ec] = std::from_chars(text->data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ApiError(ApiErrorCode::ValidationError, std::string(key) + " must be an integer");
  }
  return v;
}

std::optional<std::int64_t> optional_int(const Params& p, std::string_view key) {
  const auto text = param(p, key);
  if (!text || text->empty()) return std::nullopt;
  return required_int(p, key);
}

int small_int(const Params& p, std::string_view key) {
  const std::int64_t v = required_int(p, key);
  if (v < -1000 || v > 1000) throw ApiError(ApiErrorCode::ValidationError, std::string(key) + " out of range");
  return static_cast<int>(v);
}

std::string required_text(const Params& p, std::string_view key) {
  auto text = param(p, key);
  if (!text || text->empty()) throw ApiError(ApiErrorCode::ValidationError, std::string(key) + " is required");
  return *text;
}

json session_json(const SessionIds& s) { return {{"session_id", s.session_id}, {"cookie_hash", s.cookie_hash}}; }

json run(SurveyService& service, std::string_view function, const Params& p) {
  if (function == "newperson") {
    NewPersonForm form{param(p, "age"),    param(p, "monthly_gross_income"), param(p, "education"),
                       param(p, "gender"), param(p, "country"),              param(p, "postcode"),
                       param(p, "consent")};
    return session_json(service.newperson(form));
  }
  if (function == "getsession") {
    return session_json(service.getsession(optional_int(p, "session_id"), param(p, "cookie_hash")));
  }
  if (function == "fetch") {
    const auto img = service.fetch(required_int(p, "session_id"));
    return {{"cityname", img.cityname}, {"url", img.url}, {"image_id", img.image_id}};
  }
  if (function == "new") {
    const auto session_id = required_int(p, "session_id");
    const auto cookie = required_text(p, "cookie_hash");
    const auto image_id = required_int(p, "image_id");
    const auto category = small_int(p, "category_id");
    const auto rating = small_int(p, "rating");
    return counts_json(service.new_rating(session_id, cookie, image_id, category, rating));
  }
  if (function == "undo") {
    const auto session_id = required_int(p, "session_id");
    return counts_json(service.undo(session_id, required_text(p, "cookie_hash")));
  }
  if (function == "countratingsbycategory") {
    return counts_json(service.count_ratings_by_category(required_int(p, "session_id")));
  }
  throw ApiError(ApiErrorCode::NotFound, "no such function");
}

/// Query string, form fields and a JSON object body, later sources winning.
Params collect_params(const httplib::Request& req) {
  Params out;
  for (const auto& [k, v] : req.params) out[k] = v;
  for (const auto& [k, f] : req.files) out[k] = f.content;
  const auto type = req.get_header_value("Content-Type");
  if (type.find("application/json") != std::string::npos && !req.body.empty()) {
    const json body = json::parse(req.body, nullptr, false);
    if (!body.is_object()) throw ApiError(ApiErrorCode::ValidationError, "body must be a JSON object");
    for (const auto& [k, v] : body.items()) {
      if (v.is_string()) {
        out[k] = v.get<std::string>();
      } else if (v.is_null()) {
        out.erase(k);
      } else if (v.is_primitive()) {
        out[k] = v.dump();
      } else {
        throw ApiError(ApiErrorCode::ValidationError, k + " must be a scalar");
      }
    }
  }
  return out;
}

}  // namespace

json counts_json(const CategoryCounts& counts) {
  json c = json::object();
  for (int i = 0; i < kCategoryCount; ++i) c[std::to_string(i + 1)] = counts[static_cast<std::size_t>(i)];
  return {{"category_counts", c}};
}

ApiResponse dispatch(SurveyService& service, std::string_view function, const Params& params) {
  try {
    return {200, run(service, function, params)};
  } catch (const ApiError& e) {
    return {http_status(e.code()), {{"error", std::string(to_string(e.code()))}}};
  }
}

struct ApiServer::Impl {
  SurveyService& service;
  ServerConfig config;
  httplib::Server server;
  std::thread thread;

  Impl(SurveyService& s, ServerConfig c) : service(s), config(std::move(c)) {
    const int workers = std::max(1, config.worker_threads);
    server.new_task_queue = [workers] { return new httplib::ThreadPool(static_cast<std::size_t>(workers)); };

    auto handle = [this](const httplib::Request& req, httplib::Response& res) {
      apply_cors(req, res);
      ApiResponse out;
      try {
        out = dispatch(service, req.matches[1].str(), collect_params(req));
      } catch (const ApiError& e) {
        out = {http_status(e.code()), {{"error", std::string(to_string(e.code()))}}};
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        out = {500, {{"error", "InternalError"}}};
      }
      res.status = out.status;
      res.set_content(out.body.dump(), "application/json");
    };
    server.Get(R"(/api/v1/([A-Za-z]+))", handle);
    server.Post(R"(/api/v1/([A-Za-z]+))", handle);
    server.Options(R"(/api/v1/([A-Za-z]+))", [this](const httplib::Request& req, httplib::Response& res) {
      apply_cors(req, res);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Max-Age", "600");
      res.status = 204;
    });
  }

  void apply_cors(const httplib::Request& req, httplib::Response& res) const {
    if (config.cors_origins.empty()) return;
    const auto origin = req.get_header_value("Origin");
    const auto& allowed = config.cors_origins;
    if (std::find(allowed.begin(), allowed.end(), "*") != allowed.end()) {
      res.set_header("Access-Control-Allow-Origin", "*");
    } else if (!origin.empty() && std::find(allowed.begin(), allowed.end(), origin) != allowed.end()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  }
};

ApiServer::ApiServer(SurveyService& service, ServerConfig config)
    : impl_(std::make_unique<Impl>(service, std::move(config))) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  const auto& c = impl_->config;
  if (c.port == 0) {
    const int port = impl_->server.bind_to_any_port(c.bind_address);
    if (port < 0) throw std::runtime_error("cannot bind " + c.bind_address);
    return port;
  }
  if (!impl_->server.bind_to_port(c.bind_address, c.port)) {
    throw std::runtime_error("cannot bind " + c.bind_address + ":" + std::to_string(c.port));
  }
  return c.port;
}

void ApiServer::serve() { impl_->server.listen_after_bind(); }

int ApiServer::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
  return port;
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace svkit::backend
