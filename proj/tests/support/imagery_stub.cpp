#include "imagery_stub.hpp"

#include <httplib.h>
#include <json.hpp>

#include "oracles.hpp"

namespace stub {

struct ImageryStub::Server {
  httplib::Server http;
  std::thread thread;
};

ImageryStub::ImageryStub(std::vector<svkit::ImageMeta> images, int zoom)
    : server_(std::make_unique<Server>()), zoom_(zoom), images_(std::move(images)), rng_(7) {
  auto& http = server_->http;
  http.Get(R"(/tiles/(\d+)/(\d+)/(\d+)\.json)", [this](const httplib::Request& req, httplib::Response& res) {
    ++tile_requests_;
    if (reject_ || req.get_param_value("key") != "test-key") {
      res.status = 401;
      return;
    }
    res.set_content(tile_payload(std::stoi(req.matches[1]), std::stoi(req.matches[2]), std::stoi(req.matches[3])),
                    "application/json");
  });
  http.Get(R"(/lookup/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (reject_ || req.get_param_value("key") != "test-key") {
      res.status = 401;
      return;
    }
    const auto id = std::stoll(req.matches[1]);
    {
      std::lock_guard lock(mutex_);
      if (failure_rate_ > 0 && std::uniform_real_distribution<double>(0, 1)(rng_) < failure_rate_) {
        res.status = 500;
        return;
      }
    }
    const std::string url = "http://127.0.0.1:" + std::to_string(port_) + "/photos/" + std::to_string(id) + ".jpg";
    res.set_content(nlohmann::json{{"id", std::to_string(id)}, {"thumb_original_url", url}}.dump(),
                    "application/json");
  });
  http.Get(R"(/photos/(\d+)\.jpg)", [this](const httplib::Request& req, httplib::Response& res) {
    if (reject_) {
      res.status = 401;
      return;
    }
    const auto id = std::stoll(req.matches[1]);
    if (inject(id)) {
      res.status = 500;
      return;
    }
    res.set_content(photo_bytes(id), "image/jpeg");
  });
  port_ = http.bind_to_any_port("127.0.0.1");
  server_->thread = std::thread([this] { server_->http.listen_after_bind(); });
  server_->http.wait_until_ready();
}

ImageryStub::~ImageryStub() {
  server_->http.stop();
  if (server_->thread.joinable()) server_->thread.join();
}

void ImageryStub::set_failure_rate(double rate, std::uint64_t seed) {
  std::lock_guard lock(mutex_);
  failure_rate_ = rate;
  rng_.seed(seed);
}

void ImageryStub::fail_always(std::int64_t id) {
  std::lock_guard lock(mutex_);
  always_.insert(id);
}

void ImageryStub::fail_first(std::int64_t id, int n) {
  std::lock_guard lock(mutex_);
  first_[id] = n;
}

void ImageryStub::clear_failures() {
  std::lock_guard lock(mutex_);
  failure_rate_ = 0;
  always_.clear();
  first_.clear();
}

bool ImageryStub::inject(std::int64_t id) {
  std::lock_guard lock(mutex_);
  ++photo_requests_[id];
  if (always_.contains(id)) return true;
  if (auto it = first_.find(id); it != first_.end() && it->second > 0) {
    --it->second;
    return true;
  }
  return failure_rate_ > 0 && std::uniform_real_distribution<double>(0, 1)(rng_) < failure_rate_;
}

std::string ImageryStub::tile_url() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/tiles/{z}/{x}/{y}.json?key={key}";
}

std::string ImageryStub::lookup_url() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/lookup/{id}?key={key}";
}

std::string ImageryStub::photo_bytes(std::int64_t id) {
  std::string bytes = "\xFF\xD8\xFF\xE0stub-photo-" + std::to_string(id) + "-";
  bytes.append(static_cast<std::size_t>(64 + id % 97), static_cast<char>('a' + id % 26));
  return bytes;
}

int ImageryStub::photo_requests(std::int64_t id) const {
  std::lock_guard lock(mutex_);
  auto it = photo_requests_.find(id);
  return it == photo_requests_.end() ? 0 : it->second;
}

int ImageryStub::total_photo_requests() const {
  std::lock_guard lock(mutex_);
  int n = 0;
  for (const auto& [id, c] : photo_requests_) n += c;
  return n;
}

std::string ImageryStub::tile_payload(int z, int x, int y) const {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& m : images_) {
    if (z != zoom_ || oracle::slippy_x(m.position.lon, z) != x || oracle::slippy_y(m.position.lat, z) != y) continue;
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {m.position.lon, m.position.lat}}}},
                        {"properties",
                         {{"id", m.image_id},
                          {"sequence_id", m.sequence_id},
                          {"compass_angle", m.compass_angle},
                          {"captured_at", m.captured_at},
                          {"is_pano", m.is_pano}}}});
  }
  return nlohmann::json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

std::vector<svkit::ImageMeta> scatter_images(const svkit::BoundingBox& bbox, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lon(bbox.west, bbox.east);
  std::uniform_real_distribution<double> lat(bbox.south, bbox.north);
  std::vector<svkit::ImageMeta> out;
  for (int i = 0; i < n; ++i) {
    svkit::ImageMeta m;
    m.image_id = 1001 + i;
    m.sequence_id = "seq" + std::to_string(i / 10);
    m.compass_angle = (i * 37) % 360;
    m.position = {lon(rng), lat(rng)};
    m.captured_at = 1'690'000'000'000LL + i;
    m.is_pano = i % 3 == 0;
    out.push_back(m);
  }
  return out;
}

}  // namespace stub
