// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed here.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "imagery_stub.hpp"
#include "oracles.hpp"
#include "svkit/backend/http_api.hpp"
#include "svkit/backend/service.hpp"
#include "svkit/export.hpp"
#include "svkit/ingest.hpp"
#include "svkit/panorama.hpp"
#include "svkit/quality.hpp"
#include "svkit/sampler.hpp"
#include "svkit/segmentation.hpp"

using namespace svkit;
namespace fs = std::filesystem;
using SteadyClock = std::chrono::steady_clock;

namespace {

// Collects failures for one criterion; the first few are printed.
struct Check {
  std::vector<std::string> failures;
  std::size_t checks = 0;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
  bool ok() const { return failures.empty(); }
  void note(const std::string& text) { notes.push_back(text); }

  std::vector<std::string> notes;
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<void(Check&)> body;
};

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("svkit_accept_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string str(double v) {
  std::ostringstream o;
  o << v;
  return o.str();
}

// ---------------------------------------------------------------- quality

void quality_boundary(Check& ck) {
  const double grid[] = {0.30, 0.35, 0.36, 0.44, 0.45, 0.80, 0.81, 0.90};
  // Rows are T, columns C, both in grid order. Worked by hand from
  // T > 0.35 and C + max(0, T - 0.8) > 0.35.
  const char* truth[] = {
      "00000000",  // T=.30
      "00000000",  // T=.35
      "00111111",  // T=.36
      "00111111",  // T=.44
      "00111111",  // T=.45
      "00111111",  // T=.80
      "01111111",  // T=.81
      "11111111",  // T=.90
  };
  const QualityThresholds th{0.35, 0.35, 0.8};
  for (int ti = 0; ti < 8; ++ti) {
    for (int ci = 0; ci < 8; ++ci) {
      const auto v = quality_pass(grid[ci], grid[ti], th);
      const bool expected = truth[ti][ci] == '1';
      ck.expect(v.passed == expected, "C=" + str(grid[ci]) + " T=" + str(grid[ti]));
      if (!expected) {
        const auto want = grid[ti] <= 0.35 ? RejectReason::LowTone : RejectReason::LowContrast;
        ck.expect(v.reason == want, "reason at C=" + str(grid[ci]) + " T=" + str(grid[ti]));
      } else {
        ck.expect(!v.reason.has_value(), "passing verdict carries a reason");
      }
    }
  }
}

// ------------------------------------------------------------- panoramas

std::vector<int> random_centers(std::mt19937_64& rng, int width, int min_gap) {
  std::uniform_int_distribution<int> count(1, 3), col(0, width - 1);
  const int n = count(rng);
  for (;;) {
    std::vector<int> c;
    for (int i = 0; i < n; ++i) c.push_back(col(rng));
    bool ok = true;
    for (std::size_t i = 0; i < c.size() && ok; ++i) {
      for (std::size_t j = i + 1; j < c.size() && ok; ++j) ok = wrap_distance(c[i], c[j], width) >= min_gap;
    }
    if (ok) {
      std::sort(c.begin(), c.end());
      return c;
    }
  }
}

void center_line_oracle(Check& ck) {
  constexpr int W = 800, H = 400;
  std::mt19937_64 rng(20240611);
  std::size_t truth_total = 0, recalled = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto centers = random_centers(rng, W, 210);
    const double half_width = 16 + static_cast<double>(rng() % 16);
    const auto pano = synthesize_road_panorama(W, H, centers, half_width);
    const auto mask = road_mask(pano.labels);
    const auto analysis = analyze_panorama(mask, trial);
    const auto found = analysis.centers.columns();

    for (std::size_t i = 0; i < found.size(); ++i) {
      for (std::size_t j = i + 1; j < found.size(); ++j) {
        ck.expect(wrap_distance(found[i], found[j], W) > 2, "duplicate center in trial " + std::to_string(trial));
      }
    }
    for (int c : centers) {
      ++truth_total;
      if (std::any_of(found.begin(), found.end(), [&](int f) { return wrap_distance(f, c, W) <= 2; })) ++recalled;
    }
    // Every detection is within tolerance of some road.
    for (int f : found) {
      ck.expect(std::any_of(centers.begin(), centers.end(), [&](int c) { return wrap_distance(f, c, W) <= 2; }),
                "spurious center " + std::to_string(f) + " in trial " + std::to_string(trial));
    }

    const auto ring = oracle::ring_scores(mask, 0.125);
    for (int c : centers) {
      const int brute = oracle::windowed_argmax(ring.r, c, W / 8);
      ck.expect(std::find(found.begin(), found.end(), brute) != found.end(),
                "trial " + std::to_string(trial) + ": oracle " + std::to_string(brute) + " not detected");
    }
    ck.expect(found.size() == centers.size(), "trial " + std::to_string(trial) + ": count " +
                                                  std::to_string(found.size()) + " vs " +
                                                  std::to_string(centers.size()));
  }
  const double recall = static_cast<double>(recalled) / static_cast<double>(truth_total);
  ck.note("roads " + std::to_string(truth_total) + ", recall " + str(recall));
  ck.expect(recall >= 0.98, "recall " + str(recall));
}

RoadMask rotate(const RoadMask& m, int shift) {
  RoadMask out(m.width(), m.height());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) out.set(r, (c + shift) % m.width(), m.at(r, c));
  }
  return out;
}

void score_identity(Check& ck) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 40 + static_cast<int>(rng() % 200);
    const int h = 8 + static_cast<int>(rng() % 120);
    const int density = 2 + static_cast<int>(rng() % 6);
    RoadMask m(w, h);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) m.set(r, c, rng() % static_cast<unsigned>(density) == 0);
    }
    const auto s = column_road_scores(prepare_extended_mask(m), 0.125);
    const auto o = oracle::ring_scores(m, 0.125);
    for (std::size_t x = 0; x < s.size(); ++x) {
      const double identity = s.reach[x] + 0.125 * s.support[x];
      ck.expect(std::abs(s.score[x] - identity) <= 1e-9, "R != B + kC at column " + std::to_string(x));
      const std::size_t rx = x % static_cast<std::size_t>(w);
      if (static_cast<int>(x) < w) {
        ck.expect(s.reach[x] == o.b[rx] && s.support[x] == o.c[rx], "B/C differ from the ring oracle");
      }
    }
  }

  // Rotating the panorama rotates its centers.
  constexpr int W = 800, H = 400;
  for (int trial = 0; trial < 40; ++trial) {
    const auto centers = random_centers(rng, W, 210);
    auto mask = road_mask(synthesize_road_panorama(W, H, centers, 20).labels);
    for (int i = 0; i < 300; ++i) mask.set(static_cast<int>(rng() % H), static_cast<int>(rng() % W), true);
    const auto base = analyze_panorama(mask, 1).centers.columns();
    const int shift = static_cast<int>(rng() % W);
    const auto moved = analyze_panorama(rotate(mask, shift), 1).centers.columns();
    ck.expect(base.size() == moved.size(), "rotation changed the number of centers");
    for (int b : base) {
      const int target = (b + shift) % W;
      ck.expect(std::any_of(moved.begin(), moved.end(), [&](int m) { return wrap_distance(m, target, W) <= 1; }),
                "center " + std::to_string(b) + " did not follow a shift of " + std::to_string(shift));
    }
  }
}

void crop_geometry(Check& ck) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const int W = 400 + 4 * static_cast<int>(rng() % 600) + static_cast<int>(rng() % 4);
    const int H = W / 2;
    const auto centers = random_centers(rng, W, W * 27 / 100);
    const auto analysis = analyze_panorama(road_mask(synthesize_road_panorama(W, H, centers, W / 40.0).labels), 9);
    ck.expect(analysis.crops.size() == 3 * analysis.centers.size(), "three crops per center");
    const int shift = static_cast<int>(std::llround(W / 12.0));
    for (const auto& c : analysis.centers.centers) {
      std::multiset<int> offsets;
      for (const auto& s : analysis.crops) {
        if (s.center_x != c.x) continue;
        ck.expect(s.window.width * 3 == s.window.height * 4, "crop is not 4:3");
        ck.expect(s.window.width > 0 && s.window.height <= H, "crop does not fit");
        int d = ((s.view_x - c.x) % W + W) % W;
        if (d > W / 2) d -= W;
        offsets.insert(d);
        ck.expect(((s.window.x0 + s.window.width / 2) % W) == s.view_x, "window not centered on its view");
      }
      ck.expect(offsets == std::multiset<int>{-shift, 0, shift},
                "offsets around " + std::to_string(c.x) + " in W=" + std::to_string(W));
    }
  }

  // Painted gradient: every output pixel is the source pixel at the wrapped
  // position, for windows straddling the seam.
  const int W = 1200, H = 600;
  Image img(W, H, 3);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      auto* p = img.pixel(r, c);
      p[0] = static_cast<std::uint8_t>(c & 0xff);
      p[1] = static_cast<std::uint8_t>(c >> 8);
      p[2] = static_cast<std::uint8_t>(r & 0xff);
    }
  }
  for (int center : {0, 5, 50, 100, 1100, 1150, 1199}) {
    for (const auto& spec : plan_crops(center, W, H)) {
      const auto out = apply_crop(img, spec);
      bool exact = out.width() == spec.window.width && out.height() == spec.window.height;
      for (int r = 0; r < out.height() && exact; ++r) {
        for (int c = 0; c < out.width() && exact; ++c) {
          const auto* a = out.pixel(r, c);
          const auto* b = img.pixel(spec.window.y0 + r, (spec.window.x0 + c) % W);
          exact = a[0] == b[0] && a[1] == b[1] && a[2] == b[2];
        }
      }
      ck.expect(exact, "seam crop differs at center " + std::to_string(center));
    }
  }
}

// ----------------------------------------------------------------- ingest

void ingest_resilience(Check& ck) {
  const BoundingBox box{4.88, 52.36, 4.92, 52.38};
  const auto images = stub::scatter_images(box, 200, 99);
  stub::ImageryStub server(images);
  server.set_failure_rate(0.3, 13);
  for (std::int64_t id : {1003, 1050, 1111}) server.fail_always(id);
  CurlFetcher fetcher;
  TempDir dir;

  IngestConfig cfg;
  cfg.out_dir = dir.path;
  cfg.endpoints = {server.tile_url(), server.lookup_url(), "thumb_original_url", "test-key"};
  cfg.policy = {5, Millis(100), 2.0, Millis(1000)};
  cfg.requests_per_second = 0;
  cfg.workers = 4;
  std::atomic<std::int64_t> slept_ms{0};
  cfg.sleep = [&](Millis d) { slept_ms += d.count(); };
  std::mutex mu;
  std::vector<std::vector<Millis>> delay_runs;
  cfg.on_result = [&](const ImageMeta&, const DownloadResult& r) {
    std::lock_guard lock(mu);
    delay_runs.push_back(r.delays);
  };

  // Interrupted first pass.
  std::stop_source stop;
  std::atomic<int> seen{0};
  auto first_cfg = cfg;
  first_cfg.on_result = [&](const ImageMeta& m, const DownloadResult& r) {
    cfg.on_result(m, r);
    if (++seen == 60) stop.request_stop();
  };
  const auto first = run_ingest(box, first_cfg, fetcher, stop.get_token());
  ck.expect(first.interrupted, "first pass was not interrupted");
  ck.expect(first.downloaded + first.failed + first.skipped < 200, "interrupted pass handled every image");

  auto on_disk = [&] {
    std::set<std::int64_t> ids;
    for (const auto& m : images) {
      if (fs::exists(image_path(dir.path, m))) ids.insert(m.image_id);
    }
    return ids;
  };
  const auto present = on_disk();
  std::map<std::int64_t, int> requests_before;
  for (auto id : present) requests_before[id] = server.photo_requests(id);

  // Resume: only missing photos are requested.
  const auto second = run_ingest(box, cfg, fetcher);
  ck.expect(!second.interrupted, "second pass interrupted");
  ck.expect(second.skipped == present.size(), "resume skipped " + std::to_string(second.skipped) + " of " +
                                                  std::to_string(present.size()) + " present");
  ck.expect(second.downloaded + second.failed == 200 - present.size(), "resume did not cover the missing photos");
  for (auto id : present) {
    ck.expect(server.photo_requests(id) == requests_before[id], "present photo " + std::to_string(id) + " refetched");
  }

  const auto final_disk = on_disk();
  const auto failed_list = read_id_list(dir.path / "failed_ids.txt");
  const std::set<std::int64_t> failed(failed_list.begin(), failed_list.end());
  std::set<std::int64_t> all;
  for (const auto& m : images) all.insert(m.image_id);
  std::set<std::int64_t> unioned = final_disk;
  unioned.insert(failed.begin(), failed.end());
  ck.expect(unioned == all, "downloaded U failed != all 200 ids");
  for (auto id : failed) ck.expect(!final_disk.contains(id), "id both downloaded and failed");
  for (std::int64_t id : {1003, 1050, 1111}) ck.expect(failed.contains(id), "always-failing id not recorded");
  for (const auto& m : images) {
    if (!final_disk.contains(m.image_id)) continue;
    std::ifstream in(image_path(dir.path, m), std::ios::binary);
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    ck.expect(bytes == stub::ImageryStub::photo_bytes(m.image_id), "corrupt photo " + std::to_string(m.image_id));
  }

  std::size_t retried = 0;
  for (const auto& d : delay_runs) {
    if (d.size() > 1) ++retried;
    for (std::size_t i = 1; i < d.size(); ++i) ck.expect(d[i] >= d[i - 1], "back-off delay decreased");
  }
  ck.note("interrupted pass: " + std::to_string(present.size()) + " on disk; resume downloaded " +
          std::to_string(second.downloaded) + ", failed " + std::to_string(second.failed) + ", skipped " +
          std::to_string(second.skipped));
  ck.note("final: " + std::to_string(final_disk.size()) + " downloaded, " + std::to_string(failed.size()) +
          " failed, " + std::to_string(retried) + " images retried more than once, " +
          std::to_string(server.total_photo_requests()) + " photo requests");
  ck.expect(retried > 0, "no image needed more than one retry; failure injection inactive");
}

// ---------------------------------------------------------------- backend

using namespace svkit::backend;

struct SessionModel {
  SessionIds ids;
  std::set<std::int64_t> rated;
  CategoryCounts counts{};
  std::optional<std::int64_t> last;
  int last_cat = 0;
  bool undo_ok = false;
};

void api_conformance(Check& ck) {
  auto store = make_memory_store();
  constexpr int kImages = 160;
  for (int i = 1; i <= kImages; ++i) {
    store->upsert_image({i, "https://img/" + std::to_string(i), "Amsterdam", {4.9, 52.3}, i % 9 != 0});
  }
  SurveyService svc(*store, system_clock_us, random_cookie_hash, 31);

  constexpr int kThreads = 5, kSessions = 50, kCallsPerThread = 2400;
  std::vector<SessionModel> models(kSessions);
  for (int s = 0; s < kSessions; ++s) {
    const auto r = dispatch(svc, "newperson", {{"age", std::to_string(18 + s)}, {"consent", "true"}});
    models[static_cast<std::size_t>(s)].ids = {r.body["session_id"], r.body["cookie_hash"]};
  }

  std::atomic<std::size_t> calls{0};
  std::mutex fail_mu;
  auto fail = [&](const std::string& what) {
    std::lock_guard lock(fail_mu);
    ck.expect(false, what);
  };

  // Phase 1: each thread owns ten sessions and predicts every response;
  // threads run concurrently against one service and store.
  auto owner = [&](int t) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(1000 + t));
    for (int i = 0; i < kCallsPerThread; ++i) {
      auto& m = models[static_cast<std::size_t>(t * (kSessions / kThreads)) + rng() % (kSessions / kThreads)];
      const std::string sid = std::to_string(m.ids.session_id);
      const auto op = rng() % 20;
      ++calls;
      if (op < 4) {
        const auto r = dispatch(svc, "fetch", {{"session_id", sid}});
        if (r.status == 200) {
          if (m.rated.contains(r.body["image_id"].get<std::int64_t>())) fail("fetch returned a rated image");
          if (r.body["image_id"].get<std::int64_t>() % 9 == 0) fail("fetch returned a disabled image");
        } else if (r.body["error"] != "Exhausted") {
          fail("fetch: " + r.body.dump());
        }
      } else if (op < 7) {
        const auto r = dispatch(svc, "undo", {{"session_id", sid}, {"cookie_hash", m.ids.cookie_hash}});
        if (m.undo_ok) {
          if (r.status != 200) fail("undo refused: " + r.body.dump());
          m.rated.erase(*m.last);
          --m.counts[static_cast<std::size_t>(m.last_cat - 1)];
          m.undo_ok = false;
          if (r.status == 200 && r.body != counts_json(m.counts)) fail("undo counts " + r.body.dump());
        } else if (r.status != 409 || r.body.dump() != R"({"error":"UndoUnavailable"})") {
          fail("undo should be unavailable: " + r.body.dump());
        }
      } else if (op < 8) {
        const auto r = dispatch(svc, "countratingsbycategory", {{"session_id", sid}});
        if (r.body != counts_json(m.counts)) fail("count mismatch " + r.body.dump());
      } else if (op < 9) {
        // Forged cookie.
        const auto r = dispatch(svc, "new", {{"session_id", sid}, {"cookie_hash", std::string(32, '0')},
                                             {"image_id", "1"}, {"category_id", "1"}, {"rating", "3"}});
        if (r.status != 401) fail("forged cookie accepted");
      } else if (op < 10) {
        const auto bad_age = std::to_string(rng() % 18);
        const bool consent = rng() % 2 == 0;
        const auto r = dispatch(svc, "newperson", {{"age", consent ? bad_age : "40"},
                                                   {"consent", consent ? "true" : "false"}});
        if (r.status != 400) fail("underage or non-consenting participant accepted");
      } else {
        const std::int64_t image = static_cast<std::int64_t>(rng() % kImages + 1);
        const int cat = static_cast<int>(rng() % 5 + 1);
        const int score = static_cast<int>(rng() % 7);  // 0 and 6 are out of range
        const auto r = dispatch(svc, "new", {{"session_id", sid}, {"cookie_hash", m.ids.cookie_hash},
                                             {"image_id", std::to_string(image)}, {"category_id", std::to_string(cat)},
                                             {"rating", std::to_string(score)}});
        std::string expected;
        if (score < 1 || score > 5) {
          expected = "ValidationError";
        } else if (image % 9 == 0) {
          expected = "NotFound";
        } else if (m.rated.contains(image)) {
          expected = "Duplicate";
        } else if (m.counts[static_cast<std::size_t>(cat - 1)] >= 20) {
          expected = "CategoryFull";
        }
        if (expected.empty()) {
          m.rated.insert(image);
          ++m.counts[static_cast<std::size_t>(cat - 1)];
          m.last = image;
          m.last_cat = cat;
          m.undo_ok = true;
          if (r.status != 200 || r.body != counts_json(m.counts)) fail("new: " + r.body.dump());
        } else if (r.body.value("error", "") != expected) {
          fail("new: expected " + expected + ", got " + r.body.dump());
        }
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < kThreads; ++t) threads.emplace_back(owner, t);
  }

  // Phase 2: every thread hits every session; only store invariants hold.
  auto shared = [&](int t) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(5000 + t));
    for (int i = 0; i < 600; ++i) {
      const auto& m = models[rng() % kSessions];
      const std::string sid = std::to_string(m.ids.session_id);
      ++calls;
      switch (rng() % 3) {
        case 0: dispatch(svc, "undo", {{"session_id", sid}, {"cookie_hash", m.ids.cookie_hash}}); break;
        case 1: dispatch(svc, "fetch", {{"session_id", sid}}); break;
        default:
          dispatch(svc, "new", {{"session_id", sid}, {"cookie_hash", m.ids.cookie_hash},
                                {"image_id", std::to_string(rng() % kImages + 1)},
                                {"category_id", std::to_string(rng() % 5 + 1)}, {"rating", "3"}});
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < kThreads; ++t) threads.emplace_back(shared, t);
  }

  ck.note(std::to_string(calls.load()) + " calls, " + std::to_string(store->ratings().size()) +
          " ratings stored across " + std::to_string(kSessions) + " sessions");
  ck.expect(calls.load() >= 10000, "only " + std::to_string(calls.load()) + " calls");
  std::set<std::pair<std::int64_t, std::int64_t>> pairs;
  std::map<std::int64_t, CategoryCounts> per_session;
  for (const auto& r : store->ratings()) {
    ck.expect(pairs.insert({r.session_id, r.image_id}).second, "duplicate (session, image)");
    ++per_session[r.session_id][static_cast<std::size_t>(r.category_id - 1)];
    ck.expect(r.image_id % 9 != 0, "rating on a disabled image");
  }
  for (const auto& [sid, counts] : per_session) {
    for (int c : counts) ck.expect(c <= 20, "category over 20 in session " + std::to_string(sid));
    ck.expect(total(counts) <= 100, "session over 100 ratings");
  }
  for (const auto& p : store->participants()) {
    ck.expect(p.consent && p.age >= 18, "stored participant without consent or under 18");
  }
  ck.expect(store->participants().size() == kSessions, "rejected participants were stored");
}

void undo_protocol(Check& ck) {
  auto run_script = [&](const std::function<ApiResponse(const std::string&, const Params&)>& call,
                        const std::string& label) {
    auto session = [&] {
      const auto r = call("newperson", {{"age", "26"}, {"consent", "true"}});
      return std::pair{r.body["session_id"].dump(), r.body["cookie_hash"].get<std::string>()};
    };
    auto rate = [&](const std::pair<std::string, std::string>& s, int image, int cat) {
      return call("new", {{"session_id", s.first}, {"cookie_hash", s.second}, {"image_id", std::to_string(image)},
                          {"category_id", std::to_string(cat)}, {"rating", "4"}});
    };
    auto undo = [&](const std::pair<std::string, std::string>& s) {
      return call("undo", {{"session_id", s.first}, {"cookie_hash", s.second}});
    };
    const std::string unavailable = R"({"error":"UndoUnavailable"})";
    const std::string zero = R"({"category_counts":{"1":0,"2":0,"3":0,"4":0,"5":0}})";

    // rate, undo, undo
    auto s = session();
    auto r = rate(s, 1, 1);
    ck.expect(r.status == 200 && r.body.dump() == R"({"category_counts":{"1":1,"2":0,"3":0,"4":0,"5":0}})",
              label + " rate-undo-undo: rate " + r.body.dump());
    r = undo(s);
    ck.expect(r.status == 200 && r.body.dump() == zero, label + " rate-undo-undo: first undo " + r.body.dump());
    r = undo(s);
    ck.expect(r.status == 409 && r.body.dump() == unavailable, label + " rate-undo-undo: second undo " + r.body.dump());

    // rate A, rate B, undo
    s = session();
    rate(s, 1, 1);
    rate(s, 2, 3);
    r = undo(s);
    ck.expect(r.status == 200 && r.body.dump() == R"({"category_counts":{"1":1,"2":0,"3":0,"4":0,"5":0}})",
              label + " rate-rate-undo: " + r.body.dump());
    r = rate(s, 1, 2);
    ck.expect(r.status == 409 && r.body.dump() == R"({"error":"Duplicate"})", label + " A survived the undo");
    r = rate(s, 2, 3);
    ck.expect(r.status == 200, label + " B could be rated again after undo");
    r = undo(s);
    ck.expect(r.status == 200, label + " undo after a fresh rating");
    r = undo(s);
    ck.expect(r.status == 409 && r.body.dump() == unavailable, label + " rate-rate-undo: second undo");

    // undo first
    s = session();
    r = undo(s);
    ck.expect(r.status == 409 && r.body.dump() == unavailable, label + " undo-first: " + r.body.dump());
  };

  {
    auto store = make_memory_store();
    for (int i = 1; i <= 3; ++i) store->upsert_image({i, "u", "c", {}, true});
    SurveyService svc(*store);
    run_script([&](const std::string& f, const Params& p) { return dispatch(svc, f, p); }, "[dispatch]");
  }
  {
    TempDir dir;
    auto store = make_sqlite_store(dir.path / "survey.db");
    for (int i = 1; i <= 3; ++i) store->upsert_image({i, "u", "c", {}, true});
    SurveyService svc(*store);
    ApiServer server(svc, ServerConfig{"127.0.0.1", 0, {}, 2});
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);
    run_script(
        [&](const std::string& f, const Params& p) {
          httplib::Params form(p.begin(), p.end());
          auto res = cli.Post("/api/v1/" + f, form);
          if (!res) return ApiResponse{0, {{"error", "transport"}}};
          return ApiResponse{res->status, nlohmann::json::parse(res->body)};
        },
        "[http+sqlite]");
    server.stop();
  }
}

// ---------------------------------------------------------------- sampler

void sampler_field(Check& ck) {
  const double m_per_deg = kEarthRadiusM * std::numbers::pi / 180.0;
  const double south = 52.37, west = 4.90;
  const double dlat = 100.0 / m_per_deg;
  const double dlon = 100.0 / (m_per_deg * std::cos((south + dlat / 2) * std::numbers::pi / 180.0));
  const BoundingBox box{west, south, west + dlon, south + dlat};
  const auto grid = build_grid({box, 20.0});
  ck.expect(grid.size() == 36, "grid has " + std::to_string(grid.size()) + " points");

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lon(box.west - dlon * 0.2, box.east + dlon * 0.2);
  std::uniform_real_distribution<double> lat(box.south - dlat * 0.2, box.north + dlat * 0.2);
  std::vector<PlacedImage> images;
  for (int i = 0; i < 400; ++i) images.push_back({i + 1, {lon(rng), lat(rng)}});
  const auto chosen = assign_nearest(images, grid, 20.0);
  ck.expect(!chosen.empty() && chosen.size() <= grid.size(), "selection size " + std::to_string(chosen.size()));
  const double radius = 20.0 / std::sqrt(2.0);
  for (auto id : chosen) {
    const auto& p = images[static_cast<std::size_t>(id - 1)].position;
    double best = 1e18;
    for (const auto& g : grid) best = std::min(best, oracle::haversine_m(g, p));
    ck.expect(best <= radius + 1e-9, "image " + std::to_string(id) + " is " + str(best) + " m from the grid");
  }
  // Each grid point with an image in range got the nearest one.
  for (const auto& g : grid) {
    const PlacedImage* best = nullptr;
    double best_d = 1e18;
    for (const auto& img : images) {
      const double d = oracle::haversine_m(g, img.position);
      if (d <= radius && (d < best_d || (d == best_d && img.image_id < best->image_id))) {
        best = &img;
        best_d = d;
      }
    }
    if (best) ck.expect(std::binary_search(chosen.begin(), chosen.end(), best->image_id), "nearest image missing");
  }

  std::vector<std::int64_t> pool(500);
  std::iota(pool.begin(), pool.end(), 1);
  for (std::uint64_t seed : {1ULL, 2ULL, 12345ULL}) {
    const auto a = downsample(pool, 50, seed);
    ck.expect(a == downsample(pool, 50, seed), "downsample not deterministic for seed " + std::to_string(seed));
    ck.expect(a.size() == 50, "downsample size");
  }
  ck.expect(downsample(pool, 50, 1) != downsample(pool, 50, 2), "seed has no effect");
}

// ----------------------------------------------------------------- export

void export_checks(Check& ck) {
  // Hexbin against the brute-force grouping.
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> lon(4.75, 5.05), lat(52.28, 52.43);
  std::uniform_int_distribution<int> score(1, 5);
  std::vector<ScoredPoint> pts;
  std::vector<std::pair<LonLat, double>> raw;
  for (int i = 0; i < 200; ++i) {
    const LonLat p{lon(rng), lat(rng)};
    const double s = score(rng);
    pts.push_back({p, s});
    raw.push_back({p, s});
  }
  const auto grid = hexbin_aggregate(pts);
  const auto truth = oracle::hex_group_by(raw, 650, 600);
  ck.expect(grid.bins.size() == truth.size(), "bin count " + std::to_string(grid.bins.size()) + " vs " +
                                                  std::to_string(truth.size()));
  for (const auto& b : grid.bins) {
    const auto it = truth.find({b.q, b.r});
    if (it == truth.end()) {
      ck.expect(false, "unexpected bin");
      continue;
    }
    ck.expect(b.count == it->second.count, "bin count differs");
    ck.expect(b.mean == it->second.sum / static_cast<double>(it->second.count), "bin mean differs");
  }

  // Anonymized CSV audit.
  std::vector<RatingView> views;
  const char* postcodes[] = {"3584 CB", "1012AB", "SW1A 1AA", "75008", "D02 X285", "10115", "K1A 0B1"};
  std::int64_t id = 0;
  for (std::int64_t s = 1; s <= 30; ++s) {
    const std::string cookie = random_cookie_hash();
    for (int k = 0; k < 5; ++k) {
      RatingView v;
      v.rating = {++id, 1'600'000'000'000'000 + s * 3'600'000'000LL + k * 6'000'000, s, 100 + id,
                  1 + k, 1 + static_cast<int>(rng() % 5)};
      v.cookie_hash = cookie;
      v.participant = {s, 18 + static_cast<int>(s % 50), 2000.0 + s, Education::Secondary, "male", "Netherlands",
                       postcodes[s % 7], true};
      views.push_back(v);
    }
  }
  const auto rows = anonymize(views, 77);
  const auto csv = to_csv(rows);
  ck.expect(!std::regex_search(csv, std::regex("[0-9a-fA-F]{32}")), "32-hex token in CSV");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  ck.expect(line == "id,timestamp,sess,image,cat,score,postcode,country,age,mgi,education,gender", "header");
  const std::regex redacted("^[A-Za-z0-9]?[^A-Za-z0-9]*$");
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    ck.expect(cols.size() >= 7 && std::regex_match(cols[6], redacted), "postcode not redacted: " + line);
    ck.expect(cols.size() >= 9 && std::stoi(cols[8]) >= 18, "age under 18: " + line);
  }
  ck.expect(lines == views.size(), "row count");
  for (const char* pc : postcodes) {
    ck.expect(csv.find(pc) == std::string::npos, std::string("full postcode present: ") + pc);
  }

  // Planted corpus: intervals drawn from a known mixture, some short sessions.
  std::vector<TimedRating> planted;
  std::vector<std::pair<std::int64_t, Timestamp>> flat;
  std::int64_t image = 0;
  for (std::int64_t s = 1; s <= 120; ++s) {
    const int n = s % 6 == 0 ? 100 : s % 11 == 0 ? 1 : static_cast<int>(rng() % 99 + 1);
    Timestamp t = 1'600'000'000'000'000 + static_cast<Timestamp>(rng() % 86'400) * 1'000'000;
    for (int k = 0; k < n; ++k) {
      if (k > 0) t += rng() % 4 == 0 ? 15'000'000 + static_cast<Timestamp>(rng() % 60'000'000)
                                     : 2'000'000 + static_cast<Timestamp>(rng() % 7'000'000);
      planted.push_back({s, ++image, t});
      flat.push_back({s, t});
    }
  }
  std::shuffle(planted.begin(), planted.end(), rng);
  const auto got = summary_stats(planted);
  const auto want = oracle::recompute_stats(flat);
  ck.expect(got.sessions_total == want.sessions, "sessions_total");
  ck.expect(got.sessions_ge_50 == want.ge50, "sessions_ge_50");
  ck.expect(got.sessions_eq_100 == want.eq100, "sessions_eq_100");
  ck.expect(got.median_completion_minutes == want.median_completion_min, "median completion");
  ck.expect(got.frac_completion_le_30min == want.frac_completion_30, "completion fraction");
  ck.expect(got.median_interval_seconds == want.median_interval_s, "median interval");
  ck.expect(got.frac_intervals_le_10s == want.frac_interval_10, "interval fraction");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"quality-filter boundary suite", 1, quality_boundary},
      {"center-line oracle", 30, center_line_oracle},
      {"score identity and rotation equivariance", 30, score_identity},
      {"crop geometry", 30, crop_geometry},
      {"ingest resilience", 120, ingest_resilience},
      {"API conformance fuzzer", 120, api_conformance},
      {"undo protocol", 30, undo_protocol},
      {"sampler", 30, sampler_field},
      {"export", 30, export_checks},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Check ck;
    const auto t0 = SteadyClock::now();
    std::string error;
    try {
      c.body(ck);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(SteadyClock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = ck.ok() && error.empty() && in_time;
    if (!pass) ++failed;
    std::printf("%s  %-42s %8.3f s (limit %g s, %zu checks)\n", pass ? "PASS" : "FAIL", c.name.c_str(), secs,
                c.limit_s, ck.checks);
    if (!error.empty()) std::printf("      exception: %s\n", error.c_str());
    if (!in_time) std::printf("      over the time limit\n");
    for (std::size_t i = 0; i < std::min<std::size_t>(ck.failures.size(), 5); ++i) {
      std::printf("      %s\n", ck.failures[i].c_str());
    }
    for (const auto& n : ck.notes) std::printf("      %s\n", n.c_str());
    if (ck.failures.size() > 5) std::printf("      ... %zu more\n", ck.failures.size() - 5);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
