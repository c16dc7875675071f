#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "svkit/panorama.hpp"

using namespace svkit;

namespace {

RoadMask synth_mask(int w, int h, std::vector<int> centers, double hw) {
  return road_mask(synthesize_road_panorama(w, h, centers, hw).labels);
}

RoadMask column_mask(int rows, int first_road_row) {
  RoadMask m(1, rows);
  for (int r = first_road_row; r < rows; ++r) m.set(r, 0, true);
  return m;
}

}  // namespace

TEST_CASE("extended mask dimensions and wrap columns") {
  RoadMask m(400, 200);
  std::mt19937 rng(2);
  for (int r = 0; r < 200; ++r) {
    for (int c = 0; c < 400; ++c) m.set(r, c, rng() % 3 == 0);
  }
  const auto em = prepare_extended_mask(m);
  CHECK(em.mask.width() == 500);
  CHECK(em.mask.height() == 150);
  for (int r = 0; r < 150; ++r) {
    for (int c = 0; c < 100; ++c) CHECK(em.mask.at(r, c + 400) == em.mask.at(r, c));
    for (int c = 0; c < 400; ++c) REQUIRE(em.mask.at(r, c) == m.at(r, c));
  }
}

TEST_CASE("extended mask: empty, blank and bottom-quarter-only inputs") {
  CHECK_THROWS(prepare_extended_mask(RoadMask()));
  CHECK(prepare_extended_mask(RoadMask(400, 200)).mask.count() == 0);
  RoadMask bottom(400, 200);
  for (int r = 150; r < 200; ++r) {
    for (int c = 0; c < 400; ++c) bottom.set(r, c, true);
  }
  CHECK(prepare_extended_mask(bottom).mask.count() == 0);
}

TEST_CASE("extended mask pads widths that are not multiples of four") {
  RoadMask m(402, 8);
  for (int r = 0; r < 8; ++r) m.set(r, 401, true);
  const auto em = prepare_extended_mask(m);
  CHECK(em.padded_width == 404);
  CHECK(em.mask.width() == 505);
  CHECK(em.mask.at(0, 402));
  CHECK(em.mask.at(0, 403));
  CHECK_FALSE(em.mask.at(0, 404));
}

TEST_CASE("column scores from the definitions") {
  auto s = column_road_scores(column_mask(8, 4), 0.125);
  CHECK(s.reach[0] == 4);
  CHECK(s.support[0] == 4);
  CHECK(s.score[0] == 4.5);

  s = column_road_scores(RoadMask(1, 8));
  CHECK(s.reach[0] == 0);
  CHECK(s.support[0] == 0);
  CHECK(s.score[0] == 0.0);

  s = column_road_scores(column_mask(8, 0));
  CHECK(s.reach[0] == 8);
  CHECK(s.support[0] == 4);
  CHECK(s.score[0] == 8.5);

  CHECK_THROWS(column_road_scores(column_mask(8, 0), 0.0));
}

TEST_CASE("column scores match the ring oracle on random masks") {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    RoadMask m(80, 40);
    for (int r = 0; r < 40; ++r) {
      for (int c = 0; c < 80; ++c) m.set(r, c, rng() % 5 == 0);
    }
    const auto s = column_road_scores(prepare_extended_mask(m), 0.125);
    const auto o = oracle::ring_scores(m, 0.125);
    REQUIRE(s.size() == 100);
    for (std::size_t x = 0; x < s.size(); ++x) {
      const std::size_t rx = x % 80;
      CHECK(s.reach[x] == o.b[rx]);
      CHECK(s.support[x] == o.c[rx]);
      CHECK(s.score[x] == o.r[rx]);
    }
  }
}

TEST_CASE("two roads in W=400") {
  const auto mask = synth_mask(400, 200, {100, 300}, 10);
  const auto a = analyze_panorama(mask, 1);
  CHECK(a.centers.columns() == std::vector<int>{100, 300});
  CHECK(a.crops.size() == 6);
}

TEST_CASE("all-zero scores give no centers") {
  ColumnScores s;
  s.reach.assign(500, 0);
  s.support.assign(500, 0);
  s.score.assign(500, 0.0);
  s.rows = 150;
  CHECK(find_center_lines(s, 400).empty());
}

TEST_CASE("road across the seam is reported once") {
  for (int c : {0, 3, 10, 396, 399}) {
    const auto a = analyze_panorama(synth_mask(400, 200, {c}, 12), 1);
    REQUIRE(a.centers.size() == 1);
    CHECK(wrap_distance(a.centers.centers[0].x, c, 400) <= 1);
  }
}

TEST_CASE("scattered noise does not pass the gate") {
  RoadMask m(400, 200);
  std::mt19937 rng(3);
  for (int i = 0; i < 80; ++i) m.set(static_cast<int>(rng() % 200), static_cast<int>(rng() % 400), true);
  CHECK(analyze_panorama(m, 1).centers.empty());
}

TEST_CASE("crop plan for W=4000") {
  const auto specs = plan_crops(1000, 4000, 2000, 77);
  REQUIRE(specs.size() == 3);
  const int expected_view[] = {667, 1000, 1333};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(specs[i].window.width == 1000);
    CHECK(specs[i].window.height == 750);
    CHECK(specs[i].window.y0 == 625);
    CHECK(specs[i].view_x == expected_view[i]);
    CHECK(specs[i].window.x0 == expected_view[i] - 500);
    CHECK(specs[i].center_x == 1000);
  }
  CHECK(crop_file_name(specs[0]) == "77_c1000_left.jpg");
  CHECK(crop_file_name(specs[2]) == "77_c1000_right.jpg");
}

TEST_CASE("crop plan wraps at center 0 and rejects short images") {
  const auto specs = plan_crops(0, 4000, 2000);
  CHECK(specs[0].view_x == 3667);
  CHECK(specs[0].window.x0 == 3167);
  CHECK(specs[1].window.x0 == 3500);
  CHECK_THROWS_AS(plan_crops(0, 4000, 700), CropError);
  CHECK_THROWS_AS(plan_crops(4000, 4000, 2000), CropError);
  for (int w : {800, 801, 999, 1203}) {
    for (const auto& s : plan_crops(w / 2, w, w / 2)) CHECK(s.window.width * 3 == s.window.height * 4);
  }
}

TEST_CASE("apply_crop copies columns modulo the width") {
  const int w = 64;
  Image img(w, 20, 3);
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < w; ++c) {
      auto* p = img.pixel(r, c);
      p[0] = static_cast<std::uint8_t>(c);
      p[1] = static_cast<std::uint8_t>(r);
      p[2] = 9;
    }
  }
  const auto out = apply_crop(img, CropWindow{w - 10, 4, 16, 12});
  CHECK(out.width() == 16);
  CHECK(out.height() == 12);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 16; ++c) {
      CHECK(out.pixel(r, c)[0] == (w - 10 + c) % w);
      CHECK(out.pixel(r, c)[1] == r + 4);
    }
  }
  const auto inner = apply_crop(img, CropWindow{5, 0, 8, 6});
  CHECK(inner.pixel(0, 0)[0] == 5);
  CHECK_THROWS_AS(apply_crop(img, CropWindow{0, 15, 8, 6}), CropError);
  CHECK_THROWS_AS(apply_crop(img, CropWindow{0, 0, 65, 6}), CropError);
}

TEST_CASE("analysis is deterministic") {
  const auto mask = synth_mask(800, 400, {50, 420}, 20);
  CHECK(analyze_panorama(mask, 3).centers == analyze_panorama(mask, 3).centers);
  CHECK(analyze_panorama(mask, 3).crops == analyze_panorama(mask, 3).crops);
}
