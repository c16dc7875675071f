#include "svkit/panorama.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace svkit {
namespace {

int positive_mod(long long v, int m) {
  const long long r = v % m;
  return static_cast<int>(r < 0 ? r + m : r);
}

int padded(int width) { return (width + 3) / 4 * 4; }

// Peaks in the scipy.signal sense: strictly higher than the left neighbour,
// then (after any flat run) higher than the right one. Flat tops report
// their middle column; the first and last samples never qualify.
std::vector<std::size_t> local_maxima(const std::vector<double>& x) {
  std::vector<std::size_t> peaks;
  if (x.size() < 3) return peaks;
  const std::size_t last = x.size() - 1;
  std::size_t i = 1;
  while (i < last) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead < last && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        peaks.push_back((i + ahead - 1) / 2);
        i = ahead;
      }
    }
    ++i;
  }
  return peaks;
}

}  // namespace

ExtendedMask prepare_extended_mask(const RoadMask& mask) {
  if (mask.empty()) throw std::invalid_argument("cannot extend an empty road mask");
  const int width = mask.width();
  const int ring = padded(width);
  const int rows = mask.height() - mask.height() / 4;
  const int ext_width = ring + ring / 4;

  ExtendedMask em;
  em.original_width = width;
  em.original_height = mask.height();
  em.padded_width = ring;
  em.mask = RoadMask(ext_width, rows);
  for (int c = 0; c < ext_width; ++c) {
    const int ring_col = c < ring ? c : c - ring;
    const int src = std::min(ring_col, width - 1);
    for (int r = 0; r < rows; ++r) em.mask.set(r, c, mask.at(r, src));
  }
  return em;
}

ColumnScores column_road_scores(const RoadMask& mask, double k) {
  if (!(k > 0)) throw std::invalid_argument("k must be positive");
  const int rows = mask.height();
  const int half_start = rows - rows / 2;

  ColumnScores s;
  s.k = k;
  s.rows = rows;
  s.reach.assign(static_cast<std::size_t>(mask.width()), 0);
  s.support.assign(static_cast<std::size_t>(mask.width()), 0);
  s.score.assign(static_cast<std::size_t>(mask.width()), 0.0);
  for (int c = 0; c < mask.width(); ++c) {
    int top = -1;
    int support = 0;
    for (int r = 0; r < rows; ++r) {
      if (!mask.at(r, c)) continue;
      if (top < 0) top = r;
      if (r >= half_start) ++support;
    }
    const auto i = static_cast<std::size_t>(c);
    s.reach[i] = top < 0 ? 0 : rows - top;
    s.support[i] = support;
    s.score[i] = s.reach[i] + k * support;
  }
  return s;
}

ColumnScores column_road_scores(const ExtendedMask& em, double k) { return column_road_scores(em.mask, k); }

std::vector<int> CenterLineSet::columns() const {
  std::vector<int> out;
  out.reserve(centers.size());
  for (const auto& c : centers) out.push_back(c.x);
  return out;
}

CenterLineSet find_center_lines(const ColumnScores& scores, int width, const PeakParams& params) {
  if (width <= 0) throw std::invalid_argument("width must be positive");
  const double min_reach = params.min_reach * scores.rows;
  const double min_support = params.min_support * (scores.rows / 2.0);
  const int ring = params.wrap ? padded(width) : width;

  struct Candidate {
    std::size_t index;
    int x;
    double score;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p : local_maxima(scores.score)) {
    if (scores.reach[p] < min_reach || scores.support[p] < min_support) continue;
    int x = params.wrap ? positive_mod(static_cast<long long>(p), ring) : static_cast<int>(p);
    x = std::min(x, width - 1);
    candidates.push_back({p, x, scores.score[p]});
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.index < b.index;
  });

  const double exclusion = std::max(params.min_separation, params.dedup_tolerance) * width;
  auto distance = [&](int a, int b) { return params.wrap ? wrap_distance(a, b, width) : std::abs(a - b); };

  CenterLineSet out;
  for (const auto& cand : candidates) {
    const bool clear = std::all_of(out.centers.begin(), out.centers.end(), [&](const CenterLine& kept) {
      return kept.x != cand.x && distance(kept.x, cand.x) >= exclusion;
    });
    if (clear) out.centers.push_back({cand.x, cand.score});
  }
  std::sort(out.centers.begin(), out.centers.end(),
            [](const CenterLine& a, const CenterLine& b) { return a.x < b.x; });
  return out;
}

std::string_view to_string(CropOffset offset) {
  switch (offset) {
    case CropOffset::Left: return "left";
    case CropOffset::Center: return "center";
    case CropOffset::Right: return "right";
  }
  return "center";
}

std::vector<CropSpec> plan_crops(int center, int width, int height, std::int64_t source_image_id,
                                 const CropGeometry& geometry) {
  if (width <= 0 || height <= 0) throw CropError("panorama dimensions must be positive");
  if (center < 0 || center >= width) throw CropError("center outside [0, width)");
  const int unit = static_cast<int>(std::floor(width * geometry.field_of_view / 4.0));
  if (unit < 1) throw CropError("panorama too narrow for a 4:3 crop");
  const int crop_w = 4 * unit;
  const int crop_h = 3 * unit;
  if (crop_h > height) {
    throw CropError("crop height " + std::to_string(crop_h) + " exceeds panorama height " + std::to_string(height));
  }
  const int shift = static_cast<int>(std::llround(width * geometry.lateral_offset));
  const int y0 = std::clamp(height / 2 - crop_h / 2, 0, height - crop_h);

  std::vector<CropSpec> specs;
  specs.reserve(3);
  for (auto [offset, delta] : {std::pair{CropOffset::Left, -shift}, std::pair{CropOffset::Center, 0},
                               std::pair{CropOffset::Right, shift}}) {
    CropSpec spec;
    spec.source_image_id = source_image_id;
    spec.center_x = center;
    spec.offset = offset;
    spec.view_x = positive_mod(static_cast<long long>(center) + delta, width);
    spec.window = {positive_mod(static_cast<long long>(spec.view_x) - crop_w / 2, width), y0, crop_w, crop_h};
    specs.push_back(spec);
  }
  return specs;
}

Image apply_crop(const Image& image, const CropWindow& window) {
  if (window.width <= 0 || window.height <= 0) throw CropError("empty crop window");
  if (window.width > image.width()) throw CropError("crop wider than source image");
  if (window.y0 < 0 || window.y0 + window.height > image.height()) throw CropError("crop does not fit source height");

  const int channels = image.channels();
  Image out(window.width, window.height, channels);
  const auto px = static_cast<std::size_t>(channels);
  for (int r = 0; r < window.height; ++r) {
    int src_col = positive_mod(window.x0, image.width());
    for (int c = 0; c < window.width; ++c) {
      std::copy_n(image.pixel(window.y0 + r, src_col), px, out.pixel(r, c));
      if (++src_col == image.width()) src_col = 0;
    }
  }
  return out;
}

std::string crop_file_name(const CropSpec& spec) {
  return std::to_string(spec.source_image_id) + "_c" + std::to_string(spec.center_x) + "_" +
         std::string(to_string(spec.offset)) + ".jpg";
}

PanoramaAnalysis analyze_panorama(const RoadMask& mask, std::int64_t image_id, double k, const PeakParams& peaks,
                                  const CropGeometry& geometry) {
  PanoramaAnalysis out;
  const auto em = prepare_extended_mask(mask);
  out.scores = column_road_scores(em, k);
  PeakParams ring = peaks;
  ring.wrap = true;
  out.centers = find_center_lines(out.scores, mask.width(), ring);
  for (const auto& c : out.centers.centers) {
    auto specs = plan_crops(c.x, mask.width(), mask.height(), image_id, geometry);
    out.crops.insert(out.crops.end(), specs.begin(), specs.end());
  }
  return out;
}

}  // namespace svkit
