#include "svkit/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace svkit {

namespace fs = std::filesystem;

const LabelMap& LabelMap::cityscapes() {
  static const LabelMap map({{0, "road"},        {1, "sidewalk"},       {2, "building"},     {3, "wall"},
                             {4, "fence"},       {5, "pole"},           {6, "traffic light"}, {7, "traffic sign"},
                             {8, "vegetation"},  {9, "terrain"},        {10, "sky"},          {11, "person"},
                             {12, "rider"},      {13, "car"},           {14, "truck"},        {15, "bus"},
                             {16, "train"},      {17, "motorcycle"},    {18, "bicycle"}});
  return map;
}

LabelMap LabelMap::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SegmentationError("cannot read label map " + path.string());
  std::map<ClassId, std::string> names;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    int id = -1;
    try {
      id = std::stoi(line.substr(0, tab));
    } catch (const std::exception&) {
    }
    if (tab == std::string::npos || id < 0 || id > 255 || tab + 1 >= line.size()) {
      throw SegmentationError(path.string() + ":" + std::to_string(line_no) + ": expected id<TAB>name");
    }
    names[static_cast<ClassId>(id)] = line.substr(tab + 1);
  }
  return LabelMap(std::move(names));
}

const std::string& LabelMap::name(ClassId id) const {
  auto it = names_.find(id);
  if (it == names_.end()) throw SegmentationError("class id " + std::to_string(id) + " not in label map");
  return it->second;
}

std::optional<ClassId> LabelMap::find(const std::string& name) const {
  for (const auto& [id, n] : names_) {
    if (n == name) return id;
  }
  return std::nullopt;
}

void LabelMatrix::validate() const {
  std::array<bool, 256> seen{};
  for (ClassId v : labels.cells()) seen[v] = true;
  for (int id = 0; id < 256; ++id) {
    if (seen[static_cast<std::size_t>(id)] && !label_map.contains(static_cast<ClassId>(id))) {
      throw SegmentationError("class id " + std::to_string(id) + " has no label map entry");
    }
  }
}

std::size_t RoadMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.cells().begin(), bits_.cells().end(), std::uint8_t{1}));
}

fs::path label_sidecar_path(const fs::path& image_path) {
  return image_path.parent_path() / (image_path.stem().string() + ".labels.png");
}

LabelMatrix load_label_matrix(const fs::path& path, const LabelMap& label_map,
                              std::optional<std::pair<int, int>> expected_size) {
  LabelMatrix m;
  try {
    m.labels = read_gray8(path);
  } catch (const ImageIoError& e) {
    throw SegmentationError(e.what());
  }
  if (expected_size && (m.width() != expected_size->first || m.height() != expected_size->second)) {
    std::ostringstream msg;
    msg << path.string() << ": label matrix is " << m.width() << "x" << m.height() << ", expected "
        << expected_size->first << "x" << expected_size->second;
    throw SegmentationError(msg.str());
  }
  m.label_map = label_map;
  m.validate();
  return m;
}

void save_label_matrix(const fs::path& path, const LabelMatrix& matrix) {
  matrix.validate();
  try {
    write_gray8_png(path, matrix.labels);
  } catch (const ImageIoError& e) {
    throw SegmentationError(e.what());
  }
}

RoadMask road_mask(const LabelMatrix& matrix) {
  const auto road = matrix.label_map.find(kRoadClass);
  if (!road) throw SegmentationError("label map has no \"road\" class");
  RoadMask mask(matrix.width(), matrix.height());
  for (int r = 0; r < matrix.height(); ++r) {
    for (int c = 0; c < matrix.width(); ++c) mask.set(r, c, matrix.labels(r, c) == *road);
  }
  return mask;
}

int wrap_distance(int a, int b, int width) {
  const int d = std::abs(a - b) % width;
  return std::min(d, width - d);
}

SyntheticPanorama synthesize_road_panorama(int width, int height, std::span<const int> road_centers,
                                           double half_width_at_bottom) {
  if (width <= 0 || height < 4) throw SegmentationError("synthetic panorama needs width > 0 and height >= 4");
  if (half_width_at_bottom < 0) throw SegmentationError("negative road half-width");

  std::vector<int> centers(road_centers.begin(), road_centers.end());
  std::sort(centers.begin(), centers.end());
  for (int c : centers) {
    if (c < 0 || c >= width) throw SegmentationError("road center " + std::to_string(c) + " outside [0,width)");
  }
  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (std::size_t j = i + 1; j < centers.size(); ++j) {
      if (wrap_distance(centers[i], centers[j], width) <= 2.0 * half_width_at_bottom) {
        throw SegmentationError("road triangles at columns " + std::to_string(centers[i]) + " and " +
                                std::to_string(centers[j]) + " overlap");
      }
    }
  }

  const auto& classes = LabelMap::cityscapes();
  const ClassId road = *classes.find("road");
  const ClassId sky = *classes.find("sky");
  const ClassId ground = *classes.find("terrain");

  const int horizon = height / 2;
  const int last = height - 1;
  SyntheticPanorama out;
  out.labels.label_map = classes;
  out.labels.labels = Grid<ClassId>(width, height, sky);
  for (int r = horizon; r < height; ++r) {
    const double half = last == horizon ? half_width_at_bottom
                                        : half_width_at_bottom * (r - horizon) / static_cast<double>(last - horizon);
    for (int c = 0; c < width; ++c) {
      bool is_road = false;
      for (int center : centers) {
        if (wrap_distance(c, center, width) <= half) {
          is_road = true;
          break;
        }
      }
      out.labels.labels(r, c) = is_road ? road : ground;
    }
  }
  out.centers = std::move(centers);
  return out;
}

}  // namespace svkit
