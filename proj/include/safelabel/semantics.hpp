#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "safelabel/errors.hpp"

namespace safelabel::semantics {

inline constexpr std::size_t kNumClasses = 28;

// Canonical class table. Zebra crossings have their own class, separate from
// ordinary road markings.
enum class ClassId : std::uint8_t {
  Unlabeled = 0,
  Building = 1,
  Fence = 2,
  Other = 3,
  Pedestrian = 4,
  Pole = 5,
  RoadMarking = 6,
  Road = 7,
  Sidewalk = 8,
  Vegetation = 9,
  Vehicle = 10,
  Wall = 11,
  TrafficSign = 12,
  Sky = 13,
  Ground = 14,
  Bridge = 15,
  RailTrack = 16,
  GuardRail = 17,
  TrafficLight = 18,
  Static = 19,
  Dynamic = 20,
  Water = 21,
  Terrain = 22,
  Rider = 23,
  Bicycle = 24,
  Motorcycle = 25,
  Truck = 26,
  ZebraCrossing = 27,
};

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "unlabeled", "building",     "fence",       "other",        "pedestrian",   "pole",
    "road_marking", "road",      "sidewalk",    "vegetation",   "vehicle",      "wall",
    "traffic_sign", "sky",       "ground",      "bridge",       "rail_track",   "guard_rail",
    "traffic_light", "static",   "dynamic",     "water",        "terrain",      "rider",
    "bicycle",      "motorcycle", "truck",      "zebra_crossing"};

constexpr std::uint8_t index(ClassId c) { return static_cast<std::uint8_t>(c); }

inline ClassId class_from_index(int value) {
  if (value < 0 || value >= static_cast<int>(kNumClasses)) {
    throw InvalidClass("class id " + std::to_string(value) + " outside [0, 27]");
  }
  return static_cast<ClassId>(value);
}

inline std::string_view class_name(ClassId c) { return kClassNames[index(c)]; }

inline std::optional<ClassId> class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<ClassId>(i);
  }
  return std::nullopt;
}

// Surfaces a pedestrian can stand on that count as "on the road".
constexpr bool is_road_surface(ClassId c) {
  return c == ClassId::Road || c == ClassId::RoadMarking || c == ClassId::ZebraCrossing;
}

struct GeometryCheck {
  static void require(std::size_t w, std::size_t h, std::size_t n, const char* what) {
    if (w == 0 || h == 0) throw DimensionMismatch(std::string(what) + ": zero-sized raster");
    if (w * h != n) throw DimensionMismatch(std::string(what) + ": cell count != width*height");
  }
};

class SemanticMap {
 public:
  static constexpr std::size_t kDefaultSize = 224;

  SemanticMap() = default;
  SemanticMap(std::size_t width, std::size_t height, ClassId fill = ClassId::Unlabeled)
      : width_(width), height_(height), cells_(width * height, fill) {
    GeometryCheck::require(width, height, cells_.size(), "SemanticMap");
  }
  SemanticMap(std::size_t width, std::size_t height, std::vector<ClassId> cells)
      : width_(width), height_(height), cells_(std::move(cells)) {
    GeometryCheck::require(width, height, cells_.size(), "SemanticMap");
  }

  // Builds a map from raw class indices, rejecting anything >= 28.
  static SemanticMap from_indices(std::size_t width, std::size_t height,
                                  std::span<const std::uint8_t> raw) {
    GeometryCheck::require(width, height, raw.size(), "SemanticMap");
    std::vector<ClassId> cells(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) cells[i] = class_from_index(raw[i]);
    return SemanticMap(width, height, std::move(cells));
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  ClassId at(std::size_t row, std::size_t col) const { return cells_[row * width_ + col]; }
  void set(std::size_t row, std::size_t col, ClassId c) { cells_[row * width_ + col] = c; }

  std::span<const ClassId> cells() const { return cells_; }
  std::span<ClassId> cells() { return cells_; }

  std::vector<std::uint8_t> to_indices() const {
    std::vector<std::uint8_t> out(cells_.size());
    std::transform(cells_.begin(), cells_.end(), out.begin(), [](ClassId c) { return index(c); });
    return out;
  }

  std::size_t count(ClassId c) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), c));
  }

  friend bool operator==(const SemanticMap&, const SemanticMap&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<ClassId> cells_;
};

// 24-bit packed RGB raster, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint32_t> pixels;  // 0xRRGGBB

  std::uint32_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline std::string color_to_hex(std::uint32_t rgb) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%06X", static_cast<unsigned>(rgb & 0xFFFFFFu));
  return buf;
}

inline std::uint32_t parse_hex_color(std::string_view text) {
  if (text.size() != 7 || text[0] != '#') throw SchemaError("bad color literal: " + std::string(text));
  std::uint32_t value = 0;
  for (std::size_t i = 1; i < 7; ++i) {
    const char ch = text[i];
    std::uint32_t nibble;
    if (ch >= '0' && ch <= '9') nibble = static_cast<std::uint32_t>(ch - '0');
    else if (ch >= 'a' && ch <= 'f') nibble = static_cast<std::uint32_t>(ch - 'a' + 10);
    else if (ch >= 'A' && ch <= 'F') nibble = static_cast<std::uint32_t>(ch - 'A' + 10);
    else throw SchemaError("bad color literal: " + std::string(text));
    value = (value << 4) | nibble;
  }
  return value;
}

// Color-coded label palette (e.g. A2D2 camera labels). Several colors may map
// to the same class; one color may not map to two classes.
class Palette {
 public:
  struct Entry {
    std::uint32_t color;
    ClassId cls;
    std::string name;
  };

  Palette() = default;
  explicit Palette(std::vector<Entry> entries) {
    for (auto& e : entries) add(std::move(e));
  }

  void add(Entry e) {
    auto [it, inserted] = lookup_.try_emplace(e.color, e.cls);
    if (!inserted && it->second != e.cls) {
      throw SchemaError("palette color " + color_to_hex(e.color) + " mapped to two classes");
    }
    if (inserted) entries_.push_back(std::move(e));
  }

  std::optional<ClassId> find(std::uint32_t color) const {
    auto it = lookup_.find(color);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  // First listed color for a class, used when re-encoding maps.
  std::optional<std::uint32_t> color_of(ClassId c) const {
    for (const auto& e : entries_) {
      if (e.cls == c) return e.color;
    }
    return std::nullopt;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& e : entries_) {
      arr.push_back({{"color", color_to_hex(e.color)}, {"class", index(e.cls)}, {"name", e.name}});
    }
    return arr;
  }

  static Palette from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw SchemaError("palette must be a JSON array");
    Palette p;
    for (const auto& item : j) {
      if (!item.is_object() || !item.contains("color") || !item.contains("class")) {
        throw SchemaError("palette entry needs 'color' and 'class'");
      }
      Entry e{parse_hex_color(item.at("color").get<std::string>()),
              class_from_index(item.at("class").get<int>()),
              item.value("name", std::string{})};
      p.add(std::move(e));
    }
    return p;
  }

  static Palette load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open palette " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw SchemaError("palette " + path + ": " + ex.what());
    }
    return from_json(j);
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::uint32_t, ClassId> lookup_;
};

inline SemanticMap decode_palette_image(const RgbImage& raster, const Palette& palette) {
  if (raster.width == 0 || raster.height == 0 || raster.pixels.empty()) {
    throw DimensionMismatch("decode_palette_image: empty raster");
  }
  GeometryCheck::require(raster.width, raster.height, raster.pixels.size(), "RgbImage");
  std::vector<ClassId> cells(raster.pixels.size());
  // Label images are dominated by long runs of one color.
  std::uint32_t last_color = 0;
  ClassId last_class = ClassId::Unlabeled;
  bool have_last = false;
  for (std::size_t i = 0; i < raster.pixels.size(); ++i) {
    const std::uint32_t c = raster.pixels[i];
    if (!have_last || c != last_color) {
      auto found = palette.find(c);
      if (!found) throw UnknownColor(c, i / raster.width, i % raster.width);
      last_color = c;
      last_class = *found;
      have_last = true;
    }
    cells[i] = last_class;
  }
  return SemanticMap(raster.width, raster.height, std::move(cells));
}

inline RgbImage encode_palette_image(const SemanticMap& map, const Palette& palette) {
  std::array<std::optional<std::uint32_t>, kNumClasses> colors{};
  for (std::size_t i = 0; i < kNumClasses; ++i) colors[i] = palette.color_of(static_cast<ClassId>(i));
  RgbImage out{map.width(), map.height(), std::vector<std::uint32_t>(map.size())};
  auto cells = map.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& color = colors[index(cells[i])];
    if (!color) {
      throw SchemaError("palette has no color for class " + std::string(class_name(cells[i])));
    }
    out.pixels[i] = *color;
  }
  return out;
}

struct BinaryLayer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> mask;  // 0 or 1
  ClassId cls = ClassId::Unlabeled;

  bool at(std::size_t row, std::size_t col) const { return mask[row * width + col] != 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
};

struct RealLayer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }

  static RealLayer constant(std::size_t width, std::size_t height, double v) {
    return RealLayer{width, height, std::vector<double>(width * height, v)};
  }
};

struct Pixel {
  std::size_t row;
  std::size_t col;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Half-open bounding box: rows [top, bottom), columns [left, right).
struct BBox {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t bottom = 0;
  std::size_t right = 0;

  std::size_t height() const { return bottom > top ? bottom - top : 0; }
  std::size_t width() const { return right > left ? right - left : 0; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct PixelBlob {
  ClassId cls = ClassId::Unlabeled;
  std::vector<Pixel> pixels;
  BBox bbox;

  std::size_t area() const { return pixels.size(); }
};

inline BinaryLayer extract_layer(const SemanticMap& map, ClassId cls) {
  BinaryLayer layer{map.width(), map.height(), std::vector<std::uint8_t>(map.size()), cls};
  auto cells = map.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) layer.mask[i] = cells[i] == cls ? 1 : 0;
  return layer;
}

// Maximal 4-connected regions of set pixels with at least min_blob_area pixels,
// ordered by bounding-box top, then left.
inline std::vector<PixelBlob> connected_components(const BinaryLayer& layer,
                                                   std::size_t min_blob_area = 20) {
  if (min_blob_area < 1) min_blob_area = 1;
  const std::size_t w = layer.width;
  const std::size_t h = layer.height;
  std::vector<std::uint8_t> visited(layer.mask.size(), 0);
  std::vector<std::size_t> stack;
  std::vector<PixelBlob> blobs;

  for (std::size_t start = 0; start < layer.mask.size(); ++start) {
    if (!layer.mask[start] || visited[start]) continue;
    PixelBlob blob;
    blob.cls = layer.cls;
    blob.bbox = BBox{start / w, start % w, start / w + 1, start % w + 1};
    visited[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t r = i / w;
      const std::size_t c = i % w;
      blob.pixels.push_back({r, c});
      blob.bbox.top = std::min(blob.bbox.top, r);
      blob.bbox.left = std::min(blob.bbox.left, c);
      blob.bbox.bottom = std::max(blob.bbox.bottom, r + 1);
      blob.bbox.right = std::max(blob.bbox.right, c + 1);
      auto visit = [&](std::size_t j) {
        if (layer.mask[j] && !visited[j]) {
          visited[j] = 1;
          stack.push_back(j);
        }
      };
      if (r > 0) visit(i - w);
      if (r + 1 < h) visit(i + w);
      if (c > 0) visit(i - 1);
      if (c + 1 < w) visit(i + 1);
    }
    if (blob.area() >= min_blob_area) {
      std::sort(blob.pixels.begin(), blob.pixels.end(), [](const Pixel& a, const Pixel& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
      });
      blobs.push_back(std::move(blob));
    }
  }
  std::stable_sort(blobs.begin(), blobs.end(), [](const PixelBlob& a, const PixelBlob& b) {
    if (a.bbox.top != b.bbox.top) return a.bbox.top < b.bbox.top;
    return a.bbox.left < b.bbox.left;
  });
  return blobs;
}

// Classes of up to n pixels in the row directly below the blob, centered under
// its horizontal extent. The count is capped by the blob width and clipped at
// the image edges; a blob touching the last row yields nothing.
inline std::vector<ClassId> bottom_border_neighbors(const PixelBlob& blob, const SemanticMap& map,
                                                    std::size_t n = 10) {
  std::vector<ClassId> out;
  const std::size_t row = blob.bbox.bottom;
  if (row >= map.height() || blob.bbox.width() == 0 || n == 0) return out;
  const std::size_t count = std::min(n, blob.bbox.width());
  const std::size_t start = blob.bbox.left + (blob.bbox.width() - count) / 2;
  const std::size_t stop = std::min(start + count, map.width());
  out.reserve(count);
  for (std::size_t col = start; col < stop; ++col) out.push_back(map.at(row, col));
  return out;
}

// Bilinear resampling with half-pixel-center alignment:
//   src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1].
inline RealLayer bilinear_resize(const RealLayer& in, std::size_t out_w, std::size_t out_h) {
  if (out_w < 1 || out_h < 1) throw DimensionMismatch("bilinear_resize: output size must be >= 1");
  GeometryCheck::require(in.width, in.height, in.values.size(), "RealLayer");

  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in_n, std::size_t out_n) {
    std::vector<Tap> t(out_n);
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (std::size_t o = 0; o < out_n; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in_n - 1);
      t[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto xs = taps(in.width, out_w);
  const auto ys = taps(in.height, out_h);

  RealLayer out{out_w, out_h, std::vector<double>(out_w * out_h)};
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap& ty = ys[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& tx = xs[x];
      const double v00 = in.at(ty.i0, tx.i0);
      const double v01 = in.at(ty.i0, tx.i1);
      const double v10 = in.at(ty.i1, tx.i0);
      const double v11 = in.at(ty.i1, tx.i1);
      const double top = v00 + (v01 - v00) * tx.frac;
      const double bot = v10 + (v11 - v10) * tx.frac;
      out.values[y * out_w + x] = top + (bot - top) * ty.frac;
    }
  }
  return out;
}

inline RealLayer to_real(const BinaryLayer& layer) {
  RealLayer out{layer.width, layer.height, std::vector<double>(layer.mask.size())};
  for (std::size_t i = 0; i < layer.mask.size(); ++i) out.values[i] = layer.mask[i] ? 1.0 : 0.0;
  return out;
}

inline RealLayer bilinear_resize(const BinaryLayer& layer, std::size_t out_w, std::size_t out_h) {
  return bilinear_resize(to_real(layer), out_w, out_h);
}

}  // namespace safelabel::semantics
