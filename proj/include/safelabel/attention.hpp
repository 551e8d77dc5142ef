#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "safelabel/errors.hpp"
#include "safelabel/semantics.hpp"

namespace safelabel::attention {

using semantics::RealLayer;

// C x H x W feature volume, channel-major then row-major.
struct FeatureCube {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  FeatureCube() = default;
  FeatureCube(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), values(c * h * w, fill) {}
  FeatureCube(std::size_t c, std::size_t h, std::size_t w, std::vector<double> v)
      : channels(c), height(h), width(w), values(std::move(v)) {
    if (values.size() != c * h * w) throw DimensionMismatch("FeatureCube: value count != C*H*W");
  }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return values[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values[(c * height + y) * width + x];
  }
  bool same_geometry(const FeatureCube& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  friend bool operator==(const FeatureCube&, const FeatureCube&) = default;
};

struct AttentionWeights {
  double pedestrian = 1.0;
  double crossing = 0.75;
  double vehicle = 0.50;

  void validate() const {
    if (pedestrian < 0 || crossing < 0 || vehicle < 0) {
      throw ConfigError("attention weights must be >= 0");
    }
  }
};

struct SemanticLayerSet {
  RealLayer pedestrian;
  RealLayer crossing;
  RealLayer vehicle;
};

// omega * (layer (x) cube), the layer broadcast over every channel.
inline FeatureCube apply_layer_attention(const FeatureCube& cube, const RealLayer& layer, double weight) {
  if (layer.width != cube.width || layer.height != cube.height ||
      layer.values.size() != layer.width * layer.height) {
    throw DimensionMismatch("attention layer " + std::to_string(layer.height) + "x" +
                            std::to_string(layer.width) + " vs cube " + std::to_string(cube.height) +
                            "x" + std::to_string(cube.width));
  }
  FeatureCube out(cube.channels, cube.height, cube.width);
  const std::size_t plane = cube.height * cube.width;
  for (std::size_t c = 0; c < cube.channels; ++c) {
    const double* src = cube.values.data() + c * plane;
    double* dst = out.values.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = weight * layer.values[i] * src[i];
  }
  return out;
}

// Element-wise sum of the intermediates and the original cube.
inline FeatureCube fuse(const FeatureCube& cube, std::span<const FeatureCube> intermediates) {
  FeatureCube out = cube;
  for (const auto& z : intermediates) {
    if (!z.same_geometry(cube)) throw DimensionMismatch("fuse: cube geometry differs");
  }
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double acc = 0.0;
    for (const auto& z : intermediates) acc += z.values[i];
    out.values[i] = acc + cube.values[i];
  }
  return out;
}

inline FeatureCube spatial_attention(const FeatureCube& cube, const SemanticLayerSet& layers,
                                     const AttentionWeights& w) {
  const FeatureCube parts[] = {
      apply_layer_attention(cube, layers.pedestrian, w.pedestrian),
      apply_layer_attention(cube, layers.crossing, w.crossing),
      apply_layer_attention(cube, layers.vehicle, w.vehicle),
  };
  return fuse(cube, parts);
}

// Isolates the pedestrian, zebra and vehicle layers and resizes them to the
// cube's spatial size.
inline SemanticLayerSet make_layer_set(const semantics::SemanticMap& map, std::size_t height,
                                       std::size_t width) {
  using semantics::ClassId;
  auto resized = [&](ClassId c) {
    return semantics::bilinear_resize(semantics::extract_layer(map, c), width, height);
  };
  return {resized(ClassId::Pedestrian), resized(ClassId::ZebraCrossing), resized(ClassId::Vehicle)};
}

}  // namespace safelabel::attention
