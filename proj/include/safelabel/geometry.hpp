#pragma once

#include <algorithm>
#include <optional>
#include <span>

#include "safelabel/errors.hpp"
#include "safelabel/semantics.hpp"

namespace safelabel::geometry {

struct CameraIntrinsics {
  double focal_length_px = 112.0;  // 90 degree horizontal FOV at 224 px
  double pedestrian_height_m = 1.70;

  void validate() const {
    if (!(focal_length_px > 0.0)) throw ConfigError("camera.focal_length_px must be > 0");
    if (!(pedestrian_height_m > 0.0)) throw ConfigError("camera.pedestrian_height_m must be > 0");
  }
};

struct DistanceEstimate {
  double distance_m = 0.0;
  std::size_t pixel_height = 0;
  const semantics::PixelBlob* blob = nullptr;
};

// Pinhole range from apparent height: D = H * f / h.
inline DistanceEstimate estimate_distance(const semantics::PixelBlob& blob,
                                          const CameraIntrinsics& cam) {
  const std::size_t h = blob.bbox.height();
  if (h == 0) throw DegenerateBlob("pedestrian blob has zero pixel height");
  return {cam.pedestrian_height_m * cam.focal_length_px / static_cast<double>(h), h, &blob};
}

// Nearest pedestrian governs the safety term.
inline std::optional<double> nearest_pedestrian_distance(std::span<const semantics::PixelBlob> blobs,
                                                         const CameraIntrinsics& cam) {
  std::optional<double> best;
  for (const auto& blob : blobs) {
    const double d = estimate_distance(blob, cam).distance_m;
    if (!best || d < *best) best = d;
  }
  return best;
}

inline std::optional<double> nearest_pedestrian_distance(const semantics::SemanticMap& map,
                                                         const CameraIntrinsics& cam,
                                                         std::size_t min_blob_area) {
  const auto layer = semantics::extract_layer(map, semantics::ClassId::Pedestrian);
  const auto blobs = semantics::connected_components(layer, min_blob_area);
  return nearest_pedestrian_distance(blobs, cam);
}

}  // namespace safelabel::geometry
