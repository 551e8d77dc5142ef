#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "safelabel/errors.hpp"
#include "safelabel/semantics.hpp"

namespace safelabel::risk {

using semantics::ClassId;
using semantics::SemanticMap;

struct RiskConfig {
  double high_risk = 1.0;
  double medium_risk = 0.5;
  double low_risk = 0.1;
  double sigmoid_gain = 5.0;
  double sigmoid_center = 0.6;
  double threshold = 0.75;
  double vehicle_occlusion_fraction = 0.05;
  std::size_t memory_length = 10;
  // Literal history rule: fire only when m_1 = 1 rather than any m_i, i >= 1.
  bool strict_history = false;
  // Detection post-processing.
  std::size_t min_blob_area = 20;
  std::size_t border_samples = 10;

  void validate() const {
    if (!(low_risk > 0.0 && low_risk < medium_risk && medium_risk <= high_risk)) {
      throw ConfigError("risk: require 0 < low < medium <= high");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("risk.threshold must be in (0,1)");
    if (!(sigmoid_gain > 0.0)) throw ConfigError("risk.sigmoid_gain must be > 0");
    if (!(vehicle_occlusion_fraction > 0.0 && vehicle_occlusion_fraction < 1.0)) {
      throw ConfigError("risk.vehicle_occlusion_fraction must be in (0,1)");
    }
    if (memory_length < 2) throw ConfigError("risk.memory_length must be >= 2");
    if (min_blob_area < 1) throw ConfigError("semantics.min_blob_area must be >= 1");
  }
};

struct PedestrianPresence {
  double factor = 0.0;
  bool on_road = false;
  bool detected = false;
};

struct CrossingOcclusion {
  double factor = 0.0;
  bool detected = false;
  bool occluded = false;
};

struct RiskAssessment {
  double pedestrian = 0.0;  // F_p
  double crossing = 0.0;    // F_c
  double history = 0.0;     // F_h
  double total = 0.0;       // F_t
  double probability = 0.0;
  bool safety = false;  // c_t
  bool pedestrian_on_road = false;
  bool pedestrian_detected = false;
  bool crossing_detected = false;
  bool crossing_occluded = false;

  friend bool operator==(const RiskAssessment&, const RiskAssessment&) = default;
};

// Surface under one pedestrian detection: road wins ties.
inline bool pedestrian_on_road(const semantics::PixelBlob& blob, const SemanticMap& map,
                               std::size_t samples) {
  std::size_t road = 0;
  std::size_t sidewalk = 0;
  for (ClassId c : semantics::bottom_border_neighbors(blob, map, samples)) {
    if (semantics::is_road_surface(c)) ++road;
    else if (c == ClassId::Sidewalk) ++sidewalk;
  }
  return road >= sidewalk;
}

inline PedestrianPresence assess_pedestrian_presence(const SemanticMap& map, const RiskConfig& cfg) {
  PedestrianPresence out;
  const auto layer = semantics::extract_layer(map, ClassId::Pedestrian);
  const auto blobs = semantics::connected_components(layer, cfg.min_blob_area);
  if (blobs.empty()) return out;
  out.detected = true;
  for (const auto& blob : blobs) {
    if (pedestrian_on_road(blob, map, cfg.border_samples)) {
      out.on_road = true;
      break;
    }
  }
  out.factor = out.on_road ? cfg.high_risk : cfg.low_risk;
  return out;
}

inline CrossingOcclusion assess_crossing_occlusion(const SemanticMap& map, const RiskConfig& cfg) {
  CrossingOcclusion out;
  std::size_t zebra = 0;
  std::size_t vehicle = 0;
  for (ClassId c : map.cells()) {
    zebra += c == ClassId::ZebraCrossing;
    vehicle += c == ClassId::Vehicle;
  }
  if (zebra == 0) return out;
  out.detected = true;
  out.occluded = static_cast<double>(vehicle) >
                 cfg.vehicle_occlusion_fraction * static_cast<double>(map.size());
  out.factor = out.occluded ? cfg.medium_risk : cfg.low_risk;
  return out;
}

// Fixed-length binary shift register of pedestrian visibility, m_0 newest.
class PedMemory {
 public:
  explicit PedMemory(std::size_t length = 10) : cells_(length, 0) {}
  explicit PedMemory(std::vector<std::uint8_t> cells) : cells_(std::move(cells)) {
    for (auto& c : cells_) c = c ? 1 : 0;
  }

  std::size_t size() const { return cells_.size(); }
  bool operator[](std::size_t i) const { return cells_[i] != 0; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  PedMemory shifted(bool detected) const {
    PedMemory next(cells_.size());
    next.cells_[0] = detected ? 1 : 0;
    std::copy(cells_.begin(), cells_.end() - 1, next.cells_.begin() + 1);
    return next;
  }

  friend bool operator==(const PedMemory&, const PedMemory&) = default;

 private:
  std::vector<std::uint8_t> cells_;
};

inline std::pair<PedMemory, double> update_memory(const PedMemory& memory, bool pedestrian_detected,
                                                  const RiskConfig& cfg) {
  PedMemory next = memory.shifted(pedestrian_detected);
  bool fire = false;
  if (!next[0]) {
    if (cfg.strict_history) {
      fire = next.size() > 1 && next[1];
    } else {
      for (std::size_t i = 1; i < next.size() && !fire; ++i) fire = next[i];
    }
  }
  return {std::move(next), fire ? cfg.medium_risk : 0.0};
}

inline double scaled_sigmoid(double total, const RiskConfig& cfg) {
  return 1.0 / (1.0 + std::exp(-cfg.sigmoid_gain * (total - cfg.sigmoid_center)));
}

inline RiskAssessment aggregate(double f_p, double f_c, double f_h, const RiskConfig& cfg) {
  RiskAssessment out;
  out.pedestrian = f_p;
  out.crossing = f_c;
  out.history = f_h;
  out.total = f_p + f_c + f_h;
  out.probability = scaled_sigmoid(out.total, cfg);
  out.safety = out.probability > cfg.threshold;
  return out;
}

// Per-episode risk state. Frames must be fed in temporal order; use one
// tracker per episode.
class RiskTracker {
 public:
  explicit RiskTracker(RiskConfig cfg) : cfg_(cfg), memory_(cfg.memory_length) {}

  RiskAssessment assess(const SemanticMap& map) {
    const auto ped = assess_pedestrian_presence(map, cfg_);
    const auto cross = assess_crossing_occlusion(map, cfg_);
    auto [next, f_h] = update_memory(memory_, ped.detected, cfg_);
    memory_ = std::move(next);
    auto out = aggregate(ped.factor, cross.factor, f_h, cfg_);
    out.pedestrian_on_road = ped.on_road;
    out.pedestrian_detected = ped.detected;
    out.crossing_detected = cross.detected;
    out.crossing_occluded = cross.occluded;
    return out;
  }

  void reset() { memory_ = PedMemory(cfg_.memory_length); }
  const PedMemory& memory() const { return memory_; }
  const RiskConfig& config() const { return cfg_; }

 private:
  RiskConfig cfg_;
  PedMemory memory_;
};

}  // namespace safelabel::risk
