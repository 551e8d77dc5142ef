#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "safelabel/errors.hpp"
#include "safelabel/risk.hpp"

namespace safelabel::reward {

struct RewardParams {
  double zeta = 0.02;     // speed-near-pedestrian penalty weight
  double epsilon = 0.5;   // denominator offset, meters
  double eta = 1.0;       // collision penalty
  double mu = 0.1;        // efficiency weight per m/s
  double xi = 0.5;        // jerk penalty weight
  double dt = 0.1;        // seconds per frame
  double collision_distance = 0.5;

  void validate() const {
    if (!(zeta > 0 && epsilon > 0 && eta > 0 && mu > 0 && xi > 0)) {
      throw ConfigError("reward weights must all be > 0");
    }
    if (!(dt > 0)) throw ConfigError("reward.dt must be > 0");
    if (!(collision_distance >= 0)) throw ConfigError("reward.collision_distance must be >= 0");
  }
};

struct FrameKinematics {
  double speed = 0.0;         // m/s, >= 0
  double acceleration = 0.0;  // m/s^2
  bool collided = false;

  friend bool operator==(const FrameKinematics&, const FrameKinematics&) = default;
};

inline double g_safe(double v, std::optional<double> d, bool collided, bool c_t,
                     const RewardParams& p) {
  if (!c_t) return 0.0;
  // Occlusion-triggered safety mode with no visible pedestrian: assume the
  // pedestrian is at collision range for the speed term.
  const double range = d ? *d : p.collision_distance;
  const bool collision = collided || (d && *d <= p.collision_distance);
  return -(p.zeta * v * v / (range + p.epsilon) + (collision ? p.eta : 0.0));
}

inline double g_efficient(double v, bool c_t, const RewardParams& p) {
  return c_t ? 0.0 : p.mu * v;
}

inline double g_smooth(double a, const RewardParams& p) {
  const double dv = a * p.dt;
  return -p.xi * dv * dv;
}

struct RewardBreakdown {
  double safe = 0.0;
  double efficient = 0.0;
  double smooth = 0.0;
  double total() const { return safe + efficient + smooth; }
};

inline RewardBreakdown reward_components(const FrameKinematics& kin, const risk::RiskAssessment& risk,
                                         std::optional<double> d, const RewardParams& p) {
  return {g_safe(kin.speed, d, kin.collided, risk.safety, p), g_efficient(kin.speed, risk.safety, p),
          g_smooth(kin.acceleration, p)};
}

inline double reward(const FrameKinematics& kin, const risk::RiskAssessment& risk,
                     std::optional<double> d, const RewardParams& p) {
  return reward_components(kin, risk, d, p).total();
}

// Unlabeled-data-sharing baseline: every transition gets reward zero.
inline std::vector<double> label_uds(std::size_t n) { return std::vector<double>(n, 0.0); }

}  // namespace safelabel::reward
