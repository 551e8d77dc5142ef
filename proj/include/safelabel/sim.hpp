#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "safelabel/errors.hpp"
#include "safelabel/geometry.hpp"
#include "safelabel/image_io.hpp"
#include "safelabel/reward.hpp"
#include "safelabel/risk.hpp"
#include "safelabel/semantics.hpp"

namespace safelabel::sim {

using semantics::ClassId;
using semantics::SemanticMap;

enum class Occluder { None, Partial, Full };
enum class Density { Low, Medium, High };
enum class Phase { Waiting, Crossing, Done };
enum class Outcome { Running, Success, Collision, Timeout };
enum class PolicyKind { Behavioral, Random, Aggressive, Conservative, Learned };

inline constexpr std::string_view to_string(Occluder o) {
  switch (o) {
    case Occluder::None: return "none";
    case Occluder::Partial: return "partial";
    case Occluder::Full: return "full";
  }
  return "?";
}
inline constexpr std::string_view to_string(Density d) {
  switch (d) {
    case Density::Low: return "low";
    case Density::Medium: return "medium";
    case Density::High: return "high";
  }
  return "?";
}
inline constexpr std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Running: return "RUNNING";
    case Outcome::Success: return "SUCCESS";
    case Outcome::Collision: return "COLLISION";
    case Outcome::Timeout: return "TIMEOUT";
  }
  return "?";
}
inline constexpr std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Behavioral: return "behavioral";
    case PolicyKind::Random: return "random";
    case PolicyKind::Aggressive: return "aggressive";
    case PolicyKind::Conservative: return "conservative";
    case PolicyKind::Learned: return "learned";
  }
  return "?";
}

inline std::optional<Occluder> parse_occluder(std::string_view s) {
  if (s == "none") return Occluder::None;
  if (s == "partial") return Occluder::Partial;
  if (s == "full") return Occluder::Full;
  return std::nullopt;
}
inline std::optional<Density> parse_density(std::string_view s) {
  if (s == "low") return Density::Low;
  if (s == "medium") return Density::Medium;
  if (s == "high") return Density::High;
  return std::nullopt;
}
inline std::optional<PolicyKind> parse_policy(std::string_view s) {
  if (s == "behavioral") return PolicyKind::Behavioral;
  if (s == "random") return PolicyKind::Random;
  if (s == "aggressive") return PolicyKind::Aggressive;
  if (s == "conservative") return PolicyKind::Conservative;
  if (s == "learned") return PolicyKind::Learned;
  return std::nullopt;
}
inline std::optional<Outcome> parse_outcome(std::string_view s) {
  if (s == "SUCCESS") return Outcome::Success;
  if (s == "COLLISION") return Outcome::Collision;
  if (s == "TIMEOUT") return Outcome::Timeout;
  if (s == "RUNNING" || s.empty()) return Outcome::Running;
  return std::nullopt;
}

struct ScenarioConfig {
  double road_length = 100.0;
  double crossing_position = 60.0;
  double goal_position = 100.0;
  Occluder occluder = Occluder::Full;
  double v_max = 8.33;
  double a_max = 3.0;
  double dt = 0.1;
  double timeout = 60.0;
  Density density = Density::Low;
  std::uint64_t seed = 0;
  // Half-width of the longitudinal collision window around the crossing.
  double collision_window = 0.5;

  void validate() const {
    if (!(0.0 < crossing_position && crossing_position < goal_position &&
          goal_position <= road_length)) {
      throw ConfigError("scenario: require 0 < crossing_position < goal_position <= road_length");
    }
    if (!(v_max > 0 && a_max > 0 && dt > 0 && timeout > 0)) {
      throw ConfigError("scenario: v_max, a_max, dt, timeout must be > 0");
    }
  }
};

// Pedestrian counts and behaviour mixes per traffic density.
struct DensityPreset {
  std::size_t pedestrians;
  double unexpected_fraction;
  double running_fraction;
};

inline constexpr DensityPreset preset(Density d) {
  switch (d) {
    case Density::Low: return {1, 0.0, 0.0};
    case Density::Medium: return {2, 0.2, 0.2};
    case Density::High: return {3, 0.3, 0.4};
  }
  return {1, 0.0, 0.0};
}

struct OccluderGeometry {
  double length;  // along the road
  double gap;     // between the occluder front and the crossing centre
  double inner_y;
  double outer_y;
  double height;
};

// Fixed scene geometry; frozen so rendered fixtures are reproducible.
struct RenderConfig {
  std::size_t width = 224;
  std::size_t height = 224;
  double cx = 112.0;
  double cy = 90.0;  // horizon row
  double camera_height = 1.5;
  double lane_half_width = 1.75;
  double road_half_width = 5.25;
  double sidewalk_width = 3.0;
  double crosswalk_half_length = 1.5;
  double stripe_width = 0.5;
  double marking_half_width = 0.075;
  double dash_period = 6.0;
  double pedestrian_width = 0.6;
  // Where the expert driver halts when yielding, measured back from the
  // crossing centre. Far enough back that the whole road stays in view.
  double stop_gap = 8.0;
  double walk_speed = 1.4;
  double run_speed = 1.67;  // 6 km/h
  OccluderGeometry full{6.0, 3.0, 2.0, 4.4, 2.6};
  OccluderGeometry partial{4.2, 3.0, 2.2, 4.0, 1.4};

  // Lateral half-extent of the ego lane as seen by a pedestrian body.
  double lane_clearance() const { return lane_half_width + 0.5 * pedestrian_width; }
};

struct Pedestrian {
  double x = 0.0;  // longitudinal position on the crosswalk
  double lateral_y = 0.0;
  double direction = -1.0;  // sign of lateral velocity while crossing
  double speed = 1.4;
  double start_time = 0.0;
  Phase phase = Phase::Waiting;
  bool unexpected = false;
  bool hidden_behind_occluder = false;

  friend bool operator==(const Pedestrian&, const Pedestrian&) = default;
};

struct SimState {
  double ego_x = 0.0;
  double ego_v = 0.0;
  double prev_x = 0.0;
  double t = 0.0;
  std::vector<Pedestrian> pedestrians;

  friend bool operator==(const SimState&, const SimState&) = default;
};

// Deterministic RNG with portable real sampling (the standard distributions
// are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline SimState step(const SimState& state, double action, const ScenarioConfig& cfg,
                     const RenderConfig& rc = {}) {
  SimState next = state;
  const double accel = std::clamp(action, -1.0, 1.0) * cfg.a_max;
  next.ego_v = std::clamp(state.ego_v + accel * cfg.dt, 0.0, cfg.v_max);
  next.prev_x = state.ego_x;
  next.ego_x = state.ego_x + next.ego_v * cfg.dt;
  next.t = state.t + cfg.dt;
  const double far_edge = rc.road_half_width + rc.sidewalk_width;
  for (auto& p : next.pedestrians) {
    if (p.phase == Phase::Waiting && next.t >= p.start_time) p.phase = Phase::Crossing;
    if (p.phase == Phase::Crossing) {
      p.lateral_y += p.direction * p.speed * cfg.dt;
      if (p.direction * p.lateral_y > far_edge) p.phase = Phase::Done;
    }
  }
  return next;
}

// Time at which a full-throttle ego first enters the collision window.
inline double nominal_arrival_time(const ScenarioConfig& cfg) {
  SimState s;
  while (s.ego_x < cfg.crossing_position - cfg.collision_window && s.t < cfg.timeout) {
    s = step(s, 1.0, cfg);
  }
  return s.t;
}

// Crossing schedule for one episode. The first pedestrian always occupies the
// ego lane when a full-throttle ego reaches the crossing; the others cross at
// random times around that arrival.
inline SimState initial_state(const ScenarioConfig& cfg, const RenderConfig& rc, std::uint64_t seed) {
  Rng rng(seed);
  SimState s;
  const DensityPreset dp = preset(cfg.density);
  const double arrival = nominal_arrival_time(cfg);
  const double clearance = rc.lane_clearance();
  for (std::size_t i = 0; i < dp.pedestrians; ++i) {
    Pedestrian p;
    p.unexpected = rng.bernoulli(dp.unexpected_fraction);
    const bool running = rng.bernoulli(dp.running_fraction);
    p.speed = running ? rc.run_speed : rc.walk_speed + rng.uniform(-0.1, 0.1);
    if (p.unexpected) {
      // Emerges from behind the parked vehicle on the right.
      p.direction = -1.0;
      p.lateral_y = rc.road_half_width + 2.5;
    } else {
      p.direction = rng.bernoulli(0.5) ? -1.0 : 1.0;
      p.lateral_y = -p.direction * (rc.road_half_width + 1.0);
    }
    p.x = cfg.crossing_position + rng.uniform(-1.0, 1.0);
    const double occupancy = 2.0 * clearance / p.speed;
    const double lane_entry = i == 0 ? arrival - rng.uniform(0.1, 0.85) * occupancy
                                     : arrival + rng.uniform(-4.0, 6.0);
    const double approach = (std::abs(p.lateral_y) - clearance) / p.speed;
    p.start_time = std::max(0.0, lane_entry - approach);
    s.pedestrians.push_back(p);
  }
  return s;
}

struct Events {
  bool collision = false;
  bool success = false;
  bool timeout = false;

  bool any() const { return collision || success || timeout; }
  Outcome outcome() const {
    if (collision) return Outcome::Collision;
    if (success) return Outcome::Success;
    if (timeout) return Outcome::Timeout;
    return Outcome::Running;
  }
  friend bool operator==(const Events&, const Events&) = default;
};

inline bool pedestrian_in_lane(const Pedestrian& p, const RenderConfig& rc) {
  return p.phase == Phase::Crossing && std::abs(p.lateral_y) < rc.lane_clearance();
}

// The ego's swept interval since the last step is tested against the
// collision window so fast steps cannot jump over it.
inline Events detect_events(const SimState& s, const ScenarioConfig& cfg, const RenderConfig& rc = {}) {
  Events e;
  const double lo = std::min(s.prev_x, s.ego_x);
  const double hi = std::max(s.prev_x, s.ego_x);
  const bool at_crossing = hi >= cfg.crossing_position - cfg.collision_window &&
                           lo <= cfg.crossing_position + cfg.collision_window;
  if (at_crossing) {
    for (const auto& p : s.pedestrians) {
      if (pedestrian_in_lane(p, rc)) {
        e.collision = true;
        break;
      }
    }
  }
  e.success = s.ego_x >= cfg.goal_position;
  e.timeout = s.t >= cfg.timeout - 1e-9;
  return e;
}

// ---- rendering -------------------------------------------------------------

struct ScreenRect {
  long top = 0, left = 0, bottom = 0, right = 0;  // half-open

  ScreenRect clipped(long w, long h) const {
    return {std::clamp(top, 0L, h), std::clamp(left, 0L, w), std::clamp(bottom, 0L, h),
            std::clamp(right, 0L, w)};
  }
  bool empty() const { return bottom <= top || right <= left; }
  bool contains(const ScreenRect& o) const {
    return o.top >= top && o.bottom <= bottom && o.left >= left && o.right <= right;
  }
};

struct Drawable {
  double depth;
  ScreenRect rect;
  ClassId cls;
  int pedestrian_index;  // -1 for the occluder
};

inline std::optional<OccluderGeometry> occluder_geometry(const ScenarioConfig& cfg, const RenderConfig& rc) {
  switch (cfg.occluder) {
    case Occluder::None: return std::nullopt;
    case Occluder::Partial: return rc.partial;
    case Occluder::Full: return rc.full;
  }
  return std::nullopt;
}

inline std::vector<Drawable> project_scene(const SimState& s, const geometry::CameraIntrinsics& cam,
                                           const ScenarioConfig& cfg, const RenderConfig& rc) {
  std::vector<Drawable> out;
  const double f = cam.focal_length_px;
  if (auto occ = occluder_geometry(cfg, rc)) {
    const double x1 = cfg.crossing_position - occ->gap;
    const double x0 = x1 - occ->length;
    if (s.ego_x < x0 - 0.3) {
      double min_u = std::numeric_limits<double>::infinity(), max_u = -min_u;
      double min_v = min_u, max_v = -min_u;
      for (double x : {x0, x1}) {
        const double z = x - s.ego_x;
        for (double y : {occ->inner_y, occ->outer_y}) {
          const double u = rc.cx + f * y / z;
          min_u = std::min(min_u, u);
          max_u = std::max(max_u, u);
        }
        for (double hgt : {0.0, occ->height}) {
          const double v = rc.cy + f * (rc.camera_height - hgt) / z;
          min_v = std::min(min_v, v);
          max_v = std::max(max_v, v);
        }
      }
      out.push_back({x0 - s.ego_x,
                     ScreenRect{std::lround(min_v), std::lround(min_u), std::lround(max_v), std::lround(max_u)},
                     ClassId::Vehicle, -1});
    }
  }
  for (std::size_t i = 0; i < s.pedestrians.size(); ++i) {
    const auto& p = s.pedestrians[i];
    const double z = p.x - s.ego_x;
    if (p.phase == Phase::Done || z <= 0.3) continue;
    const long h = std::lround(f * cam.pedestrian_height_m / z);
    const long bottom = std::lround(rc.cy + f * rc.camera_height / z);
    const double uc = rc.cx + f * p.lateral_y / z;
    const long w = std::max(1L, std::lround(f * rc.pedestrian_width / z));
    const long left = std::lround(uc - 0.5 * static_cast<double>(w));
    out.push_back({z, ScreenRect{bottom - h, left, bottom, left + w}, ClassId::Pedestrian,
                   static_cast<int>(i)});
  }
  // Painter's order: far to near.
  std::stable_sort(out.begin(), out.end(),
                   [](const Drawable& a, const Drawable& b) { return a.depth > b.depth; });
  return out;
}

inline ClassId ground_class(double world_x, double y, const ScenarioConfig& cfg, const RenderConfig& rc) {
  if (world_x > cfg.road_length) return ClassId::Terrain;
  const double ay = std::abs(y);
  if (ay <= rc.road_half_width) {
    if (std::abs(world_x - cfg.crossing_position) <= rc.crosswalk_half_length) {
      const auto stripe = static_cast<long>(std::floor((y + rc.road_half_width) / rc.stripe_width));
      return stripe % 2 == 0 ? ClassId::ZebraCrossing : ClassId::Road;
    }
    if (std::abs(ay - rc.lane_half_width) < rc.marking_half_width &&
        std::fmod(std::max(world_x, 0.0), rc.dash_period) < 0.5 * rc.dash_period) {
      return ClassId::RoadMarking;
    }
    return ClassId::Road;
  }
  if (ay <= rc.road_half_width + rc.sidewalk_width) return ClassId::Sidewalk;
  return ClassId::Building;
}

inline SemanticMap render_semantic(const SimState& s, const geometry::CameraIntrinsics& cam,
                                   const ScenarioConfig& cfg, const RenderConfig& rc = {}) {
  const std::size_t W = rc.width;
  const std::size_t H = rc.height;
  SemanticMap map(W, H, ClassId::Sky);
  const double f = cam.focal_length_px;
  auto cells = map.cells();
  for (std::size_t r = 0; r < H; ++r) {
    const double v = static_cast<double>(r) + 0.5 - rc.cy;
    if (v <= 0.0) continue;
    const double z = f * rc.camera_height / v;
    const double world_x = s.ego_x + z;
    const double scale = z / f;
    ClassId* row = cells.data() + r * W;
    for (std::size_t c = 0; c < W; ++c) {
      const double y = (static_cast<double>(c) + 0.5 - rc.cx) * scale;
      row[c] = ground_class(world_x, y, cfg, rc);
    }
  }
  for (const auto& d : project_scene(s, cam, cfg, rc)) {
    const ScreenRect r = d.rect.clipped(static_cast<long>(W), static_cast<long>(H));
    if (r.empty()) continue;
    for (long row = r.top; row < r.bottom; ++row) {
      ClassId* p = cells.data() + static_cast<std::size_t>(row) * W;
      std::fill(p + r.left, p + r.right, d.cls);
    }
  }
  return map;
}

// Marks pedestrians whose on-screen footprint lies entirely behind the
// occluder's.
inline void update_visibility(SimState& s, const geometry::CameraIntrinsics& cam,
                              const ScenarioConfig& cfg, const RenderConfig& rc) {
  for (auto& p : s.pedestrians) p.hidden_behind_occluder = false;
  const auto scene = project_scene(s, cam, cfg, rc);
  const auto occ = std::find_if(scene.begin(), scene.end(),
                                [](const Drawable& d) { return d.pedestrian_index < 0; });
  if (occ == scene.end()) return;
  const long W = static_cast<long>(rc.width);
  const long H = static_cast<long>(rc.height);
  const ScreenRect occ_rect = occ->rect.clipped(W, H);
  for (const auto& d : scene) {
    if (d.pedestrian_index < 0 || d.depth <= occ->depth) continue;
    const ScreenRect pr = d.rect.clipped(W, H);
    if (!pr.empty() && occ_rect.contains(pr)) {
      s.pedestrians[static_cast<std::size_t>(d.pedestrian_index)].hidden_behind_occluder = true;
    }
  }
}

// Longitudinal range to the nearest pedestrian still in the scene ahead.
inline std::optional<double> ground_truth_distance(const SimState& s) {
  std::optional<double> best;
  for (const auto& p : s.pedestrians) {
    const double z = p.x - s.ego_x;
    if (p.phase == Phase::Done || z <= 0.0) continue;
    if (!best || z < *best) best = z;
  }
  return best;
}

// ---- episodes --------------------------------------------------------------

struct FrameLog {
  SemanticMap map;  // empty when maps are not retained
  reward::FrameKinematics kinematics;
  double t = 0.0;
  double ego_x = 0.0;
  double action = 0.0;
  std::optional<double> ground_truth_distance;
  Events events;
  risk::RiskAssessment risk;
};

struct EpisodeLog {
  std::vector<FrameLog> frames;
  Outcome outcome = Outcome::Running;
  std::optional<double> stopping_distance;
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::Behavioral;
  ScenarioConfig scenario;

  bool has_scheduled_crossing() const { return preset(scenario.density).pedestrians > 0; }
};

struct StepContext {
  const SimState& state;
  const risk::RiskAssessment& risk;
  const ScenarioConfig& cfg;
  const RenderConfig& render;
  Rng& rng;
};

using Controller = std::function<double(const StepContext&)>;

struct SimSettings {
  ScenarioConfig scenario;
  RenderConfig render;
  geometry::CameraIntrinsics camera;
  risk::RiskConfig risk;
  bool keep_maps = true;
  // Stops closer than this to the crossing count toward stopping distance.
  double stop_search_range = 30.0;
};

inline EpisodeLog run_episode(const Controller& controller, const SimSettings& settings,
                              std::uint64_t seed) {
  const auto& cfg = settings.scenario;
  EpisodeLog log;
  log.seed = seed;
  log.scenario = cfg;
  Rng policy_rng(mix_seed(seed, 0xA11CE));
  SimState state = initial_state(cfg, settings.render, seed);
  state.prev_x = state.ego_x;
  update_visibility(state, settings.camera, cfg, settings.render);
  risk::RiskTracker tracker(settings.risk);

  const std::size_t max_frames = static_cast<std::size_t>(std::ceil(cfg.timeout / cfg.dt)) + 2;
  log.frames.reserve(std::min<std::size_t>(max_frames, 1024));
  while (true) {
    FrameLog frame;
    SemanticMap map = render_semantic(state, settings.camera, cfg, settings.render);
    frame.risk = tracker.assess(map);
    frame.t = state.t;
    frame.ego_x = state.ego_x;
    frame.kinematics.speed = state.ego_v;
    frame.ground_truth_distance = ground_truth_distance(state);
    frame.events = log.frames.empty() ? Events{} : detect_events(state, cfg, settings.render);
    frame.kinematics.collided = frame.events.collision;
    if (settings.keep_maps) frame.map = std::move(map);

    if (!log.frames.empty()) {
      const auto& prev = log.frames.back();
      if (!log.stopping_distance && state.ego_v == 0.0 && prev.kinematics.speed > 0.0) {
        const double gap = cfg.crossing_position - state.ego_x;
        if (gap > 0.0 && gap <= settings.stop_search_range) log.stopping_distance = gap;
      }
    }
    const bool terminal = frame.events.any() || log.frames.size() + 1 >= max_frames;
    if (terminal) {
      log.outcome = frame.events.any() ? frame.events.outcome() : Outcome::Timeout;
      log.frames.push_back(std::move(frame));
      break;
    }
    StepContext ctx{state, frame.risk, cfg, settings.render, policy_rng};
    const double action = std::clamp(controller(ctx), -1.0, 1.0);
    SimState next = step(state, action, cfg, settings.render);
    update_visibility(next, settings.camera, cfg, settings.render);
    frame.action = action;
    frame.kinematics.acceleration = (next.ego_v - state.ego_v) / cfg.dt;
    log.frames.push_back(std::move(frame));
    state = std::move(next);
  }
  return log;
}

// ---- scripted data-collection policies -------------------------------------

namespace detail {

inline double track_speed(double target, double v, const ScenarioConfig& cfg) {
  return std::clamp((target - v) / (cfg.a_max * cfg.dt), -1.0, 1.0);
}

// A pedestrian the expert yields to: on the road and not yet past it, or
// about to step off the kerb.
inline bool pedestrian_active(const Pedestrian& p, double t, const RenderConfig& rc) {
  if (p.phase == Phase::Done) return false;
  if (p.phase == Phase::Waiting) return p.start_time - t < 1.5;
  return p.direction * p.lateral_y < rc.road_half_width;
}

// Seconds until the pedestrian first occupies the ego lane (0 if inside).
inline double time_to_lane(const Pedestrian& p, double t, const RenderConfig& rc) {
  const double progress = p.direction * p.lateral_y;
  if (progress > rc.lane_clearance()) return std::numeric_limits<double>::infinity();
  const double wait = p.phase == Phase::Waiting ? std::max(0.0, p.start_time - t) : 0.0;
  return wait + std::max(0.0, -progress - rc.lane_clearance()) / p.speed;
}

}  // namespace detail

// Expert driver. It starts yielding when it sees a pedestrian on the road
// (the safety flag is raised) or, with privileged knowledge, when an active
// pedestrian is hidden by the parked vehicle. It then halts at a stop line
// short of the crossing and waits until the road is clear. It slows past
// occluded crossings.
class BehavioralPolicy {
 public:
  double operator()(const StepContext& ctx) {
    const auto& s = ctx.state;
    const auto& cfg = ctx.cfg;
    const auto& rc = ctx.render;
    const double window_start = cfg.crossing_position - cfg.collision_window;
    const double stop_x = cfg.crossing_position - rc.stop_gap;
    bool active = false;
    bool hidden = false;
    double eta = std::numeric_limits<double>::infinity();
    for (const auto& p : s.pedestrians) {
      if (!detail::pedestrian_active(p, s.t, rc)) continue;
      active = true;
      hidden = hidden || p.hidden_behind_occluder;
      eta = std::min(eta, detail::time_to_lane(p, s.t, rc));
    }
    if (s.ego_x >= window_start) yielding_ = false;
    else if (!yielding_ && ((ctx.risk.safety && active) || hidden)) yielding_ = true;
    else if (yielding_ && !active && !ctx.risk.safety) yielding_ = false;

    double target = cfg.v_max;
    const double gap = cfg.crossing_position - s.ego_x;
    if (cfg.occluder != Occluder::None && gap > 0.0 && gap < 15.0) target = std::min(target, 5.0);
    if (yielding_) {
      const double room = stop_x - s.ego_x;
      if (room > 0.0) {
        target = std::min(target, std::sqrt(2.0 * 2.5 * room));
      } else {
        // Past the stop line: stop short of the crossing if possible, else
        // clear it when there is time.
        const double brake_room = window_start - 0.5 - s.ego_x;
        const bool can_stop = s.ego_v * s.ego_v <= 2.0 * cfg.a_max * std::max(brake_room, 0.0);
        const double clear_time =
            (cfg.crossing_position + cfg.collision_window - s.ego_x) / std::max(s.ego_v, 0.5);
        target = (!can_stop && clear_time + 0.5 < eta) ? cfg.v_max : 0.0;
      }
    }
    const double noise = ctx.rng.uniform(-0.1, 0.1);
    return std::clamp(detail::track_speed(target, s.ego_v, cfg) + noise, -1.0, 1.0);
  }

 private:
  bool yielding_ = false;
};

// Piecewise-constant random actions, biased forward so episodes progress.
class RandomPolicy {
 public:
  double operator()(const StepContext& ctx) {
    if (hold_ == 0) {
      current_ = ctx.rng.uniform(-0.5, 1.0);
      hold_ = 5;
    }
    --hold_;
    return current_;
  }

 private:
  int hold_ = 0;
  double current_ = 0.0;
};

inline double aggressive_action(const StepContext&) { return 1.0; }

// Cruises at half the speed limit and brakes whenever a pedestrian is visible
// ahead of the crossing.
inline double conservative_action(const StepContext& ctx) {
  const bool before_crossing = ctx.state.ego_x < ctx.cfg.crossing_position + ctx.cfg.collision_window;
  if (before_crossing && ctx.risk.pedestrian_detected) return -1.0;
  return detail::track_speed(0.5 * ctx.cfg.v_max, ctx.state.ego_v, ctx.cfg);
}

inline Controller scripted_controller(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Behavioral: return BehavioralPolicy{};
    case PolicyKind::Random: return RandomPolicy{};
    case PolicyKind::Aggressive: return aggressive_action;
    case PolicyKind::Conservative: return conservative_action;
    case PolicyKind::Learned: break;
  }
  throw ConfigError("the learned policy needs a Q-table; use the policy module's controller");
}

inline std::uint64_t episode_seed(std::uint64_t base, std::size_t index) { return mix_seed(base, index); }

// n episodes under one controller; episode i uses episode_seed(cfg.seed, i).
inline std::vector<EpisodeLog> collect_episodes(const Controller& controller, std::size_t n,
                                                const SimSettings& settings) {
  std::vector<EpisodeLog> logs;
  logs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    logs.push_back(run_episode(controller, settings, episode_seed(settings.scenario.seed, i)));
  }
  return logs;
}

inline std::vector<EpisodeLog> collect_episodes(PolicyKind kind, std::size_t n, const SimSettings& settings) {
  if (n < 1) throw ConfigError("collect_episodes: n must be >= 1");
  std::vector<EpisodeLog> logs;
  logs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Fresh controller per episode so stateful policies do not leak.
    logs.push_back(run_episode(scripted_controller(kind), settings,
                               episode_seed(settings.scenario.seed, i)));
  }
  return logs;
}

// ---- persistence -----------------------------------------------------------

inline constexpr int kEpisodeSchemaVersion = 1;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string frame_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu.png", i);
  return buf;
}

inline std::string event_name(const Events& e) {
  return e.any() ? std::string(to_string(e.outcome())) : std::string{};
}

// frames/NNNN.png + kinematics.csv + manifest.json
inline void save_episode(const EpisodeLog& log, const std::filesystem::path& dir,
                         const nlohmann::json& config_snapshot, std::size_t episode_index = 0) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  std::ofstream csv(dir / "kinematics.csv");
  if (!csv) throw IoError("cannot write " + (dir / "kinematics.csv").string());
  csv << "t,v,a,action,ground_truth_distance,event\n";
  for (std::size_t i = 0; i < log.frames.size(); ++i) {
    const auto& f = log.frames[i];
    if (f.map.empty()) throw IoError("save_episode: episode was recorded without maps");
    image_io::write_class_map((dir / "frames" / frame_file_name(i)).string(), f.map);
    csv << format_double(f.t) << ',' << format_double(f.kinematics.speed) << ','
        << format_double(f.kinematics.acceleration) << ',' << format_double(f.action) << ','
        << (f.ground_truth_distance ? format_double(*f.ground_truth_distance) : std::string{}) << ','
        << event_name(f.events) << '\n';
  }
  nlohmann::json manifest = {
      {"schema_version", kEpisodeSchemaVersion},
      {"kind", "sim_episode"},
      {"episode_index", episode_index},
      {"seed", log.seed},
      {"policy", to_string(log.policy)},
      {"density", to_string(log.scenario.density)},
      {"occlusion", to_string(log.scenario.occluder)},
      {"outcome", to_string(log.outcome)},
      {"stopping_distance", log.stopping_distance ? nlohmann::json(*log.stopping_distance) : nlohmann::json()},
      {"crossing_position", log.scenario.crossing_position},
      {"dt", log.scenario.dt},
      {"frame_count", log.frames.size()},
      {"config", config_snapshot},
  };
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

}  // namespace safelabel::sim
