#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "safelabel/attention.hpp"
#include "safelabel/errors.hpp"
#include "safelabel/geometry.hpp"
#include "safelabel/pipeline.hpp"
#include "safelabel/policy.hpp"
#include "safelabel/reward.hpp"
#include "safelabel/risk.hpp"
#include "safelabel/sim.hpp"

namespace safelabel::config {

// Every tunable in one place. Serialized as flat "group.key" names.
struct Settings {
  risk::RiskConfig risk;
  geometry::CameraIntrinsics camera;
  reward::RewardParams reward;
  attention::AttentionWeights attention;
  sim::ScenarioConfig scenario;
  policy::TrainConfig train;
  pipeline::DistanceSource distance_source = pipeline::DistanceSource::Pinhole;
  pipeline::Labeler labeler = pipeline::Labeler::Gen;

  void validate() const {
    risk.validate();
    camera.validate();
    reward.validate();
    attention.validate();
    scenario.validate();
    train.validate();
  }

  pipeline::LabelConfig label_config() const { return {risk, camera, reward, distance_source, labeler}; }

  sim::SimSettings sim_settings() const {
    sim::SimSettings s;
    s.scenario = scenario;
    s.camera = camera;
    s.risk = risk;
    return s;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const auto n = std::stoull(v, &used);
      if (used == v.size()) return n;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

template <class T>
T required(std::optional<T> v, const std::string& key, const std::string& raw) {
  if (!v) throw ConfigError(key + ": unknown value '" + raw + "'");
  return *v;
}

struct Key {
  std::string name;
  std::function<void(Settings&, const std::string&)> set;
  std::function<nlohmann::json(const Settings&)> get;
};

template <class Member>
Key real(std::string name, Member member) {
  return {name, [member, name](Settings& s, const std::string& v) { member(s) = to_double(name, v); },
          [member](const Settings& s) { return nlohmann::json(member(const_cast<Settings&>(s))); }};
}

template <class Member>
Key count(std::string name, Member member) {
  return {name,
          [member, name](Settings& s, const std::string& v) {
            member(s) = static_cast<std::remove_reference_t<decltype(member(s))>>(to_uint(name, v));
          },
          [member](const Settings& s) { return nlohmann::json(member(const_cast<Settings&>(s))); }};
}

inline const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(real("risk.high", [](Settings& s) -> double& { return s.risk.high_risk; }));
    k.push_back(real("risk.medium", [](Settings& s) -> double& { return s.risk.medium_risk; }));
    k.push_back(real("risk.low", [](Settings& s) -> double& { return s.risk.low_risk; }));
    k.push_back(real("risk.sigmoid_gain", [](Settings& s) -> double& { return s.risk.sigmoid_gain; }));
    k.push_back(real("risk.sigmoid_center", [](Settings& s) -> double& { return s.risk.sigmoid_center; }));
    k.push_back(real("risk.threshold", [](Settings& s) -> double& { return s.risk.threshold; }));
    k.push_back(real("risk.vehicle_occlusion_fraction",
                     [](Settings& s) -> double& { return s.risk.vehicle_occlusion_fraction; }));
    k.push_back(count("risk.memory_length", [](Settings& s) -> std::size_t& { return s.risk.memory_length; }));
    k.push_back({"risk.strict_history",
                 [](Settings& s, const std::string& v) { s.risk.strict_history = to_bool("risk.strict_history", v); },
                 [](const Settings& s) { return nlohmann::json(s.risk.strict_history); }});
    k.push_back(count("semantics.min_blob_area", [](Settings& s) -> std::size_t& { return s.risk.min_blob_area; }));
    k.push_back(count("semantics.border_samples", [](Settings& s) -> std::size_t& { return s.risk.border_samples; }));
    k.push_back(real("camera.focal_length_px", [](Settings& s) -> double& { return s.camera.focal_length_px; }));
    k.push_back(real("camera.pedestrian_height_m", [](Settings& s) -> double& { return s.camera.pedestrian_height_m; }));
    k.push_back(real("reward.zeta", [](Settings& s) -> double& { return s.reward.zeta; }));
    k.push_back(real("reward.epsilon", [](Settings& s) -> double& { return s.reward.epsilon; }));
    k.push_back(real("reward.eta", [](Settings& s) -> double& { return s.reward.eta; }));
    k.push_back(real("reward.mu", [](Settings& s) -> double& { return s.reward.mu; }));
    k.push_back(real("reward.xi", [](Settings& s) -> double& { return s.reward.xi; }));
    k.push_back(real("reward.dt", [](Settings& s) -> double& { return s.reward.dt; }));
    k.push_back(real("reward.collision_distance", [](Settings& s) -> double& { return s.reward.collision_distance; }));
    k.push_back(real("attention.pedestrian", [](Settings& s) -> double& { return s.attention.pedestrian; }));
    k.push_back(real("attention.crossing", [](Settings& s) -> double& { return s.attention.crossing; }));
    k.push_back(real("attention.vehicle", [](Settings& s) -> double& { return s.attention.vehicle; }));
    k.push_back(real("scenario.road_length", [](Settings& s) -> double& { return s.scenario.road_length; }));
    k.push_back(real("scenario.crossing_position", [](Settings& s) -> double& { return s.scenario.crossing_position; }));
    k.push_back(real("scenario.goal_position", [](Settings& s) -> double& { return s.scenario.goal_position; }));
    k.push_back({"scenario.occluder",
                 [](Settings& s, const std::string& v) {
                   s.scenario.occluder = required(sim::parse_occluder(v), "scenario.occluder", v);
                 },
                 [](const Settings& s) { return nlohmann::json(sim::to_string(s.scenario.occluder)); }});
    k.push_back(real("scenario.v_max", [](Settings& s) -> double& { return s.scenario.v_max; }));
    k.push_back(real("scenario.a_max", [](Settings& s) -> double& { return s.scenario.a_max; }));
    k.push_back(real("scenario.dt", [](Settings& s) -> double& { return s.scenario.dt; }));
    k.push_back(real("scenario.timeout", [](Settings& s) -> double& { return s.scenario.timeout; }));
    k.push_back({"scenario.density",
                 [](Settings& s, const std::string& v) {
                   s.scenario.density = required(sim::parse_density(v), "scenario.density", v);
                 },
                 [](const Settings& s) { return nlohmann::json(sim::to_string(s.scenario.density)); }});
    k.push_back(count("seed", [](Settings& s) -> std::uint64_t& { return s.scenario.seed; }));
    k.push_back(real("train.gamma", [](Settings& s) -> double& { return s.train.gamma; }));
    k.push_back(count("train.sweeps", [](Settings& s) -> std::size_t& { return s.train.sweeps; }));
    k.push_back(real("train.tolerance", [](Settings& s) -> double& { return s.train.tolerance; }));
    k.push_back(count("train.min_support", [](Settings& s) -> std::size_t& { return s.train.min_support; }));
    k.push_back({"train.merge_runs",
                 [](Settings& s, const std::string& v) { s.train.merge_runs = to_bool("train.merge_runs", v); },
                 [](const Settings& s) { return nlohmann::json(s.train.merge_runs); }});
    k.push_back(real("train.support_penalty", [](Settings& s) -> double& { return s.train.support_penalty; }));
    k.push_back({"pipeline.distance_source",
                 [](Settings& s, const std::string& v) {
                   s.distance_source = required(pipeline::parse_distance_source(v), "pipeline.distance_source", v);
                 },
                 [](const Settings& s) { return nlohmann::json(pipeline::to_string(s.distance_source)); }});
    k.push_back({"pipeline.labeler",
                 [](Settings& s, const std::string& v) {
                   s.labeler = required(pipeline::parse_labeler(v), "pipeline.labeler", v);
                 },
                 [](const Settings& s) { return nlohmann::json(pipeline::to_string(s.labeler)); }});
    return k;
  }();
  return table;
}

}  // namespace detail

inline void set(Settings& s, const std::string& key, const std::string& value) {
  for (const auto& k : detail::keys()) {
    if (k.name == key) {
      k.set(s, detail::trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

// "key=value" override as given on the command line.
inline void apply_override(Settings& s, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: '" + assignment + "'");
  set(s, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

// Text format: one "key = value" per line; '#' starts a comment.
inline void apply_text(Settings& s, const std::string& text, const std::string& origin = "<config>") {
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      apply_override(s, line);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  apply_text(s, buf.str(), path);
}

inline nlohmann::json to_json(const Settings& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : detail::keys()) j[k.name] = k.get(s);
  return j;
}

inline std::string to_text(const Settings& s) {
  std::string out;
  for (const auto& k : detail::keys()) {
    const auto v = k.get(s);
    out += k.name + " = " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
  }
  return out;
}

inline std::vector<std::string> key_names() {
  std::vector<std::string> out;
  for (const auto& k : detail::keys()) out.push_back(k.name);
  return out;
}

}  // namespace safelabel::config
