#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "safelabel/errors.hpp"
#include "safelabel/geometry.hpp"
#include "safelabel/image_io.hpp"
#include "safelabel/policy.hpp"
#include "safelabel/reward.hpp"
#include "safelabel/risk.hpp"
#include "safelabel/semantics.hpp"
#include "safelabel/sim.hpp"

namespace safelabel::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Source { Sim, A2D2 };
enum class Labeler { Gen, Uds };
enum class DistanceSource { Pinhole, GroundTruth };

inline std::optional<Source> parse_source(std::string_view s) {
  if (s == "sim") return Source::Sim;
  if (s == "a2d2") return Source::A2D2;
  return std::nullopt;
}
inline std::optional<Labeler> parse_labeler(std::string_view s) {
  if (s == "gen") return Labeler::Gen;
  if (s == "uds") return Labeler::Uds;
  return std::nullopt;
}
inline std::optional<DistanceSource> parse_distance_source(std::string_view s) {
  if (s == "pinhole") return DistanceSource::Pinhole;
  if (s == "ground_truth") return DistanceSource::GroundTruth;
  return std::nullopt;
}
inline std::string_view to_string(Source s) { return s == Source::Sim ? "sim" : "a2d2"; }
inline std::string_view to_string(Labeler l) { return l == Labeler::Gen ? "gen" : "uds"; }
inline std::string_view to_string(DistanceSource d) {
  return d == DistanceSource::Pinhole ? "pinhole" : "ground_truth";
}

struct FrameRecord {
  std::size_t frame_id = 0;
  fs::path semantic_map_path;
  reward::FrameKinematics kinematics;
  double timestamp = 0.0;
  double action = 0.0;
  std::optional<double> ground_truth_distance;
  std::optional<double> distance_to_crossing;
  std::string event;
};

struct EpisodeInput {
  Source source = Source::Sim;
  fs::path dir;
  std::string episode_id;
  std::vector<FrameRecord> frames;
  std::optional<semantics::Palette> palette;
  json manifest;

  semantics::SemanticMap load_map(const FrameRecord& r) const {
    if (palette) return image_io::read_palette_map(r.semantic_map_path.string(), *palette);
    return image_io::read_class_map(r.semantic_map_path.string());
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& c : out) {
    if (!c.empty() && c.back() == '\r') c.pop_back();
  }
  return out;
}

inline double parse_number(const std::string& s, const fs::path& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw LayoutError(file.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

// Header must list exactly the expected columns in order.
inline std::vector<std::vector<std::string>> read_csv(const fs::path& file,
                                                      const std::vector<std::string>& columns) {
  std::ifstream in(file);
  if (!in) throw LayoutError("missing " + file.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != columns) {
    std::string want;
    for (const auto& c : columns) want += (want.empty() ? "" : ",") + c;
    throw LayoutError(file.string() + ": header must be '" + want + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != columns.size()) {
      throw LayoutError(file.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(columns.size()) + " fields");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline void require_monotonic(const std::vector<FrameRecord>& frames, const fs::path& file) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].timestamp < frames[i - 1].timestamp) {
      throw NonMonotonicTimestamps(file.string() + ": timestamp decreases at frame " + std::to_string(i));
    }
  }
}

inline json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw LayoutError("missing " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(file.string() + ": " + e.what());
  }
}

}  // namespace detail

// frames/NNNN.png + kinematics.csv + manifest.json
inline EpisodeInput ingest_sim_episode(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LayoutError("not a directory: " + dir.string());
  EpisodeInput ep;
  ep.source = Source::Sim;
  ep.dir = dir;
  ep.episode_id = dir.filename().string();
  ep.manifest = detail::read_json_file(dir / "manifest.json");
  const auto csv_path = dir / "kinematics.csv";
  const auto rows =
      detail::read_csv(csv_path, {"t", "v", "a", "action", "ground_truth_distance", "event"});
  const double crossing = ep.manifest.value("crossing_position", std::numeric_limits<double>::quiet_NaN());
  const double dt = ep.manifest.value("dt", std::numeric_limits<double>::quiet_NaN());
  double x = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    FrameRecord f;
    f.frame_id = i;
    f.semantic_map_path = dir / "frames" / sim::frame_file_name(i);
    if (!fs::exists(f.semantic_map_path)) throw LayoutError("missing frame " + f.semantic_map_path.string());
    f.timestamp = detail::parse_number(r[0], csv_path, i + 2);
    f.kinematics.speed = detail::parse_number(r[1], csv_path, i + 2);
    f.kinematics.acceleration = detail::parse_number(r[2], csv_path, i + 2);
    f.action = detail::parse_number(r[3], csv_path, i + 2);
    if (!r[4].empty()) f.ground_truth_distance = detail::parse_number(r[4], csv_path, i + 2);
    if (!sim::parse_outcome(r[5])) throw LayoutError(csv_path.string() + ": unknown event '" + r[5] + "'");
    f.event = r[5];
    // Odometry: the same accumulation the simulator performs.
    if (i > 0) x = x + f.kinematics.speed * dt;
    if (std::isfinite(crossing) && std::isfinite(dt)) f.distance_to_crossing = crossing - x;
    ep.frames.push_back(std::move(f));
  }
  if (ep.frames.empty()) throw LayoutError(csv_path.string() + ": no frames");
  // A frame is marked collided when it or its successor carries the event,
  // so the transition into the collision receives the penalty.
  for (std::size_t i = 0; i < ep.frames.size(); ++i) {
    ep.frames[i].kinematics.collided =
        ep.frames[i].event == "COLLISION" || (i + 1 < ep.frames.size() && ep.frames[i + 1].event == "COLLISION");
  }
  detail::require_monotonic(ep.frames, csv_path);
  return ep;
}

// camera_label/*.png (name order) + palette.json + bus_signals.csv. The
// dataset has no [-1,1] action; it is reconstructed as a / a_max.
inline EpisodeInput ingest_a2d2_episode(const fs::path& dir, double a_max) {
  if (!fs::is_directory(dir)) throw LayoutError("not a directory: " + dir.string());
  EpisodeInput ep;
  ep.source = Source::A2D2;
  ep.dir = dir;
  ep.episode_id = dir.filename().string();
  if (!fs::exists(dir / "palette.json")) throw LayoutError("missing " + (dir / "palette.json").string());
  ep.palette = semantics::Palette::load((dir / "palette.json").string());
  const auto label_dir = dir / "camera_label";
  if (!fs::is_directory(label_dir)) throw LayoutError("missing " + label_dir.string());
  std::vector<fs::path> pngs;
  for (const auto& e : fs::directory_iterator(label_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") pngs.push_back(e.path());
  }
  std::sort(pngs.begin(), pngs.end());
  const auto csv_path = dir / "bus_signals.csv";
  const auto rows = detail::read_csv(csv_path, {"timestamp", "speed_mps", "accel_mps2"});
  if (pngs.empty()) throw LayoutError(label_dir.string() + ": no label images");
  if (rows.size() != pngs.size()) {
    throw LayoutError(csv_path.string() + ": " + std::to_string(rows.size()) + " rows for " +
                      std::to_string(pngs.size()) + " label images");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    FrameRecord f;
    f.frame_id = i;
    f.semantic_map_path = pngs[i];
    f.timestamp = detail::parse_number(rows[i][0], csv_path, i + 2);
    f.kinematics.speed = detail::parse_number(rows[i][1], csv_path, i + 2);
    f.kinematics.acceleration = detail::parse_number(rows[i][2], csv_path, i + 2);
    f.action = std::clamp(f.kinematics.acceleration / a_max, -1.0, 1.0);
    ep.frames.push_back(std::move(f));
  }
  detail::require_monotonic(ep.frames, csv_path);
  // Decode every label now so palette problems surface at ingestion.
  for (const auto& f : ep.frames) (void)ep.load_map(f);
  return ep;
}

inline EpisodeInput ingest_episode(const fs::path& dir, Source source, double a_max = 3.0) {
  if (fs::is_directory(dir) && fs::is_empty(dir)) throw LayoutError("empty directory: " + dir.string());
  return source == Source::Sim ? ingest_sim_episode(dir) : ingest_a2d2_episode(dir, a_max);
}

// Episode directories below root (the root itself if it is one).
inline std::vector<fs::path> find_episode_dirs(const fs::path& root, Source source) {
  const char* marker = source == Source::Sim ? "kinematics.csv" : "bus_signals.csv";
  if (fs::exists(root / marker)) return {root};
  std::vector<fs::path> out;
  if (fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && fs::exists(e.path() / marker)) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw LayoutError("no episodes found under " + root.string());
  return out;
}

// ---- labeling --------------------------------------------------------------

struct LabelConfig {
  risk::RiskConfig risk;
  geometry::CameraIntrinsics camera;
  reward::RewardParams reward;
  DistanceSource distance_source = DistanceSource::Pinhole;
  Labeler labeler = Labeler::Gen;

  void validate() const {
    risk.validate();
    camera.validate();
    reward.validate();
  }
};

struct AuditEntry {
  std::string episode;
  std::size_t frame_id = 0;
  double t = 0.0;
  std::string map_path;
  risk::RiskAssessment risk;
  reward::FrameKinematics kinematics;
  std::optional<double> distance;  // range used by the safety term
  std::optional<double> distance_to_crossing;
  reward::RewardBreakdown components;
  double reward = 0.0;  // after the labeler is applied

  friend bool operator==(const AuditEntry& a, const AuditEntry& b) {
    return a.episode == b.episode && a.frame_id == b.frame_id && a.t == b.t && a.map_path == b.map_path &&
           a.risk == b.risk && a.kinematics == b.kinematics && a.distance == b.distance &&
           a.distance_to_crossing == b.distance_to_crossing && a.components.safe == b.components.safe &&
           a.components.efficient == b.components.efficient && a.components.smooth == b.components.smooth &&
           a.reward == b.reward;
  }
};

struct Transition {
  std::string episode;
  std::size_t state_ref = 0;
  double action = 0.0;
  double reward = 0.0;
  std::size_t next_state_ref = 0;
  bool done = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct LabeledDataset {
  std::vector<Transition> transitions;
  std::vector<AuditEntry> audit;
  json config;

  void append(LabeledDataset&& other) {
    transitions.insert(transitions.end(), std::make_move_iterator(other.transitions.begin()),
                       std::make_move_iterator(other.transitions.end()));
    audit.insert(audit.end(), std::make_move_iterator(other.audit.begin()),
                 std::make_move_iterator(other.audit.end()));
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Input frame for the sequential labeler; maps are passed by value so the
// caller decides whether they come from disk or memory.
struct FrameInput {
  std::size_t frame_id = 0;
  double t = 0.0;
  std::string map_path;
  reward::FrameKinematics kinematics;
  std::optional<double> ground_truth_distance;
  std::optional<double> distance_to_crossing;
};

// Sequential per-episode labeler. Carries the memory bank, so one instance
// must see one episode's frames in order.
class EpisodeLabeler {
 public:
  EpisodeLabeler(const LabelConfig& cfg, std::string episode) : cfg_(cfg), episode_(std::move(episode)), tracker_(cfg.risk) {}

  AuditEntry push(const semantics::SemanticMap& map, const FrameInput& f) {
    AuditEntry a;
    a.episode = episode_;
    a.frame_id = f.frame_id;
    a.t = f.t;
    a.map_path = f.map_path;
    a.risk = tracker_.assess(map);
    a.kinematics = f.kinematics;
    a.distance_to_crossing = f.distance_to_crossing;
    if (cfg_.distance_source == DistanceSource::Pinhole) {
      a.distance = geometry::nearest_pedestrian_distance(map, cfg_.camera, cfg_.risk.min_blob_area);
    } else {
      a.distance = f.ground_truth_distance;
    }
    a.components = reward::reward_components(a.kinematics, a.risk, a.distance, cfg_.reward);
    a.reward = cfg_.labeler == Labeler::Gen ? a.components.total() : 0.0;
    return a;
  }

 private:
  LabelConfig cfg_;
  std::string episode_;
  risk::RiskTracker tracker_;
};

// Transition k pairs frame k with frame k+1; the last one is terminal.
inline std::vector<Transition> make_transitions(const std::vector<AuditEntry>& audit,
                                                const std::vector<double>& actions) {
  std::vector<Transition> out;
  if (audit.size() < 2) return out;
  if (actions.size() != audit.size() && actions.size() != audit.size() - 1) {
    throw LengthMismatch(actions.size(), audit.size() - 1);
  }
  for (std::size_t k = 0; k + 1 < audit.size(); ++k) {
    out.push_back({audit[k].episode, audit[k].frame_id, actions[k], audit[k].reward, audit[k + 1].frame_id,
                   k + 2 == audit.size()});
  }
  return out;
}

inline LabeledDataset label_episode(const EpisodeInput& ep, const LabelConfig& cfg, const json& snapshot = {}) {
  cfg.validate();
  LabeledDataset ds;
  ds.config = snapshot;
  EpisodeLabeler labeler(cfg, ep.episode_id);
  std::vector<double> actions;
  for (const auto& f : ep.frames) {
    if (cfg.distance_source == DistanceSource::GroundTruth && ep.source == Source::A2D2) {
      throw ConfigError("ground-truth distance is unavailable for a2d2 episodes");
    }
    const auto map = ep.load_map(f);
    ds.audit.push_back(labeler.push(map, {f.frame_id, f.timestamp, f.semantic_map_path.string(), f.kinematics,
                                          f.ground_truth_distance, f.distance_to_crossing}));
    actions.push_back(f.action);
  }
  ds.transitions = make_transitions(ds.audit, actions);
  return ds;
}

// Labels an in-memory simulator log (maps must have been retained).
inline LabeledDataset label_episode(const sim::EpisodeLog& log, const std::string& episode_id,
                                    const LabelConfig& cfg, const json& snapshot = {}) {
  cfg.validate();
  LabeledDataset ds;
  ds.config = snapshot;
  EpisodeLabeler labeler(cfg, episode_id);
  std::vector<double> actions;
  const double crossing = log.scenario.crossing_position;
  const double dt = log.scenario.dt;
  double x = 0.0;
  for (std::size_t i = 0; i < log.frames.size(); ++i) {
    const auto& fr = log.frames[i];
    if (fr.map.empty()) throw ConfigError("label_episode: episode was recorded without maps");
    if (i > 0) x = x + fr.kinematics.speed * dt;
    reward::FrameKinematics kin = fr.kinematics;
    kin.collided = fr.events.collision || (i + 1 < log.frames.size() && log.frames[i + 1].events.collision);
    ds.audit.push_back(labeler.push(fr.map, {i, fr.t, std::string(), kin, fr.ground_truth_distance, crossing - x}));
    actions.push_back(fr.action);
  }
  ds.transitions = make_transitions(ds.audit, actions);
  return ds;
}

// ---- dataset files ---------------------------------------------------------

inline json to_json(const Transition& t) {
  return {{"schema_version", kSchemaVersion}, {"episode", t.episode}, {"state_ref", t.state_ref},
          {"action", t.action}, {"reward", t.reward}, {"next_state_ref", t.next_state_ref}, {"done", t.done}};
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(); }

inline json to_json(const AuditEntry& a) {
  return {{"schema_version", kSchemaVersion},
          {"episode", a.episode},
          {"frame_id", a.frame_id},
          {"t", a.t},
          {"map", a.map_path},
          {"F_p", a.risk.pedestrian},
          {"F_c", a.risk.crossing},
          {"F_h", a.risk.history},
          {"F_t", a.risk.total},
          {"P", a.risk.probability},
          {"c_t", a.risk.safety ? 1 : 0},
          {"pedestrian_detected", a.risk.pedestrian_detected},
          {"pedestrian_on_road", a.risk.pedestrian_on_road},
          {"crossing_detected", a.risk.crossing_detected},
          {"crossing_occluded", a.risk.crossing_occluded},
          {"v", a.kinematics.speed},
          {"a", a.kinematics.acceleration},
          {"collided", a.kinematics.collided},
          {"d", optional_json(a.distance)},
          {"distance_to_crossing", optional_json(a.distance_to_crossing)},
          {"g_safe", a.components.safe},
          {"g_efficient", a.components.efficient},
          {"g_smooth", a.components.smooth},
          {"reward", a.reward}};
}

namespace detail {

inline void check_version(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("schema_version")) throw SchemaError(where + ": missing schema_version");
  if (j.at("schema_version") != kSchemaVersion) {
    throw SchemaError(where + ": unsupported schema_version " + j.at("schema_version").dump());
  }
}

inline std::optional<double> optional_double(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline Transition transition_from_json(const json& j, const std::string& where) {
  detail::check_version(j, where);
  try {
    return {j.at("episode").get<std::string>(), j.at("state_ref").get<std::size_t>(), j.at("action").get<double>(),
            j.at("reward").get<double>(), j.at("next_state_ref").get<std::size_t>(), j.at("done").get<bool>()};
  } catch (const json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

inline AuditEntry audit_from_json(const json& j, const std::string& where) {
  detail::check_version(j, where);
  try {
    AuditEntry a;
    a.episode = j.at("episode").get<std::string>();
    a.frame_id = j.at("frame_id").get<std::size_t>();
    a.t = j.at("t").get<double>();
    a.map_path = j.at("map").get<std::string>();
    a.risk.pedestrian = j.at("F_p").get<double>();
    a.risk.crossing = j.at("F_c").get<double>();
    a.risk.history = j.at("F_h").get<double>();
    a.risk.total = j.at("F_t").get<double>();
    a.risk.probability = j.at("P").get<double>();
    a.risk.safety = j.at("c_t").get<int>() != 0;
    a.risk.pedestrian_detected = j.at("pedestrian_detected").get<bool>();
    a.risk.pedestrian_on_road = j.at("pedestrian_on_road").get<bool>();
    a.risk.crossing_detected = j.at("crossing_detected").get<bool>();
    a.risk.crossing_occluded = j.at("crossing_occluded").get<bool>();
    a.kinematics.speed = j.at("v").get<double>();
    a.kinematics.acceleration = j.at("a").get<double>();
    a.kinematics.collided = j.at("collided").get<bool>();
    a.distance = detail::optional_double(j.at("d"));
    a.distance_to_crossing = detail::optional_double(j.at("distance_to_crossing"));
    a.components.safe = j.at("g_safe").get<double>();
    a.components.efficient = j.at("g_efficient").get<double>();
    a.components.smooth = j.at("g_smooth").get<double>();
    a.reward = j.at("reward").get<double>();
    return a;
  } catch (const json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

// dataset.jsonl + audit.jsonl + config.json (snapshot and record counts).
inline void export_dataset(const LabeledDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("dataset.jsonl");
    for (const auto& t : ds.transitions) out << to_json(t).dump() << '\n';
  }
  {
    auto out = open("audit.jsonl");
    for (const auto& a : ds.audit) out << to_json(a).dump() << '\n';
  }
  auto out = open("config.json");
  out << json{{"schema_version", kSchemaVersion},
              {"transitions", ds.transitions.size()},
              {"audit_entries", ds.audit.size()},
              {"config", ds.config}}
             .dump(2)
      << '\n';
}

inline LabeledDataset import_dataset(const fs::path& dir) {
  LabeledDataset ds;
  const json meta = detail::read_json_file(dir / "config.json");
  detail::check_version(meta, (dir / "config.json").string());
  ds.config = meta.value("config", json());
  auto read_lines = [&](const char* name, auto&& each) {
    std::ifstream in(dir / name);
    if (!in) throw LayoutError("missing " + (dir / name).string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const std::string where = (dir / name).string() + ":" + std::to_string(lineno);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw SchemaError(where + ": " + e.what());
      }
      each(j, where);
    }
  };
  read_lines("dataset.jsonl",
             [&](const json& j, const std::string& w) { ds.transitions.push_back(transition_from_json(j, w)); });
  read_lines("audit.jsonl", [&](const json& j, const std::string& w) { ds.audit.push_back(audit_from_json(j, w)); });
  if (meta.value("transitions", std::size_t{0}) != ds.transitions.size() ||
      meta.value("audit_entries", std::size_t{0}) != ds.audit.size()) {
    throw SchemaError(dir.string() + ": record counts do not match config.json (truncated?)");
  }
  return ds;
}

// ---- training bridge -------------------------------------------------------

// Joins transitions with their audit rows and maps both ends to table cells.
inline std::vector<policy::CellTransition> to_cell_transitions(const LabeledDataset& ds,
                                                               const policy::StateDiscretizer& disc) {
  std::map<std::pair<std::string, std::size_t>, const AuditEntry*> index;
  for (const auto& a : ds.audit) index[{a.episode, a.frame_id}] = &a;
  auto cell_of = [&](const std::string& ep, std::size_t id) {
    auto it = index.find({ep, id});
    if (it == index.end()) throw SchemaError("transition references missing frame " + ep + "/" + std::to_string(id));
    const AuditEntry& a = *it->second;
    if (!a.distance_to_crossing) throw ConfigError("training needs distance_to_crossing (simulator episodes)");
    return disc.index(policy::Observation{*a.distance_to_crossing, a.kinematics.speed, a.risk.safety});
  };
  std::vector<policy::CellTransition> out;
  out.reserve(ds.transitions.size());
  for (const auto& t : ds.transitions) {
    out.push_back({cell_of(t.episode, t.state_ref), policy::snap_action(t.action), t.reward,
                   cell_of(t.episode, t.next_state_ref), t.done});
  }
  return out;
}

inline policy::TrainedPolicy train(const LabeledDataset& ds, const policy::StateDiscretizer& disc,
                                   const policy::TrainConfig& cfg, policy::FitStats* stats = nullptr) {
  if (ds.transitions.empty()) throw EmptyDataset();
  auto cells = to_cell_transitions(ds, disc);
  if (cfg.merge_runs) cells = policy::merge_cell_runs(cells, cfg.gamma);
  return {disc, policy::fit_q(std::move(cells), disc.cell_count(), cfg, stats)};
}

// ---- comparison with human labels -----------------------------------------

struct ComparisonReport {
  std::size_t true_positive = 0;   // generated 1, human 1
  std::size_t false_negative = 0;  // generated 0, human 1
  std::size_t false_positive = 0;  // generated 1, human 0
  std::size_t true_negative = 0;
  std::size_t total = 0;
  std::size_t human_unsafe = 0;
  std::size_t generated_unsafe = 0;
  std::optional<double> agreement_pct_on_human_unsafe;

  json to_json() const {
    return {{"confusion",
             {{"generated_1_human_1", true_positive},
              {"generated_0_human_1", false_negative},
              {"generated_1_human_0", false_positive},
              {"generated_0_human_0", true_negative}}},
            {"total", total},
            {"human_unsafe", human_unsafe},
            {"generated_unsafe", generated_unsafe},
            {"agreement_pct_on_human_unsafe", optional_json(agreement_pct_on_human_unsafe)}};
  }
};

inline ComparisonReport compare_safety_labels(const std::vector<int>& generated, const std::vector<int>& human) {
  if (generated.size() != human.size()) throw LengthMismatch(generated.size(), human.size());
  ComparisonReport r;
  r.total = generated.size();
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const bool g = generated[i] != 0;
    const bool h = human[i] != 0;
    if (g && h) ++r.true_positive;
    else if (!g && h) ++r.false_negative;
    else if (g && !h) ++r.false_positive;
    else ++r.true_negative;
  }
  r.human_unsafe = r.true_positive + r.false_negative;
  r.generated_unsafe = r.true_positive + r.false_positive;
  if (r.human_unsafe) {
    r.agreement_pct_on_human_unsafe =
        100.0 * static_cast<double>(r.true_positive) / static_cast<double>(r.human_unsafe);
  }
  return r;
}

// Reads c_t labels either from a (frame_id,c_t) CSV or from an audit.jsonl.
inline std::vector<int> read_safety_labels(const fs::path& path) {
  std::vector<int> out;
  if (path.extension() == ".jsonl") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        out.push_back(json::parse(line).at("c_t").get<int>() != 0);
      } catch (const json::exception& e) {
        throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return out;
  }
  const auto rows = detail::read_csv(path, {"frame_id", "c_t"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = detail::parse_number(rows[i][1], path, i + 2);
    if (v != 0.0 && v != 1.0) throw LayoutError(path.string() + ": c_t must be 0 or 1");
    out.push_back(v != 0.0);
  }
  return out;
}

inline void write_safety_labels(const fs::path& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame_id,c_t\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << (labels[i] ? 1 : 0) << '\n';
}

// Per-frame trace for plotting.
inline void write_inspect_csv(std::ostream& out, const std::vector<AuditEntry>& audit) {
  out << "t,v,a,F_p,F_c,F_h,P,c_t,reward\n";
  for (const auto& a : audit) {
    out << sim::format_double(a.t) << ',' << sim::format_double(a.kinematics.speed) << ','
        << sim::format_double(a.kinematics.acceleration) << ',' << sim::format_double(a.risk.pedestrian) << ','
        << sim::format_double(a.risk.crossing) << ',' << sim::format_double(a.risk.history) << ','
        << sim::format_double(a.risk.probability) << ',' << (a.risk.safety ? 1 : 0) << ','
        << sim::format_double(a.reward) << '\n';
  }
}

}  // namespace safelabel::pipeline
