#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "safelabel/errors.hpp"
#include "safelabel/sim.hpp"

namespace safelabel::policy {

inline constexpr std::array<double, 5> kActions = {-1.0, -0.5, 0.0, 0.5, 1.0};
inline constexpr std::size_t kNumActions = kActions.size();
inline constexpr std::size_t kCoastAction = 2;

inline std::size_t snap_action(double a) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumActions; ++i) {
    if (std::abs(kActions[i] - a) < std::abs(kActions[best] - a)) best = i;
  }
  return best;
}

// Continuous controller inputs the tabular policy sees.
struct Observation {
  double distance_to_crossing = 0.0;
  double speed = 0.0;
  bool safety = false;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct Cell {
  std::size_t distance = 0;
  std::size_t speed = 0;
  bool safety = false;

  friend bool operator==(const Cell&, const Cell&) = default;
};

class StateDiscretizer {
 public:
  StateDiscretizer()
      : StateDiscretizer({-0.5, 0.5, 3.0, 6.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0},
                         {0.05, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0}) {}

  StateDiscretizer(std::vector<double> distance_edges, std::vector<double> speed_edges)
      : distance_edges_(std::move(distance_edges)), speed_edges_(std::move(speed_edges)) {
    check(distance_edges_, "distance");
    check(speed_edges_, "speed");
  }

  const std::vector<double>& distance_edges() const { return distance_edges_; }
  const std::vector<double>& speed_edges() const { return speed_edges_; }

  std::size_t distance_buckets() const { return distance_edges_.size() + 1; }
  std::size_t speed_buckets() const { return speed_edges_.size() + 1; }
  std::size_t cell_count() const { return distance_buckets() * speed_buckets() * 2; }

  // Bucket i holds values in [edge[i-1], edge[i]).
  static std::size_t bucket(const std::vector<double>& edges, double x) {
    return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
  }

  Cell cell(const Observation& o) const {
    return {bucket(distance_edges_, o.distance_to_crossing), bucket(speed_edges_, o.speed), o.safety};
  }
  std::size_t index(const Cell& c) const {
    return (c.distance * speed_buckets() + c.speed) * 2 + (c.safety ? 1 : 0);
  }
  std::size_t index(const Observation& o) const { return index(cell(o)); }
  Cell cell_at(std::size_t idx) const {
    return {idx / 2 / speed_buckets(), idx / 2 % speed_buckets(), idx % 2 == 1};
  }

  friend bool operator==(const StateDiscretizer&, const StateDiscretizer&) = default;

 private:
  static void check(const std::vector<double>& edges, const char* what) {
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (!(edges[i - 1] < edges[i])) {
        throw ConfigError(std::string(what) + " bucket edges must be strictly increasing");
      }
    }
  }

  std::vector<double> distance_edges_;
  std::vector<double> speed_edges_;
};

struct TrainConfig {
  double gamma = 0.95;
  std::size_t sweeps = 200;
  double tolerance = 1e-8;
  // Pessimism for thinly supported actions: each backup is lowered by
  // support_penalty / sqrt(n) for a group of n transitions. Zero gives the
  // plain averaged backup.
  double support_penalty = 0.0;
  // (cell, action) groups with fewer transitions are left out of the table,
  // so they neither enter the max nor get picked greedily. One keeps all.
  std::size_t min_support = 1;
  // Collapse consecutive frames spent in one cell into a single transition
  // before fitting (see merge_cell_runs).
  bool merge_runs = false;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("train.gamma must be in [0,1)");
    if (sweeps < 1) throw ConfigError("train.sweeps must be >= 1");
    if (!(tolerance >= 0.0)) throw ConfigError("train.tolerance must be >= 0");
    if (!(support_penalty >= 0.0)) throw ConfigError("train.support_penalty must be >= 0");
    if (min_support < 1) throw ConfigError("train.min_support must be >= 1");
  }
};

// Dense table over (cell, action); entries without data are marked unseen.
class QTable {
 public:
  QTable() = default;
  explicit QTable(std::size_t cells) : values_(cells * kNumActions, 0.0), seen_(cells * kNumActions, 0) {}

  std::size_t cells() const { return values_.size() / kNumActions; }
  double value(std::size_t cell, std::size_t action) const { return values_[cell * kNumActions + action]; }
  bool seen(std::size_t cell, std::size_t action) const { return seen_[cell * kNumActions + action] != 0; }
  bool seen(std::size_t cell) const {
    for (std::size_t a = 0; a < kNumActions; ++a) {
      if (seen(cell, a)) return true;
    }
    return false;
  }
  void set(std::size_t cell, std::size_t action, double v) {
    values_[cell * kNumActions + action] = v;
    seen_[cell * kNumActions + action] = 1;
  }
  void set_row(std::size_t cell, const std::array<double, kNumActions>& row) {
    for (std::size_t a = 0; a < kNumActions; ++a) set(cell, a, row[a]);
  }

  // Max over actions observed in the cell; 0 when none were.
  double state_value(std::size_t cell) const {
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t a = 0; a < kNumActions; ++a) {
      if (seen(cell, a)) {
        best = std::max(best, value(cell, a));
        any = true;
      }
    }
    return any ? best : 0.0;
  }

  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::vector<double> values_;
  std::vector<std::uint8_t> seen_;
};

// Index of the greedy discrete action. Ties go to the more braking action;
// cells without data coast.
inline std::size_t greedy_action_index(const QTable& q, std::size_t cell) {
  if (cell >= q.cells() || !q.seen(cell)) return kCoastAction;
  std::optional<std::size_t> best;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    if (!q.seen(cell, a)) continue;
    if (!best || q.value(cell, a) > q.value(cell, *best)) best = a;
  }
  return *best;
}

inline double greedy_action(const QTable& q, std::size_t cell) { return kActions[greedy_action_index(q, cell)]; }

struct CellTransition {
  std::size_t cell = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_cell = 0;
  bool done = false;
  // Frames covered; the successor value is discounted by gamma^duration.
  std::size_t duration = 1;
};

struct FitStats {
  std::size_t sweeps = 0;
  double final_change = 0.0;
};

// Fitted-Q iteration over grouped transitions. Each (cell, action) group is
// reduced to a reward mean and successor counts in a canonical order, so the
// result does not depend on dataset order.
inline QTable fit_q(std::vector<CellTransition> data, std::size_t cells, const TrainConfig& cfg,
                    FitStats* stats = nullptr) {
  cfg.validate();
  if (data.empty()) throw EmptyDataset();
  for (const auto& t : data) {
    if (t.cell >= cells || (!t.done && t.next_cell >= cells) || t.action >= kNumActions) {
      throw ConfigError("fit_q: transition references a cell or action out of range");
    }
    if (!std::isfinite(t.reward)) throw ConfigError("fit_q: non-finite reward");
    if (t.duration < 1) throw ConfigError("fit_q: transition duration must be >= 1");
  }
  std::sort(data.begin(), data.end(), [](const CellTransition& a, const CellTransition& b) {
    return std::tie(a.cell, a.action, a.done, a.next_cell, a.duration, a.reward) <
           std::tie(b.cell, b.action, b.done, b.next_cell, b.duration, b.reward);
  });

  struct Group {
    std::size_t cell, action;
    double mean_reward;
    std::vector<std::pair<std::size_t, double>> successors;  // (cell, discounted weight)
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < data.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < data.size() && data[j].cell == data[i].cell && data[j].action == data[i].action) {
      sum += data[j].reward;
      ++j;
    }
    if (j - i < cfg.min_support) {
      i = j;
      continue;
    }
    const double n = static_cast<double>(j - i);
    Group g{data[i].cell, data[i].action, sum / n - cfg.support_penalty / std::sqrt(n), {}};
    for (std::size_t k = i; k < j; ++k) {
      if (data[k].done) continue;
      const double w = std::pow(cfg.gamma, static_cast<double>(data[k].duration));
      if (!g.successors.empty() && g.successors.back().first == data[k].next_cell) {
        g.successors.back().second += w;
      } else {
        g.successors.emplace_back(data[k].next_cell, w);
      }
    }
    for (auto& s : g.successors) s.second /= n;
    groups.push_back(std::move(g));
    i = j;
  }

  if (groups.empty()) throw EmptyDataset();
  QTable q(cells);
  for (const auto& g : groups) q.set(g.cell, g.action, 0.0);
  std::vector<double> v(cells, 0.0);
  FitStats st;
  for (st.sweeps = 0; st.sweeps < cfg.sweeps;) {
    for (std::size_t c = 0; c < cells; ++c) v[c] = q.state_value(c);
    double change = 0.0;
    for (const auto& g : groups) {
      double backup = 0.0;
      for (const auto& [s, w] : g.successors) backup += w * v[s];
      const double next = g.mean_reward + backup;
      change = std::max(change, std::abs(next - q.value(g.cell, g.action)));
      q.set(g.cell, g.action, next);
    }
    ++st.sweeps;
    st.final_change = change;
    if (change < cfg.tolerance) break;
  }
  if (stats) *stats = st;
  return q;
}

// Collapses each run of consecutive frames that stay in one cell into a
// single transition: rewards are summed with discounting, the action is the
// run's mean action snapped to the grid, and the duration is the run length.
// A coarse grid otherwise shows many self-transitions, and a group whose
// samples never leave its cell reads as an endless stream of its reward.
// Input must be in episode order, each episode closed by a done transition.
inline std::vector<CellTransition> merge_cell_runs(const std::vector<CellTransition>& data, double gamma) {
  std::vector<CellTransition> out;
  for (std::size_t i = 0; i < data.size();) {
    CellTransition m{data[i].cell, 0, 0.0, 0, false, 0};
    double action_sum = 0.0;
    double discount = 1.0;
    std::size_t j = i;
    while (true) {
      const auto& t = data[j];
      m.reward += discount * t.reward;
      discount *= gamma;
      action_sum += kActions[t.action];
      ++m.duration;
      ++j;
      const bool continues = !t.done && t.next_cell == m.cell && j < data.size() && data[j].cell == m.cell;
      if (!continues) {
        m.next_cell = t.next_cell;
        m.done = t.done;
        break;
      }
    }
    m.action = snap_action(action_sum / static_cast<double>(m.duration));
    out.push_back(m);
    i = j;
  }
  return out;
}

// ---- persistence -----------------------------------------------------------

namespace detail {

inline std::string join_edges(const std::vector<double>& e) {
  std::string out;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (i) out += ';';
    out += sim::format_double(e[i]);
  }
  return out;
}

inline std::vector<double> split_edges(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace detail

struct TrainedPolicy {
  StateDiscretizer disc;
  QTable q;

  friend bool operator==(const TrainedPolicy&, const TrainedPolicy&) = default;
};

// CSV with the discretizer in two leading comment lines, then one row per
// observed (cell, action).
inline void save_qtable(const TrainedPolicy& p, const std::filesystem::path& path,
                        const nlohmann::json& config_snapshot = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# distance_edges=" << detail::join_edges(p.disc.distance_edges()) << '\n';
  out << "# speed_edges=" << detail::join_edges(p.disc.speed_edges()) << '\n';
  if (!config_snapshot.is_null()) out << "# config=" << config_snapshot.dump() << '\n';
  out << "distance_bucket,speed_bucket,c_t,action,value\n";
  for (std::size_t c = 0; c < p.q.cells(); ++c) {
    const Cell cell = p.disc.cell_at(c);
    for (std::size_t a = 0; a < kNumActions; ++a) {
      if (!p.q.seen(c, a)) continue;
      out << cell.distance << ',' << cell.speed << ',' << (cell.safety ? 1 : 0) << ','
          << sim::format_double(kActions[a]) << ',' << sim::format_double(p.q.value(c, a)) << '\n';
    }
  }
}

inline TrainedPolicy load_qtable(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::vector<double> dist, speed;
  auto header = [&](const std::string& key, std::vector<double>& dst) {
    if (!std::getline(in, line) || line.rfind("# " + key + "=", 0) != 0) {
      throw SchemaError("qtable: missing '" + key + "' header in " + path.string());
    }
    dst = detail::split_edges(line.substr(key.size() + 3));
  };
  header("distance_edges", dist);
  header("speed_edges", speed);
  std::size_t lineno = 2;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind('#', 0) == 0) continue;
    have_header = line == "distance_bucket,speed_bucket,c_t,action,value";
    break;
  }
  if (!have_header) throw SchemaError("qtable: bad column header in " + path.string());
  TrainedPolicy p{StateDiscretizer(dist, speed), QTable{}};
  p.q = QTable(p.disc.cell_count());
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[5];
    for (auto& s : f) {
      if (!std::getline(ss, s, ',')) throw SchemaError("qtable: short row at line " + std::to_string(lineno));
    }
    try {
      const Cell cell{std::stoul(f[0]), std::stoul(f[1]), f[2] == "1"};
      if (cell.distance >= p.disc.distance_buckets() || cell.speed >= p.disc.speed_buckets()) {
        throw SchemaError("qtable: bucket out of range at line " + std::to_string(lineno));
      }
      const double action = std::stod(f[3]);
      const std::size_t a = snap_action(action);
      if (kActions[a] != action) throw SchemaError("qtable: unknown action at line " + std::to_string(lineno));
      p.q.set(p.disc.index(cell), a, std::stod(f[4]));
    } catch (const std::invalid_argument&) {
      throw SchemaError("qtable: unparsable row at line " + std::to_string(lineno));
    } catch (const std::out_of_range&) {
      throw SchemaError("qtable: unparsable row at line " + std::to_string(lineno));
    }
  }
  return p;
}

// ---- evaluation ------------------------------------------------------------

inline Observation observe(const sim::StepContext& ctx) {
  return {ctx.cfg.crossing_position - ctx.state.ego_x, ctx.state.ego_v, ctx.risk.safety};
}

inline sim::Controller learned_controller(const TrainedPolicy& p) {
  return [&p](const sim::StepContext& ctx) { return greedy_action(p.q, p.disc.index(observe(ctx))); };
}

struct CollisionReport {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  std::size_t collisions = 0;
  std::size_t timeouts = 0;
  double success_pct = 0.0;
  double collision_pct = 0.0;
  double timeout_pct = 0.0;
  std::optional<double> mean_stopping_distance;
  std::size_t stops = 0;

  nlohmann::json to_json() const {
    return {{"episodes", episodes},
            {"successes", successes},
            {"collisions", collisions},
            {"timeouts", timeouts},
            {"success_pct", success_pct},
            {"collision_pct", collision_pct},
            {"timeout_pct", timeout_pct},
            {"mean_stopping_distance",
             mean_stopping_distance ? nlohmann::json(*mean_stopping_distance) : nlohmann::json()},
            {"episodes_with_stop", stops}};
  }

  friend bool operator==(const CollisionReport&, const CollisionReport&) = default;
};

struct EpisodeSummary {
  sim::Outcome outcome = sim::Outcome::Running;
  std::optional<double> stopping_distance;
  std::size_t frames = 0;
};

inline CollisionReport summarize(const std::vector<EpisodeSummary>& eps) {
  CollisionReport r;
  r.episodes = eps.size();
  double stop_sum = 0.0;
  for (const auto& e : eps) {
    r.successes += e.outcome == sim::Outcome::Success;
    r.collisions += e.outcome == sim::Outcome::Collision;
    r.timeouts += e.outcome == sim::Outcome::Timeout;
    if (e.stopping_distance) {
      stop_sum += *e.stopping_distance;
      ++r.stops;
    }
  }
  if (r.episodes) {
    const double n = static_cast<double>(r.episodes);
    r.success_pct = 100.0 * static_cast<double>(r.successes) / n;
    r.collision_pct = 100.0 * static_cast<double>(r.collisions) / n;
    r.timeout_pct = 100.0 * static_cast<double>(r.timeouts) / n;
  }
  if (r.stops) r.mean_stopping_distance = stop_sum / static_cast<double>(r.stops);
  return r;
}

// Runs episodes 0..n-1 (seeded as collect_episodes does) across threads.
// Results are stored by index, so the report does not depend on scheduling.
inline std::vector<EpisodeSummary> run_many(const std::function<sim::Controller()>& make_controller,
                                            std::size_t n, const sim::SimSettings& settings,
                                            std::size_t threads = 0) {
  sim::SimSettings s = settings;
  s.keep_maps = false;
  std::vector<EpisodeSummary> out(n);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      const auto log = sim::run_episode(make_controller(), s, sim::episode_seed(s.scenario.seed, i));
      out[i] = {log.outcome, log.stopping_distance, log.frames.size()};
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

inline CollisionReport evaluate(const TrainedPolicy& p, const sim::SimSettings& settings, std::size_t n,
                                std::size_t threads = 0) {
  if (n < 1) throw ConfigError("evaluate: n must be >= 1");
  return summarize(run_many([&p] { return learned_controller(p); }, n, settings, threads));
}

inline CollisionReport evaluate(const sim::Controller& controller, const sim::SimSettings& settings,
                                std::size_t n, std::size_t threads = 0) {
  if (n < 1) throw ConfigError("evaluate: n must be >= 1");
  return summarize(run_many([&controller] { return controller; }, n, settings, threads));
}

}  // namespace safelabel::policy
