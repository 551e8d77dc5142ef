// Acceptance harness: one PASS/FAIL line per criterion, exit 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "safelabel.hpp"

using namespace safelabel;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

// Criteria listed with --known-failure=N still print FAIL but do not fail the
// run; one that starts passing does, so the list cannot go stale.
std::set<int> known_failures;
int failures = 0;
int unexpected = 0;

void report(int id, const char* name, const Result& r, double secs) {
  const bool known = known_failures.count(id) > 0;
  std::printf("%s  %d. %s (%.2fs)%s%s%s\n", r.pass ? "PASS" : "FAIL", id, name, secs, r.detail.empty() ? "" : ": ",
              r.detail.c_str(), known ? (r.pass ? " [listed as known failure, now passes]" : " [known failure]") : "");
  std::fflush(stdout);
  if (!r.pass) ++failures;
  if (r.pass == known) ++unexpected;
}

// ---- 1. risk gate -----------------------------------------------------------

Result risk_gate() {
  Result r;
  const risk::RiskConfig cfg;
  r.require(risk::aggregate(1.0, 0.5, 0.0, cfg).safety, "F_p=1, F_c=0.5 must raise c_t");
  r.require(risk::aggregate(1.0, 0.0, 0.0, cfg).safety, "F_p=1 alone must raise c_t");
  for (double m : {0.5}) {
    r.require(!risk::aggregate(m, 0, 0, cfg).safety, "single medium F_p raised c_t");
    r.require(!risk::aggregate(0, m, 0, cfg).safety, "single medium F_c raised c_t");
    r.require(!risk::aggregate(0, 0, m, cfg).safety, "single medium F_h raised c_t");
    r.require(!risk::aggregate(0.1, m, 0.1, cfg).safety, "medium plus two lows raised c_t");
  }
  r.require(!risk::aggregate(0, 0, 0, cfg).safety, "no risk raised c_t");
  const double at_psi = cfg.sigmoid_center + std::log(cfg.threshold / (1.0 - cfg.threshold)) / cfg.sigmoid_gain;
  risk::RiskConfig exact = cfg;
  exact.threshold = risk::scaled_sigmoid(at_psi, exact);
  r.require(!risk::aggregate(at_psi, 0, 0, exact).safety, "P == psi must not raise c_t");
  r.require(risk::aggregate(at_psi + 1e-9, 0, 0, exact).safety, "P just above psi must raise c_t");
  r.require(std::abs(exact.threshold - 0.75) < 1e-12, "boundary construction drifted from 0.75");
  return r;
}

// ---- 2. attention -------------------------------------------------------------

double rel_err(double a, double b) {
  const double s = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / s;
}

Result attention_kernel() {
  Result r;
  std::mt19937 rng(17);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  auto cube = [&](std::size_t c, std::size_t h, std::size_t w) {
    attention::FeatureCube x(c, h, w);
    for (auto& v : x.values) v = n(rng);
    return x;
  };
  auto layer = [&](std::size_t h, std::size_t w, std::optional<double> fill = {}) {
    attention::RealLayer l{w, h, std::vector<double>(w * h)};
    for (auto& v : l.values) v = fill ? *fill : u(rng);
    return l;
  };
  const attention::AttentionWeights wt;
  double worst_identity = 0, worst_scale = 0, worst_linear = 0, worst_oracle = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = cube(2, 8, 8);
    const attention::SemanticLayerSet zero{layer(8, 8, 0.0), layer(8, 8, 0.0), layer(8, 8, 0.0)};
    const attention::SemanticLayerSet ones{layer(8, 8, 1.0), layer(8, 8, 1.0), layer(8, 8, 1.0)};
    const auto id = attention::spatial_attention(z, zero, wt);
    const auto sc = attention::spatial_attention(z, ones, wt);
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      worst_identity = std::max(worst_identity, rel_err(id.values[i], z.values[i]));
      worst_scale = std::max(worst_scale, rel_err(sc.values[i], 3.25 * z.values[i]));
    }
    const auto z2 = cube(2, 8, 8);
    const attention::SemanticLayerSet l{layer(8, 8), layer(8, 8), layer(8, 8)};
    const double a = n(rng), b = n(rng);
    attention::FeatureCube mix(2, 8, 8);
    for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = a * z.values[i] + b * z2.values[i];
    const auto lhs = attention::spatial_attention(mix, l, wt);
    const auto r1 = attention::spatial_attention(z, l, wt);
    const auto r2 = attention::spatial_attention(z2, l, wt);
    for (std::size_t i = 0; i < mix.values.size(); ++i) {
      const double rhs = a * r1.values[i] + b * r2.values[i];
      // Relative to the term magnitudes, since rhs may cancel to near zero.
      const double scale = std::max({std::abs(a * r1.values[i]), std::abs(b * r2.values[i]), 1e-300});
      worst_linear = std::max(worst_linear, std::abs(lhs.values[i] - rhs) / scale);
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 1 + rng() % 4, h = 1 + rng() % 9, w = 1 + rng() % 9;
    const auto z = cube(c, h, w);
    const attention::SemanticLayerSet l{layer(h, w), layer(h, w), layer(h, w)};
    const auto out = attention::spatial_attention(z, l, wt);
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const double v = z.at(k, y, x);
          const double ref = wt.pedestrian * l.pedestrian.at(y, x) * v + wt.crossing * l.crossing.at(y, x) * v +
                             wt.vehicle * l.vehicle.at(y, x) * v + v;
          worst_oracle = std::max(worst_oracle, rel_err(out.at(k, y, x), ref));
        }
      }
    }
  }
  r.require(worst_identity == 0.0, "identity error " + std::to_string(worst_identity));
  r.require(worst_scale <= 1e-12, "scaling error " + std::to_string(worst_scale));
  r.require(worst_linear <= 1e-12, "linearity error " + std::to_string(worst_linear));
  r.require(worst_oracle <= 1e-12, "oracle error " + std::to_string(worst_oracle));
  if (r.pass) {
    std::ostringstream s;
    s << "max rel err identity " << worst_identity << ", scale " << worst_scale << ", linear " << worst_linear
      << ", oracle " << worst_oracle;
    r.detail = s.str();
  }
  return r;
}

// ---- 3. fitted-Q oracle --------------------------------------------------------

// Exact Q* by value iteration on an explicit model, run to machine precision.
std::vector<std::vector<double>> value_iteration(const std::vector<std::vector<double>>& R,
                                                 const std::vector<std::vector<std::vector<double>>>& P,
                                                 double gamma) {
  const std::size_t S = R.size(), A = R[0].size();
  std::vector<double> V(S, 0.0);
  std::vector<std::vector<double>> Q(S, std::vector<double>(A, 0.0));
  for (int it = 0; it < 100000; ++it) {
    double change = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        double q = R[s][a];
        for (std::size_t s2 = 0; s2 < S; ++s2) q += gamma * P[s][a][s2] * V[s2];
        Q[s][a] = q;
      }
    }
    for (std::size_t s = 0; s < S; ++s) {
      const double v = *std::max_element(Q[s].begin(), Q[s].end());
      change = std::max(change, std::abs(v - V[s]));
      V[s] = v;
    }
    if (change < 1e-14) break;
  }
  return Q;
}

Result fitted_q_oracle() {
  Result r;
  std::mt19937 rng(99);
  const std::size_t S = 20, A = 3, per = 6;
  const double gamma = 0.95;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> next(0, S - 1);
    std::uniform_real_distribution<double> rew(-1, 1);
    std::vector<policy::CellTransition> data;
    std::vector<std::vector<double>> R(S, std::vector<double>(A, 0.0));
    std::vector<std::vector<std::vector<double>>> P(S, std::vector<std::vector<double>>(A, std::vector<double>(S, 0.0)));
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t k = 0; k < per; ++k) {
          const bool done = rng() % 8 == 0;
          const policy::CellTransition t{s, a, rew(rng), done ? 0 : next(rng), done};
          R[s][a] += t.reward / per;
          if (!done) P[s][a][t.next_cell] += 1.0 / per;
          data.push_back(t);
        }
      }
    }
    std::shuffle(data.begin(), data.end(), rng);
    policy::TrainConfig cfg;
    cfg.gamma = gamma;
    cfg.sweeps = 100000;
    cfg.tolerance = 1e-13;
    const auto q = policy::fit_q(data, S, cfg);
    const auto ref = value_iteration(R, P, gamma);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) worst = std::max(worst, std::abs(q.value(s, a) - ref[s][a]));
    }
  }
  r.require(worst < 1e-6, "sup-norm gap " + std::to_string(worst));
  if (r.pass) r.detail = "worst sup-norm gap " + fmt(worst * 1e9, 3) + "e-9 over 20 MDPs";
  return r;
}

// ---- 4 and 5. end-to-end study -------------------------------------------------

const sim::Density kDensities[] = {sim::Density::Low, sim::Density::Medium, sim::Density::High};
const sim::Occluder kOccluders[] = {sim::Occluder::None, sim::Occluder::Partial, sim::Occluder::Full};

// Scripted data-collection mix per 100 training episodes.
struct MixEntry {
  sim::PolicyKind kind;
  std::size_t count;
};
const MixEntry kTrainingMix[] = {{sim::PolicyKind::Behavioral, 85},
                                 {sim::PolicyKind::Random, 5},
                                 {sim::PolicyKind::Aggressive, 5},
                                 {sim::PolicyKind::Conservative, 5}};

policy::TrainConfig study_train_config() {
  policy::TrainConfig tc;
  tc.gamma = 0.95;
  tc.sweeps = 20000;
  tc.tolerance = 1e-9;
  tc.support_penalty = 5.0;
  return tc;
}

constexpr std::size_t kTrainEpisodes = 100;
constexpr std::size_t kEvalEpisodes = 100;
constexpr std::uint64_t kTrainSeed = 1000;
constexpr std::uint64_t kEvalSeed = 77;

std::vector<sim::PolicyKind> training_plan() {
  std::vector<sim::PolicyKind> plan;
  for (const auto& m : kTrainingMix) plan.insert(plan.end(), m.count, m.kind);
  // Interleave so every occluder sees every policy.
  std::vector<sim::PolicyKind> out(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) out[i] = plan[(i * 37) % plan.size()];
  return out;
}

struct Study {
  std::map<std::pair<sim::Density, sim::Occluder>, policy::CollisionReport> gen, uds;
  std::map<sim::Density, policy::TrainedPolicy> gen_policy;
};

Study run_study() {
  Study st;
  const auto plan = training_plan();
  const policy::StateDiscretizer disc;
  pipeline::LabelConfig gen_cfg, uds_cfg;
  uds_cfg.labeler = pipeline::Labeler::Uds;
  for (auto d : kDensities) {
    pipeline::LabeledDataset dg, du;
    for (std::size_t i = 0; i < kTrainEpisodes; ++i) {
      sim::SimSettings s;
      s.scenario.density = d;
      s.scenario.occluder = kOccluders[i % 3];
      s.scenario.seed = kTrainSeed + static_cast<std::uint64_t>(d);
      auto log = sim::run_episode(sim::scripted_controller(plan[i % plan.size()]), s,
                                  sim::episode_seed(s.scenario.seed, i));
      const std::string id = "ep" + std::to_string(i);
      dg.append(pipeline::label_episode(log, id, gen_cfg));
      du.append(pipeline::label_episode(log, id, uds_cfg));
    }
    const auto tc = study_train_config();
    auto pg = pipeline::train(dg, disc, tc);
    const auto pu = pipeline::train(du, disc, tc);
    for (auto o : kOccluders) {
      sim::SimSettings s;
      s.scenario.density = d;
      s.scenario.occluder = o;
      s.scenario.seed = kEvalSeed;
      st.gen[{d, o}] = policy::evaluate(pg, s, kEvalEpisodes);
      st.uds[{d, o}] = policy::evaluate(pu, s, kEvalEpisodes);
    }
    st.gen_policy.emplace(d, std::move(pg));
  }
  return st;
}

std::string row(const policy::CollisionReport& r) {
  return "S" + fmt(r.success_pct, 0) + "/C" + fmt(r.collision_pct, 0) + "/T" + fmt(r.timeout_pct, 0);
}

Result collision_study(const Study& st, double secs) {
  Result r;
  std::string table;
  for (auto d : kDensities) {
    for (auto o : kOccluders) {
      const auto& g = st.gen.at({d, o});
      const auto& u = st.uds.at({d, o});
      table += std::string(sim::to_string(d)) + "/" + std::string(sim::to_string(o)) + " gen " + row(g) + " uds " +
               row(u) + "; ";
      if (d == sim::Density::Low) {
        r.require(g.success_pct >= 85.0, "LOW/" + std::string(sim::to_string(o)) + " success " + fmt(g.success_pct, 1) + " < 85");
        r.require(g.collision_pct <= 5.0, "LOW/" + std::string(sim::to_string(o)) + " collision " + fmt(g.collision_pct, 1) + " > 5");
      }
      if (d == sim::Density::High) {
        r.require(g.collision_pct <= u.collision_pct,
                  "HIGH/" + std::string(sim::to_string(o)) + " gen collision " + fmt(g.collision_pct, 1) + " > uds " +
                      fmt(u.collision_pct, 1));
      }
    }
  }
  // Always-throttle baseline, over episodes that contain a scheduled crossing.
  std::size_t with_crossing = 0, collided = 0;
  for (auto d : kDensities) {
    for (auto o : kOccluders) {
      sim::SimSettings s;
      s.scenario.density = d;
      s.scenario.occluder = o;
      s.scenario.seed = kEvalSeed;
      s.keep_maps = false;
      for (std::size_t i = 0; i < kEvalEpisodes; ++i) {
        const auto log = sim::run_episode(sim::aggressive_action, s, sim::episode_seed(s.scenario.seed, i));
        if (!log.has_scheduled_crossing()) continue;
        ++with_crossing;
        collided += log.outcome == sim::Outcome::Collision;
      }
    }
  }
  const double base = with_crossing ? 100.0 * static_cast<double>(collided) / static_cast<double>(with_crossing) : 0.0;
  r.require(with_crossing > 0 && base >= 80.0, "always-throttle collides in " + fmt(base, 1) + "% < 80%");
  r.require(secs < 600.0, "runtime " + fmt(secs, 0) + " s >= 600 s");
  const std::string summary = table + "always-throttle " + fmt(base, 1) + "% of " + std::to_string(with_crossing);
  r.detail = r.pass ? summary : r.detail + " | " + summary;
  return r;
}

// Rising/falling edges of c_t over an episode.
struct Edges {
  std::vector<std::size_t> rising, falling;
};

Edges safety_edges(const sim::EpisodeLog& log) {
  Edges e;
  for (std::size_t i = 1; i < log.frames.size(); ++i) {
    const bool a = log.frames[i - 1].risk.safety, b = log.frames[i].risk.safety;
    if (!a && b) e.rising.push_back(i);
    if (a && !b) e.falling.push_back(i);
  }
  return e;
}

Result trajectory_shape(const Study& st) {
  Result r;
  const auto& p = st.gen_policy.at(sim::Density::Low);
  const pipeline::LabelConfig cfg;
  // Best episode: the successful LOW run with the highest generated return.
  std::optional<sim::EpisodeLog> best;
  double best_return = -1e300;
  for (auto o : kOccluders) {
    sim::SimSettings s;
    s.scenario.density = sim::Density::Low;
    s.scenario.occluder = o;
    s.scenario.seed = kEvalSeed;
    for (std::size_t i = 0; i < kEvalEpisodes; ++i) {
      auto log = sim::run_episode(policy::learned_controller(p), s, sim::episode_seed(s.scenario.seed, i));
      if (log.outcome != sim::Outcome::Success) continue;
      double ret = 0.0;
      for (const auto& t : pipeline::label_episode(log, "best", cfg).transitions) ret += t.reward;
      if (ret > best_return) {
        best_return = ret;
        for (auto& f : log.frames) f.map = {};
        best = std::move(log);
      }
    }
  }
  if (!best) {
    r.require(false, "no successful LOW episode");
    return r;
  }
  const auto& log = *best;
  const double crossing = log.scenario.crossing_position;
  const auto e = safety_edges(log);
  std::size_t rising_before = 0;
  for (auto i : e.rising) rising_before += log.frames[i].ego_x < crossing;
  r.require(e.rising.size() == 1 && rising_before == 1,
            std::to_string(e.rising.size()) + " rising edges (" + std::to_string(rising_before) + " before crossing)");
  r.require(e.falling.size() == 1, std::to_string(e.falling.size()) + " falling edges");
  if (e.falling.size() == 1) {
    r.require(!log.frames[e.falling[0]].risk.pedestrian_on_road, "c_t fell while a pedestrian was on the road");
  }
  double max_speed_on = 0.0;
  for (const auto& f : log.frames) {
    if (f.risk.safety) max_speed_on = std::max(max_speed_on, f.kinematics.speed);
  }
  r.require(max_speed_on < 0.1, "speed reaches " + fmt(max_speed_on, 2) + " m/s while c_t=1");
  // Informational: speed at the rising edge, and whether the ego moves again
  // once it has stopped inside the c_t=1 interval.
  bool stopped = false, takeoff = false;
  for (const auto& f : log.frames) {
    if (!f.risk.safety) continue;
    if (f.kinematics.speed < 0.1) stopped = true;
    else if (stopped) takeoff = true;
  }
  std::string rise;
  if (!e.rising.empty()) {
    const auto& f = log.frames[e.rising[0]];
    rise = ", c_t rises " + fmt(crossing - f.ego_x, 1) + " m before the crossing at " + fmt(f.kinematics.speed, 2) +
           " m/s, " + (takeoff ? "moves again" : "no takeoff") + " after stopping";
  }
  r.require(log.stopping_distance && *log.stopping_distance > 0.0, "no positive stopping distance");
  const std::string summary = "seed " + std::to_string(log.seed) + " " + std::string(sim::to_string(log.scenario.occluder)) +
                              ", return " + fmt(best_return, 2) + ", stop " +
                              (log.stopping_distance ? fmt(*log.stopping_distance, 2) : std::string("none")) + " m" + rise;
  r.detail = r.pass ? summary : r.detail + " | " + summary;
  return r;
}

// ---- 6. pinhole --------------------------------------------------------------

Result pinhole_round_trip() {
  Result r;
  sim::ScenarioConfig cfg;
  cfg.occluder = sim::Occluder::None;
  const geometry::CameraIntrinsics cam;
  std::string detail;
  for (double d : {5.0, 10.0, 20.0, 40.0}) {
    sim::SimState s;
    sim::Pedestrian p;
    p.x = d;
    p.lateral_y = 0.5;
    p.phase = sim::Phase::Crossing;
    s.pedestrians.push_back(p);
    const auto est = geometry::nearest_pedestrian_distance(sim::render_semantic(s, cam, cfg), cam, 1);
    if (!est) {
      r.require(false, "no detection at " + fmt(d, 0) + " m");
      continue;
    }
    const double err = std::abs(*est - d) / d;
    detail += fmt(d, 0) + "m->" + fmt(*est, 2) + " ";
    r.require(err <= 0.10, "error " + fmt(100 * err, 1) + "% at " + fmt(d, 0) + " m");
  }
  if (r.pass) r.detail = detail;
  return r;
}

// ---- 7. comparison fixture ----------------------------------------------------

Result comparison_fixture() {
  Result r;
  std::vector<int> human(1315, 0), gen(1315, 0);
  for (std::size_t i = 0; i < 318; ++i) human[i] = 1;
  for (std::size_t i = 0; i < 92; ++i) gen[i] = 1;
  for (std::size_t i = 318; i < 318 + 235; ++i) gen[i] = 1;
  std::mt19937 rng(5);
  std::vector<std::size_t> perm(1315);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> h2(1315), g2(1315);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    h2[i] = human[perm[i]];
    g2[i] = gen[perm[i]];
  }
  const auto c = pipeline::compare_safety_labels(g2, h2);
  const double agree = c.agreement_pct_on_human_unsafe.value_or(-1);
  r.require(std::abs(agree - 28.9) <= 0.1, "agreement " + fmt(agree, 2));
  r.require(c.true_positive + c.false_negative + c.false_positive + c.true_negative == 1315, "cells do not sum to 1315");
  r.require(c.true_positive == 92 && c.human_unsafe == 318, "TP/human-unsafe counts off");
  if (r.pass) r.detail = "agreement " + fmt(agree, 2) + "%, TP 92 FN 226 FP 235 TN " + std::to_string(c.true_negative);
  return r;
}

// ---- 8. relabel reproducibility ---------------------------------------------

Result relabel_reproducibility(double& label_secs) {
  Result r;
  const auto root = fs::temp_directory_path() / "safelabel_acceptance_relabel";
  fs::remove_all(root);
  sim::SimSettings s;
  s.scenario.density = sim::Density::High;
  s.scenario.seed = 8;
  std::size_t frames = 0;
  for (std::size_t i = 0; frames < 1000; ++i) {
    const auto log = sim::run_episode(sim::scripted_controller(sim::PolicyKind::Behavioral), s, sim::episode_seed(8, i));
    char name[32];
    std::snprintf(name, sizeof(name), "episode_%04zu", i);
    sim::save_episode(log, root / name, nlohmann::json::object(), i);
    frames += log.frames.size();
  }
  auto label_all = [&] {
    std::string dump;
    for (const auto& dir : pipeline::find_episode_dirs(root, pipeline::Source::Sim)) {
      const auto ds = pipeline::label_episode(pipeline::ingest_episode(dir, pipeline::Source::Sim), pipeline::LabelConfig{});
      for (const auto& a : ds.audit) dump += pipeline::to_json(a).dump() + '\n';
      for (const auto& t : ds.transitions) dump += pipeline::to_json(t).dump() + '\n';
    }
    return dump;
  };
  const auto t0 = Clock::now();
  const auto a = label_all();
  label_secs = seconds_since(t0);
  const auto b = label_all();
  r.require(a == b, "relabeling is not bit-identical");
  r.require(label_secs < 10.0, "labeling took " + fmt(label_secs, 2) + " s");
  if (r.pass) r.detail = std::to_string(frames) + " frames labeled in " + fmt(label_secs, 2) + " s, identical";
  fs::remove_all(root);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    const std::string flag = "--known-failure=";
    if (a.rfind(flag, 0) != 0) {
      std::fprintf(stderr, "usage: %s [--known-failure=N]...\n", argv[0]);
      return 2;
    }
    known_failures.insert(std::stoi(a.substr(flag.size())));
  }
  auto timed = [](int id, const char* name, const std::function<Result()>& fn, double limit) {
    const auto t0 = Clock::now();
    Result r = fn();
    const double secs = seconds_since(t0);
    if (limit > 0) r.require(secs < limit, "runtime " + fmt(secs, 2) + " s over " + fmt(limit, 0) + " s budget");
    report(id, name, r, secs);
  };
  timed(1, "risk gate sentinels", risk_gate, 1.0);
  timed(2, "attention kernel exactness", attention_kernel, 5.0);
  timed(3, "fitted-Q matches value iteration", fitted_q_oracle, 30.0);
  {
    const auto t0 = Clock::now();
    const Study st = run_study();
    const double secs = seconds_since(t0);
    const auto t1 = Clock::now();
    Result r4 = collision_study(st, secs);
    report(4, "end-to-end collision study", r4, secs + seconds_since(t1));
    const auto t2 = Clock::now();
    const Result r5 = trajectory_shape(st);
    report(5, "trajectory shape of the best LOW episode", r5, seconds_since(t2));
  }
  timed(6, "pinhole round trip", pinhole_round_trip, 5.0);
  timed(7, "label comparison arithmetic", comparison_fixture, 1.0);
  {
    const auto t0 = Clock::now();
    double label_secs = 0.0;
    const Result r = relabel_reproducibility(label_secs);
    report(8, "relabel reproducibility and throughput", r, seconds_since(t0));
  }
  std::printf("%d criteria failed, %d unexpected\n", failures, unexpected);
  return unexpected == 0 ? 0 : 1;
}
