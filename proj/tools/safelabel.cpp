#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "safelabel.hpp"

namespace fs = std::filesystem;
using namespace safelabel;
using nlohmann::json;

namespace {

// Bad flag values surface as usage errors (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T, class Parse>
std::vector<T> parse_list(const std::string& flag, const std::string& text, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse(item);
    if (!v) throw UsageError("--" + flag + ": unknown value '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError("--" + flag + ": empty list");
  return out;
}

struct Global {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

config::Settings load_settings(const Global& g) {
  config::Settings s;
  if (!g.config_file.empty()) config::apply_file(s, g.config_file);
  for (const auto& o : g.overrides) config::apply_override(s, o);
  if (g.seed) s.scenario.seed = *g.seed;
  return s;
}

fs::path require_out(const Global& g, const char* what) {
  if (g.out.empty()) throw UsageError(std::string("--out is required (") + what + ")");
  return g.out;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string policy = "behavioral";
  std::size_t episodes = 1;
  std::string density;
  std::string occlusion;
  std::string qtable;
};

int cmd_simulate(const Global& g, const SimulateArgs& a) {
  config::Settings s = load_settings(g);
  const auto kinds = parse_list<sim::PolicyKind>("policy", a.policy, sim::parse_policy);
  std::vector<sim::Density> densities{s.scenario.density};
  std::vector<sim::Occluder> occluders{s.scenario.occluder};
  if (!a.density.empty()) densities = parse_list<sim::Density>("density", a.density, sim::parse_density);
  if (!a.occlusion.empty()) occluders = parse_list<sim::Occluder>("occlusion", a.occlusion, sim::parse_occluder);
  if (a.episodes < 1) throw UsageError("--episodes must be >= 1");
  std::optional<policy::TrainedPolicy> learned;
  for (auto k : kinds) {
    if (k != sim::PolicyKind::Learned) continue;
    if (a.qtable.empty()) throw UsageError("--policy learned needs --qtable");
    if (!learned) learned = policy::load_qtable(a.qtable);
  }
  s.validate();
  const fs::path out = require_out(g, "episode root directory");
  const json snapshot = config::to_json(s);

  // Lists cycle per episode, so one run can mix policies and scenarios.
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < a.episodes; ++i) {
    sim::SimSettings ss = s.sim_settings();
    ss.scenario.density = densities[i % densities.size()];
    ss.scenario.occluder = occluders[i % occluders.size()];
    const auto kind = kinds[i % kinds.size()];
    const sim::Controller c =
        kind == sim::PolicyKind::Learned ? policy::learned_controller(*learned) : sim::scripted_controller(kind);
    auto log = sim::run_episode(c, ss, sim::episode_seed(s.scenario.seed, i));
    log.policy = kind;
    char name[32];
    std::snprintf(name, sizeof(name), "episode_%04zu", i);
    sim::save_episode(log, out / name, snapshot, i);
    counts[log.outcome == sim::Outcome::Success ? 0 : log.outcome == sim::Outcome::Collision ? 1 : 2]++;
  }
  std::cout << "wrote " << a.episodes << " episodes to " << out.string() << " (success " << counts[0]
            << ", collision " << counts[1] << ", timeout " << counts[2] << ")\n";
  return 0;
}

// ---- label -----------------------------------------------------------------

struct LabelArgs {
  std::string in;
  std::string source = "sim";
  std::string labeler;
};

int cmd_label(const Global& g, const LabelArgs& a) {
  config::Settings s = load_settings(g);
  const auto source = pipeline::parse_source(a.source);
  if (!source) throw UsageError("--source: unknown value '" + a.source + "'");
  if (!a.labeler.empty()) {
    const auto l = pipeline::parse_labeler(a.labeler);
    if (!l) throw UsageError("--labeler: unknown value '" + a.labeler + "'");
    s.labeler = *l;
  }
  s.validate();
  const fs::path out = require_out(g, "dataset directory");
  const json snapshot = config::to_json(s);
  const auto cfg = s.label_config();

  pipeline::LabeledDataset ds;
  ds.config = snapshot;
  for (const auto& dir : pipeline::find_episode_dirs(a.in, *source)) {
    const auto ep = pipeline::ingest_episode(dir, *source, s.scenario.a_max);
    ds.append(pipeline::label_episode(ep, cfg, snapshot));
  }
  pipeline::export_dataset(ds, out);
  std::cout << "labeled " << ds.audit.size() << " frames, " << ds.transitions.size() << " transitions -> "
            << out.string() << '\n';
  return 0;
}

// ---- train -----------------------------------------------------------------

int cmd_train(const Global& g, const std::string& in) {
  config::Settings s = load_settings(g);
  s.validate();
  const fs::path out = require_out(g, "qtable csv");
  const auto ds = pipeline::import_dataset(in);
  policy::FitStats stats;
  const auto p = pipeline::train(ds, policy::StateDiscretizer{}, s.train, &stats);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  policy::save_qtable(p, out, config::to_json(s));
  std::cout << "trained on " << ds.transitions.size() << " transitions: " << stats.sweeps << " sweeps, max change "
            << stats.final_change << " -> " << out.string() << '\n';
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string qtable;
  std::string policy;
  std::size_t episodes = 100;
  std::string density;
  std::string occlusion;
  std::size_t threads = 0;
};

void print_row(const std::string& name, const policy::CollisionReport& r) {
  char buf[160];
  const std::string stop = r.mean_stopping_distance ? sim::format_double(*r.mean_stopping_distance) : "-";
  std::snprintf(buf, sizeof(buf), "%-16s %8zu %9.1f %9.1f %9.1f  %s\n", name.c_str(), r.episodes, r.success_pct,
                r.collision_pct, r.timeout_pct, stop.substr(0, 6).c_str());
  std::cout << buf;
}

int cmd_eval(const Global& g, const EvalArgs& a) {
  config::Settings s = load_settings(g);
  std::vector<sim::Density> densities{s.scenario.density};
  std::vector<sim::Occluder> occluders{s.scenario.occluder};
  if (!a.density.empty()) densities = parse_list<sim::Density>("density", a.density, sim::parse_density);
  if (!a.occlusion.empty()) occluders = parse_list<sim::Occluder>("occlusion", a.occlusion, sim::parse_occluder);
  if (a.qtable.empty() == a.policy.empty()) throw UsageError("eval needs exactly one of --qtable or --policy");
  if (a.episodes < 1) throw UsageError("--episodes must be >= 1");
  std::optional<sim::PolicyKind> scripted;
  if (!a.policy.empty()) {
    scripted = sim::parse_policy(a.policy);
    if (!scripted || *scripted == sim::PolicyKind::Learned) throw UsageError("--policy: expected a scripted policy");
  }
  s.validate();
  std::optional<policy::TrainedPolicy> learned;
  if (!a.qtable.empty()) learned = policy::load_qtable(a.qtable);

  json runs = json::array();
  std::cout << "density/occluder  episodes success%  collide%  timeout%  stop_m\n";
  for (auto d : densities) {
    for (auto o : occluders) {
      sim::SimSettings ss = s.sim_settings();
      ss.scenario.density = d;
      ss.scenario.occluder = o;
      const auto r = learned ? policy::evaluate(*learned, ss, a.episodes, a.threads)
                             : policy::summarize(policy::run_many(
                                   [k = *scripted] { return sim::scripted_controller(k); }, a.episodes, ss,
                                   a.threads));
      json j = r.to_json();
      j["density"] = sim::to_string(d);
      j["occlusion"] = sim::to_string(o);
      runs.push_back(j);
      print_row(std::string(sim::to_string(d)) + "/" + std::string(sim::to_string(o)), r);
    }
  }
  json report = runs.size() == 1 ? runs[0] : json{{"runs", runs}};
  report["policy"] = learned ? std::string("learned") : std::string(sim::to_string(*scripted));
  if (learned) report["qtable"] = a.qtable;
  report["config"] = config::to_json(s);
  if (!g.out.empty()) write_json(g.out, report);
  return 0;
}

// ---- inspect ---------------------------------------------------------------

struct InspectArgs {
  std::string in;
  std::string source = "sim";
  std::string episode;
};

int cmd_inspect(const Global& g, const InspectArgs& a) {
  config::Settings s = load_settings(g);
  s.validate();
  std::vector<pipeline::AuditEntry> audit;
  if (fs::exists(fs::path(a.in) / "audit.jsonl")) {
    for (auto& e : pipeline::import_dataset(a.in).audit) {
      if (a.episode.empty() || e.episode == a.episode) audit.push_back(std::move(e));
    }
    if (audit.empty()) throw LayoutError("no audit rows for episode '" + a.episode + "'");
  } else {
    const auto source = pipeline::parse_source(a.source);
    if (!source) throw UsageError("--source: unknown value '" + a.source + "'");
    const auto ep = pipeline::ingest_episode(a.in, *source, s.scenario.a_max);
    audit = pipeline::label_episode(ep, s.label_config()).audit;
  }
  auto emit = [&](std::ostream& out) {
    out << "# config=" << config::to_json(s).dump() << '\n';
    pipeline::write_inspect_csv(out, audit);
  };
  if (g.out.empty()) {
    emit(std::cout);
  } else {
    const fs::path out = g.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out);
    if (!f) throw IoError("cannot write " + out.string());
    emit(f);
  }
  return 0;
}

// ---- compare ---------------------------------------------------------------

int cmd_compare(const Global& g, const std::string& generated, const std::string& human) {
  config::Settings s = load_settings(g);
  const auto r = pipeline::compare_safety_labels(pipeline::read_safety_labels(generated),
                                                 pipeline::read_safety_labels(human));
  json j = r.to_json();
  j["generated"] = generated;
  j["human"] = human;
  j["config"] = config::to_json(s);
  if (g.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(g.out, j);
    std::cout << "agreement on human-unsafe: "
              << (r.agreement_pct_on_human_unsafe ? sim::format_double(*r.agreement_pct_on_human_unsafe) : "n/a")
              << "% over " << r.total << " samples\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety-aware reward labeling for offline driving datasets"};
  app.require_subcommand(1);
  Global g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Base random seed (overrides the config 'seed' key)");
  app.add_option("--config", g.config_file, "Config file of 'key = value' lines")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output path (file or directory, per command)");
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");
  app.fallthrough();

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run the simulator and write episode directories");
  simulate->add_option("--policy", sim_args.policy,
                       "behavioral|random|aggressive|conservative|learned; a comma list cycles per episode");
  simulate->add_option("--episodes", sim_args.episodes, "Number of episodes");
  simulate->add_option("--density", sim_args.density, "low|medium|high (comma list cycles)");
  simulate->add_option("--occlusion", sim_args.occlusion, "none|partial|full (comma list cycles)");
  simulate->add_option("--qtable", sim_args.qtable, "Q-table for --policy learned");

  LabelArgs label_args;
  auto* label = app.add_subcommand("label", "Generate reward labels for recorded episodes");
  label->add_option("--in", label_args.in, "Episode directory or a directory of episodes")->required();
  label->add_option("--source", label_args.source, "sim|a2d2");
  label->add_option("--labeler", label_args.labeler, "gen|uds");

  std::string train_in;
  auto* train = app.add_subcommand("train", "Fit a Q-table on a labeled dataset");
  train->add_option("--in", train_in, "Labeled dataset directory")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Run the collision test");
  eval->add_option("--qtable", eval_args.qtable, "Trained Q-table");
  eval->add_option("--policy", eval_args.policy, "Scripted baseline instead of a Q-table");
  eval->add_option("--episodes", eval_args.episodes, "Episodes per density/occluder pair");
  eval->add_option("--density", eval_args.density, "low|medium|high (comma list runs each)");
  eval->add_option("--occlusion", eval_args.occlusion, "none|partial|full (comma list runs each)");
  eval->add_option("--threads", eval_args.threads, "Worker threads (0 = hardware)");

  InspectArgs inspect_args;
  auto* inspect = app.add_subcommand("inspect", "Per-frame risk and reward trace as CSV");
  inspect->add_option("--in", inspect_args.in, "Episode directory or labeled dataset directory")->required();
  inspect->add_option("--source", inspect_args.source, "sim|a2d2 (episode input)");
  inspect->add_option("--episode", inspect_args.episode, "Episode id to select from a dataset");

  std::string generated, human;
  auto* compare = app.add_subcommand("compare", "Compare generated and human safety labels");
  compare->add_option("--generated", generated, "Generated labels (.jsonl audit or frame_id,c_t csv)")->required();
  compare->add_option("--human", human, "Human labels (same formats)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*simulate) return cmd_simulate(g, sim_args);
    if (*label) return cmd_label(g, label_args);
    if (*train) return cmd_train(g, train_in);
    if (*eval) return cmd_eval(g, eval_args);
    if (*inspect) return cmd_inspect(g, inspect_args);
    if (*compare) return cmd_compare(g, generated, human);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
