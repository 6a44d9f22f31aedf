#include "mgsde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mgsde/discrete_game.hpp"
#include "mgsde/overlaps.hpp"
#include "mgsde/parallel.hpp"

#ifndef MGSDE_GIT_DESCRIBE
#define MGSDE_GIT_DESCRIBE "unknown"
#endif

namespace mgsde {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string code_version() { return MGSDE_GIT_DESCRIBE; }

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate-discrete", "simulate-sde",   "verify-lln", "verify-dissipativity",
                                              "drift-oracle",      "waiting-time", "scaling"};
  return names;
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t n_agents) { return derive_seed(seed, n_agents); }

// ---------------------------------------------------------------------------
// strict JSON reading

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(ErrorCode::config, what); }

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(where() + "must be a JSON object");
  }

  ~Reader() = default;

  bool has(const char* key) const { return j_.contains(key); }

  void number(const char* key, double& out) {
    if (const auto* v = take(key)) {
      if (!v->is_number()) config_error(field(key) + " must be a number");
      out = v->get<double>();
    }
  }

  template <class Int>
  void count(const char* key, Int& out) {
    if (const auto* v = take(key)) {
      if (!v->is_number_unsigned()) config_error(field(key) + " must be a non-negative integer");
      out = static_cast<Int>(v->get<std::uint64_t>());
    }
  }

  void boolean(const char* key, bool& out) {
    if (const auto* v = take(key)) {
      if (!v->is_boolean()) config_error(field(key) + " must be true or false");
      out = v->get<bool>();
    }
  }

  void text(const char* key, std::string& out) {
    if (const auto* v = take(key)) {
      if (!v->is_string()) config_error(field(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  template <class Int>
  void counts(const char* key, std::vector<Int>& out) {
    if (const auto* v = take(key)) {
      if (!v->is_array()) config_error(field(key) + " must be an array of non-negative integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_unsigned()) config_error(field(key) + " must be an array of non-negative integers");
        out.push_back(static_cast<Int>(e.get<std::uint64_t>()));
      }
    }
  }

  void numbers(const char* key, std::vector<double>& out) {
    if (const auto* v = take(key)) {
      if (!v->is_array()) config_error(field(key) + " must be an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) config_error(field(key) + " must be an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  const json* object(const char* key) { return take(key); }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  // Rejects keys nobody asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) config_error("unknown key '" + field(it.key().c_str()) + "'");
    }
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string where() const { return path_.empty() ? "config " : "'" + path_ + "' "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
void block(Reader& parent, const char* key, Fn&& fn) {
  if (const auto* sub = parent.object(key)) {
    Reader r(*sub, parent.field(key));
    fn(r);
    r.finish();
  }
}

template <class T, class Parse>
void enum_field(Reader& r, const char* key, T& out, Parse&& parse) {
  std::string name;
  r.text(key, name);
  if (name.empty()) return;
  try {
    out = parse(name);
  } catch (const Error& e) {
    config_error(r.field(key) + ": " + e.what());
  }
}

void check(bool ok, const std::string& what) {
  if (!ok) config_error(what);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader r(root, "");
  r.text("command", c.command);
  r.text("output_dir", c.output_dir);
  r.count("jobs", c.jobs);
  if (r.has("seeds") && r.has("seed_count")) config_error("give either 'seeds' or 'seed_count', not both");
  r.counts("seeds", c.seeds);
  std::size_t seed_count = 0;
  r.count("seed_count", seed_count);
  if (r.has("seed_count")) {
    check(seed_count >= 1, "seed_count must be at least 1");
    c.seeds.clear();
    for (std::size_t s = 1; s <= seed_count; ++s) c.seeds.push_back(s);
  }

  block(r, "game", [&](Reader& b) {
    b.count("n_agents", c.game.n_agents);
    b.number("alpha", c.game.alpha);
    b.number("gamma_rate", c.game.gamma_rate);
  });
  block(r, "scenario", [&](Reader& b) {
    enum_field(b, "kind", c.scenario.kind, scenario_from_string);
    b.number("gamma_frac", c.scenario.gamma_frac);
    b.number("beta", c.scenario.beta);
    b.number("y_max", c.scenario.y_max);
    b.count("producers", c.scenario.producers);
    b.number("spread", c.scenario.spread);
  });
  block(r, "discrete", [&](Reader& b) {
    b.count("steps", c.discrete.steps);
    b.count("record_every", c.discrete.record_every);
    b.counts("tracked", c.discrete.tracked);
    b.boolean("zero_initial", c.discrete.zero_initial);
  });
  block(r, "integrator", [&](Reader& b) {
    b.number("dt", c.integrator.dt);
    b.number("t_end", c.integrator.t_end);
    b.count("record_every", c.integrator.record_every);
    b.count("replicas", c.integrator.replicas);
    enum_field(b, "sigma2", c.integrator.sigma2, sigma2_model_from_string);
    b.boolean("rescaled", c.integrator.rescaled);
    b.counts("tracked", c.integrator.tracked);
    b.count("tracked_count", c.integrator.tracked_count);
    b.number("t_end_per_agent", c.integrator.t_end_per_agent);
  });
  block(r, "stationarity", [&](Reader& b) {
    b.number("epsilon", c.stationarity.epsilon);
    b.count("window", c.stationarity.window);
    b.count("confirm", c.stationarity.confirm);
    enum_field(b, "observable", c.stationarity.observable, observable_from_string);
    b.count("bins", c.stationarity.bins);
    b.boolean("floor_correction", c.stationarity.floor_correction);
    b.number("tail_fraction", c.stationarity.tail_fraction);
  });
  block(r, "lln", [&](Reader& b) {
    b.counts("n_grid", c.lln.n_grid);
    b.count("probe_agents", c.lln.probe_agents);
    b.number("slope_lo", c.lln.slope_lo);
    b.number("slope_hi", c.lln.slope_hi);
    b.number("xi2_tolerance", c.lln.xi2_tolerance);
  });
  block(r, "dissipativity", [&](Reader& b) {
    enum_field(b, "family", c.dissipativity.family, probe_family_from_string);
    b.count("n_probes", c.dissipativity.n_probes);
    b.numbers("radii", c.dissipativity.radii);
    b.number("pass_level", c.dissipativity.pass_level);
    b.number("normalized_threshold", c.dissipativity.normalized_threshold);
    b.number("spread", c.dissipativity.spread);
  });
  block(r, "drift_oracle", [&](Reader& b) {
    b.count("test_points", c.drift_oracle.test_points);
    b.count("samples", c.drift_oracle.samples);
    b.number("y_scale", c.drift_oracle.y_scale);
    b.number("z_limit", c.drift_oracle.z_limit);
    b.number("coverage", c.drift_oracle.coverage);
  });
  block(r, "waiting", [&](Reader& b) { b.number("envelope_coverage", c.waiting.envelope_coverage); });
  block(r, "scaling", [&](Reader& b) {
    b.counts("n_grid", c.scaling.n_grid);
    b.numbers("alpha_grid", c.scaling.alpha_grid);
    b.count("sweep_n", c.scaling.sweep_n);
    b.number("min_r2", c.scaling.min_r2);
  });
  r.finish();
  return c;
}

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["command"] = c.command;
  j["output_dir"] = c.output_dir;
  j["jobs"] = c.jobs;
  j["seeds"] = c.seeds;
  j["game"] = {{"n_agents", c.game.n_agents}, {"alpha", c.game.alpha}, {"gamma_rate", c.game.gamma_rate}};
  j["scenario"] = {{"kind", to_string(c.scenario.kind)}, {"gamma_frac", c.scenario.gamma_frac},
                   {"beta", c.scenario.beta},             {"y_max", c.scenario.y_max},
                   {"producers", c.scenario.producers},   {"spread", c.scenario.spread}};
  j["discrete"] = {{"steps", c.discrete.steps},
                   {"record_every", c.discrete.record_every},
                   {"tracked", c.discrete.tracked},
                   {"zero_initial", c.discrete.zero_initial}};
  j["integrator"] = {{"dt", c.integrator.dt},
                     {"t_end", c.integrator.t_end},
                     {"record_every", c.integrator.record_every},
                     {"replicas", c.integrator.replicas},
                     {"sigma2", to_string(c.integrator.sigma2)},
                     {"rescaled", c.integrator.rescaled},
                     {"tracked", c.integrator.tracked},
                     {"tracked_count", c.integrator.tracked_count},
                     {"t_end_per_agent", c.integrator.t_end_per_agent}};
  j["stationarity"] = {{"epsilon", c.stationarity.epsilon},
                       {"window", c.stationarity.window},
                       {"confirm", c.stationarity.confirm},
                       {"observable", to_string(c.stationarity.observable)},
                       {"bins", c.stationarity.bins},
                       {"floor_correction", c.stationarity.floor_correction},
                       {"tail_fraction", c.stationarity.tail_fraction}};
  j["lln"] = {{"n_grid", c.lln.n_grid},
              {"probe_agents", c.lln.probe_agents},
              {"slope_lo", c.lln.slope_lo},
              {"slope_hi", c.lln.slope_hi},
              {"xi2_tolerance", c.lln.xi2_tolerance}};
  j["dissipativity"] = {{"family", to_string(c.dissipativity.family)},
                        {"n_probes", c.dissipativity.n_probes},
                        {"radii", c.dissipativity.radii},
                        {"pass_level", c.dissipativity.pass_level},
                        {"normalized_threshold", c.dissipativity.normalized_threshold},
                        {"spread", c.dissipativity.spread}};
  j["drift_oracle"] = {{"test_points", c.drift_oracle.test_points},
                       {"samples", c.drift_oracle.samples},
                       {"y_scale", c.drift_oracle.y_scale},
                       {"z_limit", c.drift_oracle.z_limit},
                       {"coverage", c.drift_oracle.coverage}};
  j["waiting"] = {{"envelope_coverage", c.waiting.envelope_coverage}};
  j["scaling"] = {{"n_grid", c.scaling.n_grid},
                  {"alpha_grid", c.scaling.alpha_grid},
                  {"sweep_n", c.scaling.sweep_n},
                  {"min_r2", c.scaling.min_r2}};
  return j.dump(2) + "\n";
}

void validate_config(const ExperimentConfig& c) {
  if (!c.command.empty()) {
    const auto& names = command_names();
    check(std::find(names.begin(), names.end(), c.command) != names.end(), "command: unknown command '" + c.command + "'");
  }
  check(c.jobs >= 1, "jobs must be at least 1");
  check(!c.seeds.empty(), "seeds must not be empty");
  check(c.game.n_agents >= 1, "game.n_agents must be positive");
  check(positive(c.game.alpha), "game.alpha must be positive and finite");
  check(positive(c.game.gamma_rate), "game.gamma_rate must be positive and finite");
  check(std::llround(c.game.alpha * static_cast<double>(c.game.n_agents)) >= 1, "game.alpha * game.n_agents rounds to zero states");
  try {
    c.scenario.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  check(c.discrete.steps >= 1, "discrete.steps must be at least 1");
  check(c.discrete.record_every >= 1, "discrete.record_every must be at least 1");
  check(positive(c.integrator.dt), "integrator.dt must be positive");
  check(positive(c.integrator.t_end), "integrator.t_end must be positive");
  check(c.integrator.t_end >= c.integrator.dt, "integrator.t_end must be at least integrator.dt");
  check(c.integrator.record_every >= 1, "integrator.record_every must be at least 1");
  check(c.integrator.replicas >= 1, "integrator.replicas must be at least 1");
  check(std::isfinite(c.integrator.t_end_per_agent) && c.integrator.t_end_per_agent >= 0.0,
        "integrator.t_end_per_agent must be non-negative");
  try {
    c.stationarity.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  check(!c.lln.n_grid.empty(), "lln.n_grid must not be empty");
  for (const auto n : c.lln.n_grid) check(n >= 1, "lln.n_grid entries must be positive");
  check(c.lln.probe_agents >= 1, "lln.probe_agents must be positive");
  check(c.lln.slope_lo <= c.lln.slope_hi, "lln.slope_lo must not exceed lln.slope_hi");
  check(positive(c.lln.xi2_tolerance), "lln.xi2_tolerance must be positive");
  check(c.dissipativity.n_probes >= 1, "dissipativity.n_probes must be positive");
  check(std::is_sorted(c.dissipativity.radii.begin(), c.dissipativity.radii.end()),
        "dissipativity.radii must be increasing");
  for (const double r : c.dissipativity.radii) check(positive(r), "dissipativity.radii entries must be positive");
  check(c.dissipativity.pass_level > 0.0 && c.dissipativity.pass_level <= 1.0,
        "dissipativity.pass_level must lie in (0, 1]");
  check(std::isfinite(c.dissipativity.normalized_threshold), "dissipativity.normalized_threshold must be finite");
  check(std::isfinite(c.dissipativity.spread) && c.dissipativity.spread >= 0.0, "dissipativity.spread must be non-negative");
  check(c.drift_oracle.test_points >= 1, "drift_oracle.test_points must be positive");
  check(c.drift_oracle.samples >= 2, "drift_oracle.samples must be at least 2");
  check(std::isfinite(c.drift_oracle.y_scale) && c.drift_oracle.y_scale >= 0.0, "drift_oracle.y_scale must be non-negative");
  check(positive(c.drift_oracle.z_limit), "drift_oracle.z_limit must be positive");
  check(c.drift_oracle.coverage > 0.0 && c.drift_oracle.coverage <= 1.0, "drift_oracle.coverage must lie in (0, 1]");
  check(c.waiting.envelope_coverage > 0.0 && c.waiting.envelope_coverage <= 1.0,
        "waiting.envelope_coverage must lie in (0, 1]");
  check(!c.scaling.n_grid.empty(), "scaling.n_grid must not be empty");
  for (const auto n : c.scaling.n_grid) check(n >= 4, "scaling.n_grid entries must be at least 4");
  for (const double a : c.scaling.alpha_grid) check(positive(a), "scaling.alpha_grid entries must be positive");
  check(c.scaling.sweep_n >= 4, "scaling.sweep_n must be at least 4");
  check(c.scaling.min_r2 >= 0.0 && c.scaling.min_r2 <= 1.0, "scaling.min_r2 must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// artifacts

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON cannot carry infinities; they become null.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json jopt(const std::optional<double>& v) { return v ? jnum(*v) : json(nullptr); }

json jfit(const LinearFit& f) {
  return {{"slope", jnum(f.slope)}, {"intercept", jnum(f.intercept)}, {"r2", jnum(f.r2)}, {"points", f.points}};
}

class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  std::string render() const {
    std::vector<std::size_t> width;
    for (const auto& row : rows_) {
      width.resize(std::max(width.size(), row.size()), 0);
      for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
    }
    std::string out;
    for (const auto& row : rows_) {
      for (std::size_t k = 0; k < row.size(); ++k) {
        out += row[k];
        if (k + 1 < row.size()) out += std::string(width[k] - row[k].size() + 2, ' ');
      }
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorCode::io, "cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) fail(ErrorCode::io, "cannot write " + (dir_ / name).string());
    written_.push_back(name);
  }

  // Writes the CSV unless it has no data rows.
  void csv(const std::string& name, const std::string& header, const std::string& rows, const std::string& why_empty) {
    if (rows.empty()) {
      omit(name, why_empty);
      return;
    }
    write(name, header + "\n" + rows);
  }

  void omit(const std::string& name, const std::string& why) { omitted_.push_back({{"file", name}, {"reason", why}}); }

  const std::vector<std::string>& written() const { return written_; }
  const json& omitted() const { return omitted_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
  json omitted_ = json::array();
};

struct CommandResult {
  bool pass = true;
  std::string summary;
  json report;
  std::string text;
};

GameParams game_for(const ExperimentConfig& c, std::uint64_t seed) {
  return make_game_params(c.game.n_agents, c.game.alpha, c.game.gamma_rate, cell_seed(seed, c.game.n_agents));
}

std::vector<double> initial_for(const ExperimentConfig& c, const GameParams& params) {
  Rng rng(params.seed, 1);
  return make_initial_condition(c.scenario, params.n_agents, rng);
}

RescaleConstant rescale_for(const ExperimentConfig& c, std::size_t n_agents) {
  return rescale_constant(n_agents, c.scenario.kind, c.scenario.beta, c.scenario.gamma_frac);
}

WaitingSettings waiting_settings(const ExperimentConfig& c) {
  WaitingSettings ws;
  ws.alpha = c.game.alpha;
  ws.gamma_rate = c.game.gamma_rate;
  ws.scenario = c.scenario;
  ws.sigma2 = c.integrator.sigma2;
  ws.replicas = c.integrator.replicas;
  ws.dt = c.integrator.dt;
  ws.t_end = c.integrator.t_end;
  ws.t_end_per_agent = c.integrator.t_end_per_agent;
  ws.record_every = c.integrator.record_every;
  ws.tracked = c.integrator.tracked_count;
  ws.stationarity = c.stationarity;
  return ws;
}

json scenario_json(const ExperimentConfig& c) {
  return {{"kind", to_string(c.scenario.kind)}, {"gamma_frac", c.scenario.gamma_frac}, {"beta", c.scenario.beta}};
}

// --- simulate-discrete ------------------------------------------------------

CommandResult cmd_simulate_discrete(const ExperimentConfig& c, Artifacts& out) {
  CommandResult res;
  res.report["runs"] = json::array();
  TextTable table({"seed", "N", "P", "samples", "tau_end", "|y_end|"});
  for (const auto seed : c.seeds) {
    const auto params = game_for(c, seed);
    const auto strategies = sample_strategies(params);
    const auto y0 = c.discrete.zero_initial ? std::vector<double>(params.n_agents, 0.0) : initial_for(c, params);
    Rng rng(derive_seed(params.seed, 3), 0);
    const auto traj = run_discrete(params, strategies, DiscreteState::from_y(y0, params.gamma_rate), c.discrete.steps,
                                   c.discrete.record_every, rng, c.discrete.tracked);
    std::ostringstream csv;
    write_csv(traj, csv);
    const std::string name = "trajectory_seed" + std::to_string(seed) + ".csv";
    out.write(name, csv.str());
    double norm = 0.0;
    for (const double v : traj.row(traj.samples() - 1)) norm += v * v;
    norm = std::sqrt(norm);
    res.report["runs"].push_back({{"seed", seed},
                                  {"n_agents", params.n_agents},
                                  {"n_states", params.n_states},
                                  {"samples", traj.samples()},
                                  {"tau_end", traj.tau.back()},
                                  {"final_tracked_norm", norm},
                                  {"file", name}});
    table.add({std::to_string(seed), std::to_string(params.n_agents), std::to_string(params.n_states),
               std::to_string(traj.samples()), fixed(traj.tau.back()), fixed(norm)});
  }
  res.summary = "simulate-discrete: " + std::to_string(c.seeds.size()) + " trajectories written";
  res.text = table.render();
  return res;
}

// --- simulate-sde -----------------------------------------------------------

CommandResult cmd_simulate_sde(const ExperimentConfig& c, Artifacts& out) {
  CommandResult res;
  res.report["runs"] = json::array();
  TextTable table({"seed", "N", "P", "samples", "c", "factor", "|y_end|"});
  for (const auto seed : c.seeds) {
    const auto params = game_for(c, seed);
    const auto strategies = sample_strategies(params);
    const auto y0 = initial_for(c, params);
    const SdeModel model(params, strategies, c.integrator.sigma2);
    IntegrationSettings is;
    is.dt = c.integrator.dt;
    is.t_end = c.integrator.t_end;
    is.record_every = c.integrator.record_every;
    is.tracked = c.integrator.tracked;
    json meta = {{"seed", seed}, {"n_agents", params.n_agents}, {"n_states", params.n_states}};
    if (params.n_agents >= 4) {
      const auto rc = rescale_for(c, params.n_agents);
      meta["c"] = rc.c;
      meta["k"] = rc.k_range.midpoint();
      meta["l"] = rc.l_range.midpoint();
      if (c.integrator.rescaled) {
        is.rescaled = true;
        is.scale = rc.c;
      }
    } else if (c.integrator.rescaled) {
      fail(ErrorCode::config, "integrator.rescaled needs game.n_agents >= 4");
    }
    Rng rng(derive_seed(params.seed, 2), 0);
    const auto traj = integrate_sde(model, y0, is, rng);
    std::ostringstream csv;
    write_csv(traj, csv);
    const std::string name = "trajectory_seed" + std::to_string(seed) + ".csv";
    out.write(name, csv.str());
    const auto& factor = model.diffusion_spec().factor();
    double norm = 0.0;
    for (const double v : traj.row(traj.samples() - 1)) norm += v * v;
    meta["samples"] = traj.samples();
    meta["rescaled"] = traj.rescaled;
    meta["factor_method"] = factor.method == FactorMethod::pivoted_ldlt ? "pivoted_ldlt" : "eigen_clipped";
    meta["factor_reconstruction_error"] = factor.reconstruction_error;
    meta["factor_clipped"] = factor.clipped;
    meta["final_tracked_norm"] = std::sqrt(norm);
    meta["file"] = name;
    table.add({std::to_string(seed), std::to_string(params.n_agents), std::to_string(params.n_states),
               std::to_string(traj.samples()), meta.contains("c") ? fixed(meta["c"].get<double>()) : "-",
               meta["factor_method"].get<std::string>(), fixed(std::sqrt(norm))});
    res.report["runs"].push_back(meta);
  }
  res.report["dt"] = c.integrator.dt;
  res.report["scenario"] = scenario_json(c);
  res.summary = "simulate-sde: " + std::to_string(c.seeds.size()) + " trajectories written";
  res.text = table.render();
  return res;
}

// --- verify-lln -------------------------------------------------------------

CommandResult cmd_verify_lln(const ExperimentConfig& c, Artifacts& out) {
  LlnSettings s;
  s.n_grid = c.lln.n_grid;
  s.alpha = c.game.alpha;
  s.seeds = c.seeds;
  s.probe_agents = c.lln.probe_agents;
  s.jobs = c.jobs;
  s.slope_bounds = {c.lln.slope_lo, c.lln.slope_hi};
  const auto rep = lln_suite(s);

  std::string rows;
  for (const auto& cell : rep.cells) {
    rows += std::to_string(cell.n_agents) + "," + std::to_string(cell.n_states) + "," + std::to_string(cell.seed) + "," +
            num(cell.mean_abs_xi_theta) + "," + num(cell.mean_abs_xi2_dev) + "," + num(cell.mean_abs_cross_sum) + "," +
            num(cell.mean_xi_theta) + "," + num(cell.mean_xi2_dev) + "," + num(cell.mean_cross_sum) + "," +
            num(cell.max_abs_xi2_dev_all) + "\n";
  }
  out.csv("lln_cells.csv",
          "N,P,seed,mean_abs_xi_theta,mean_abs_xi2_dev,mean_abs_cross_sum,mean_xi_theta,mean_xi2_dev,mean_cross_sum,"
          "max_abs_xi2_dev_all",
          rows, "no cells");

  CommandResult res;
  TextTable table({"N", "P", "|xi theta|", "|xi^2 - 1/2|", "|cross sum|"});
  json levels = json::array();
  for (const auto& l : rep.levels) {
    levels.push_back({{"n_agents", l.n_agents},
                      {"n_states", l.n_states},
                      {"mean_abs_xi_theta", l.mean_abs_xi_theta},
                      {"mean_abs_xi2_dev", l.mean_abs_xi2_dev},
                      {"mean_abs_cross_sum", l.mean_abs_cross_sum}});
    table.add({std::to_string(l.n_agents), std::to_string(l.n_states), fixed(l.mean_abs_xi_theta, 5),
               fixed(l.mean_abs_xi2_dev, 5), fixed(l.mean_abs_cross_sum, 5)});
  }
  const double xi2_at_max = rep.levels.back().mean_abs_xi2_dev;
  const bool xi2_ok = xi2_at_max <= c.lln.xi2_tolerance;
  res.pass = rep.slopes_ok && xi2_ok;
  res.report = {{"levels", levels},
                {"xi_theta_decay", jfit(rep.xi_theta_decay)},
                {"xi2_decay", jfit(rep.xi2_decay)},
                {"cross_decay", jfit(rep.cross_decay)},
                {"slope_bounds", {c.lln.slope_lo, c.lln.slope_hi}},
                {"slopes_ok", rep.slopes_ok},
                {"xi2_at_largest_n", xi2_at_max},
                {"xi2_ok", xi2_ok},
                {"trend_seeds", rep.trend_seeds},
                {"seeds", c.seeds.size()}};
  res.text = table.render() + "slopes: xi_theta " + fixed(rep.xi_theta_decay.slope) + ", xi^2 " +
             fixed(rep.xi2_decay.slope) + ", cross " + fixed(rep.cross_decay.slope) + "\n";
  res.summary = std::string("verify-lln: ") + (res.pass ? "pass" : "FAIL") + " (slopes xi_theta " +
                fixed(rep.xi_theta_decay.slope, 3) + ", cross " + fixed(rep.cross_decay.slope, 3) + "; bounds [" +
                fixed(c.lln.slope_lo, 2) + ", " + fixed(c.lln.slope_hi, 2) + "]; mean |xi^2-1/2| " + fixed(xi2_at_max, 5) + ")";
  return res;
}

// --- verify-dissipativity ---------------------------------------------------

CommandResult cmd_verify_dissipativity(const ExperimentConfig& c, Artifacts& out) {
  if (c.game.n_agents < 4) fail(ErrorCode::config, "game.n_agents must be at least 4 for verify-dissipativity");
  std::vector<VeretennikovReport> reports(c.seeds.size());
  const auto rc = rescale_for(c, c.game.n_agents);
  parallel_for(c.seeds.size(), c.jobs, [&](std::size_t k) {
    const auto params = game_for(c, c.seeds[k]);
    const auto overlaps = std::make_shared<const OverlapData>(compute_overlaps(sample_strategies(params)));
    const DriftSpec spec(overlaps, params.n_states);
    RadialCheckSettings s;
    s.family = c.dissipativity.family;
    s.spread = c.dissipativity.spread;
    s.n_probes = c.dissipativity.n_probes;
    s.radii = c.dissipativity.radii;
    s.pass_level = c.dissipativity.pass_level;
    s.normalized_threshold = c.dissipativity.normalized_threshold;
    s.seed = derive_seed(params.seed, 5);
    reports[k] = radial_drift_check(spec, rc, s);
  });

  CommandResult res;
  std::string rows;
  json runs = json::array();
  TextTable table({"seed", "M0", "pass", "norm pass", "r", "r needed"});
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    for (const auto& level : r.profile) {
      rows += std::to_string(c.seeds[k]) + "," + num(level.radius) + "," + num(level.pass_fraction) + "," +
              num(level.normalized_pass_fraction) + "," + num(level.mean_normalized) + "," + num(level.min_margin) + "\n";
    }
    const bool ok = r.pass && r.normalized_pass_fraction >= c.dissipativity.pass_level;
    res.pass = res.pass && ok;
    runs.push_back({{"seed", c.seeds[k]},
                    {"m0_empirical", jopt(r.m0_empirical)},
                    {"pass_fraction", r.pass_fraction},
                    {"normalized_pass_fraction", r.normalized_pass_fraction},
                    {"target", r.target},
                    {"r_required", r.r_required},
                    {"r_achieved", r.r_achieved},
                    {"k", r.k},
                    {"l", r.l},
                    {"pass", ok}});
    table.add({std::to_string(c.seeds[k]), r.m0_empirical ? fixed(*r.m0_empirical, 1) : "none", fixed(r.pass_fraction),
               fixed(r.normalized_pass_fraction), fixed(r.r_achieved), fixed(r.r_required)});
  }
  out.csv("dissipativity_profile.csv", "seed,radius,pass_fraction,normalized_pass_fraction,mean_normalized,min_margin",
          rows, "no radii scanned");
  res.report = {{"family", to_string(c.dissipativity.family)},
                {"scenario", scenario_json(c)},
                {"c", rc.c},
                {"runs", runs}};
  res.text = table.render();
  res.summary = std::string("verify-dissipativity: ") + (res.pass ? "pass" : "FAIL");
  return res;
}

// --- drift-oracle -----------------------------------------------------------

CommandResult cmd_drift_oracle(const ExperimentConfig& c, Artifacts& out) {
  CommandResult res;
  std::string rows;
  json runs = json::array();
  TextTable table({"seed", "within", "total", "coverage"});
  for (const auto seed : c.seeds) {
    const auto params = game_for(c, seed);
    DriftOracleSettings s;
    s.test_points = c.drift_oracle.test_points;
    s.samples = c.drift_oracle.samples;
    s.y_scale = c.drift_oracle.y_scale;
    s.z_limit = c.drift_oracle.z_limit;
    s.coverage = c.drift_oracle.coverage;
    s.seed = derive_seed(params.seed, 4);
    s.jobs = c.jobs;
    const auto rep = drift_oracle_check(sample_strategies(params), params.gamma_rate, s);
    for (std::size_t k = 0; k < rep.points.size(); ++k) {
      const auto& p = rep.points[k];
      for (std::size_t i = 0; i < p.y.size(); ++i) {
        rows += std::to_string(seed) + "," + std::to_string(k) + "," + std::to_string(i) + "," + num(p.y[i]) + "," +
                num(p.measured[i]) + "," + num(p.predicted[i]) + "," + num(p.std_error[i]) + "\n";
      }
    }
    res.pass = res.pass && rep.pass;
    runs.push_back({{"seed", seed}, {"within", rep.within}, {"total", rep.total}, {"coverage", rep.coverage}, {"pass", rep.pass}});
    table.add({std::to_string(seed), std::to_string(rep.within), std::to_string(rep.total), fixed(rep.coverage)});
  }
  out.csv("drift_oracle.csv", "seed,point,agent,y,measured,predicted,std_error", rows, "no test points");
  res.report = {{"gamma_rate", c.game.gamma_rate},
                {"samples", c.drift_oracle.samples},
                {"z_limit", c.drift_oracle.z_limit},
                {"required_coverage", c.drift_oracle.coverage},
                {"runs", runs}};
  res.text = table.render();
  res.summary = std::string("drift-oracle: ") + (res.pass ? "pass" : "FAIL");
  return res;
}

// --- waiting-time -----------------------------------------------------------

json tv_json(const StationarityReport& r) {
  return {{"t_hat", jopt(r.t_hat)},
          {"tau_hat", jopt(r.tau_hat)},
          {"open", r.open()},
          {"proxy_start", r.proxy_start},
          {"replicas", r.replicas},
          {"tracked", r.tracked},
          {"decay_exponent", jnum(r.fit.exponent)},
          {"decay_r2", jnum(r.fit.r2)}};
}

CommandResult cmd_waiting_time(const ExperimentConfig& c, Artifacts& out) {
  if (c.game.n_agents < 4) fail(ErrorCode::config, "game.n_agents must be at least 4 for waiting-time");
  const auto ws = waiting_settings(c);
  std::vector<WaitingCell> cells(c.seeds.size());
  parallel_for(c.seeds.size(), c.jobs, [&](std::size_t k) { cells[k] = run_waiting_cell(ws, c.game.n_agents, c.seeds[k]); });
  const auto rc = rescale_for(c, c.game.n_agents);

  CommandResult res;
  std::string curve_rows, detail_rows;
  json runs = json::array();
  TextTable table({"seed", "tau_hat", "m'", "coverage", "T bound"});
  for (const auto& cell : cells) {
    for (const auto& p : cell.report.curve) {
      curve_rows += num(p.t) + "," + num(p.tv) + "," + std::to_string(cell.seed) + "\n";
      detail_rows += num(p.t) + "," + num(p.tv) + "," + num(p.floor) + "," + num(p.excess) + "," +
                     std::to_string(cell.seed) + "\n";
    }
    const auto env = envelope_check(cell.report, cell.y0_norm, c.stationarity, rc);
    const bool ok = !cell.report.open() && env.ok && env.coverage >= c.waiting.envelope_coverage;
    res.pass = res.pass && ok;
    json run = tv_json(cell.report);
    run["seed"] = cell.seed;
    run["n_agents"] = cell.n_agents;
    run["n_states"] = cell.n_states;
    run["y0_norm"] = cell.y0_norm;
    run["t_end"] = cell.t_end;
    run["envelope"] = {{"ok", env.ok},
                       {"error", env.error},
                       {"m_prime", jnum(env.fit.m_prime)},
                       {"m_prime_ls", jnum(env.fit.m_prime_ls)},
                       {"fit_pairs", env.fit.pairs},
                       {"fit_until", env.fit_until},
                       {"coverage", env.coverage},
                       {"bound_tau", jnum(env.bound_tau)},
                       {"c", env.c},
                       {"k", env.k},
                       {"l", env.l}};
    run["pass"] = ok;
    runs.push_back(run);
    table.add({std::to_string(cell.seed), cell.report.tau_hat ? fixed(*cell.report.tau_hat, 1) : "open",
               env.ok ? fixed(env.fit.m_prime, 6) : "-", env.ok ? fixed(env.coverage, 3) : "-",
               env.ok ? fixed(env.bound_tau, 1) : "-"});
  }
  out.csv("tv_curve.csv", "t,tv,seed", curve_rows, "no windows before the proxy segment");
  out.csv("tv_detail.csv", "t,tv,floor,excess,seed", detail_rows, "no windows before the proxy segment");
  res.report = {{"scenario", scenario_json(c)},
                {"epsilon", c.stationarity.epsilon},
                {"observable", to_string(c.stationarity.observable)},
                {"runs", runs}};
  res.text = table.render();
  res.summary = std::string("waiting-time: ") + (res.pass ? "pass" : "FAIL");
  return res;
}

// --- scaling ----------------------------------------------------------------

CommandResult cmd_scaling(const ExperimentConfig& c, Artifacts& out) {
  ScalingSettings s;
  s.n_grid = c.scaling.n_grid;
  s.seeds = c.seeds;
  s.cell = waiting_settings(c);
  s.jobs = c.jobs;
  const auto rep = scaling_experiment(s);

  CommandResult res;
  std::string rows;
  for (const auto& cell : rep.cells) {
    if (cell.report.open()) continue;
    rows += std::to_string(cell.n_agents) + "," + num(*cell.report.tau_hat) + "," + std::to_string(cell.seed) + "\n";
  }
  out.csv("t_hat.csv", "N,T_hat,seed", rows, "every cell has an open verdict");

  json levels = json::array();
  TextTable table({"N", "closed", "mean tau_hat", "median tau_hat"});
  for (const auto& l : rep.levels) {
    levels.push_back({{"n_agents", l.n_agents},
                      {"closed", l.closed},
                      {"mean_tau_hat", l.closed ? jnum(l.mean_tau_hat) : json(nullptr)},
                      {"median_tau_hat", jopt(l.median_tau_hat)}});
    table.add({std::to_string(l.n_agents), std::to_string(l.closed), l.closed ? fixed(l.mean_tau_hat, 1) : "-",
               l.median_tau_hat ? fixed(*l.median_tau_hat, 1) : "-"});
  }
  const bool law_ok = rep.fit_ok && rep.vs_n_mean.slope > 0.0 && rep.vs_n_mean.r2 >= c.scaling.min_r2;
  json fit = {{"unit", "tau"},
              {"regression", "seed-averaged tau_hat against N"},
              {"vs_n_mean", jfit(rep.vs_n_mean)},
              {"vs_n_cells", jfit(rep.vs_n)},
              {"vs_y0_squared", jfit(rep.vs_y0_sq)},
              {"open_cells", rep.open_cells},
              {"fit_ok", rep.fit_ok},
              {"min_r2", c.scaling.min_r2},
              {"pass", law_ok}};
  if (rows.empty()) {
    out.omit("t_hat_fit.json", "no closed cells to fit");
  } else {
    out.write("t_hat_fit.json", fit.dump(2) + "\n");
  }

  res.pass = law_ok;
  res.report = {{"scenario", scenario_json(c)}, {"levels", levels}, {"fit", fit}};

  if (!c.scaling.alpha_grid.empty()) {
    const auto sweep = alpha_sweep(s.cell, c.scaling.sweep_n, c.scaling.alpha_grid, c.seeds, c.jobs);
    std::string sweep_rows;
    json sweep_levels = json::array();
    for (std::size_t a = 0; a < sweep.alphas.size(); ++a) {
      for (const auto& cell : sweep.runs[a].cells) {
        sweep_rows += num(cell.alpha) + "," + std::to_string(cell.n_agents) + "," +
                      (cell.report.open() ? std::string() : num(*cell.report.tau_hat)) + "," + std::to_string(cell.seed) +
                      "\n";
      }
      sweep_levels.push_back({{"alpha", sweep.alphas[a]}, {"median_tau_hat", jnum(sweep.medians[a])}});
      table.add({"alpha " + fixed(sweep.alphas[a], 3), "", "", fixed(sweep.medians[a], 1)});
    }
    out.csv("alpha_sweep.csv", "alpha,N,T_hat,seed", sweep_rows, "no sweep cells");
    res.report["alpha_sweep"] = {{"n_agents", c.scaling.sweep_n}, {"levels", sweep_levels}, {"non_decreasing", sweep.non_decreasing}};
    res.pass = res.pass && sweep.non_decreasing;
  }
  res.text = table.render() + "fit tau_hat ~ N (seed means): slope " + fixed(rep.vs_n_mean.slope) + ", R^2 " +
             fixed(rep.vs_n_mean.r2) + "\n";
  res.summary = std::string("scaling: ") + (res.pass ? "pass" : "FAIL") + " (R^2 " + fixed(rep.vs_n_mean.r2, 3) +
                ", slope " + fixed(rep.vs_n_mean.slope, 3) + ", open cells " + std::to_string(rep.open_cells) + ")";
  return res;
}

fs::path resolve_out_dir(const ExperimentConfig& c, const RunOptions& options) {
  if (!options.out_dir.empty()) return options.out_dir;
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* root = std::getenv(kOutRootEnv); root && *root) return fs::path(root) / c.command;
  return fs::path("mgsde-out") / c.command;
}

int exit_code_for(ErrorCode code) { return code == ErrorCode::config || code == ErrorCode::invalid_argument ? 2 : 1; }

}  // namespace

RunOutcome run_command(const std::string& command, const std::string& config_text, const RunOptions& options) {
  RunOutcome outcome;
  ExperimentConfig config;
  try {
    config = parse_config(config_text);
    if (!config.command.empty() && !command.empty() && config.command != command) {
      fail(ErrorCode::config, "command: config is for '" + config.command + "' but '" + command + "' was requested");
    }
    if (!command.empty()) config.command = command;
    if (config.command.empty()) fail(ErrorCode::config, "command: no command given");
    if (options.jobs) config.jobs = *options.jobs;
    if (options.seeds) config.seeds = *options.seeds;
    if (options.seed_count) {
      if (*options.seed_count == 0) fail(ErrorCode::config, "seed-count must be at least 1");
      config.seeds.clear();
      for (std::size_t s = 1; s <= *options.seed_count; ++s) config.seeds.push_back(s);
    }
    validate_config(config);
  } catch (const Error& e) {
    outcome.exit_code = 2;
    outcome.message = std::string("configuration error: ") + e.what();
    return outcome;
  }

  try {
    Artifacts out(resolve_out_dir(config, options));
    outcome.out_dir = out.dir().string();
    CommandResult res;
    const auto& cmd = config.command;
    if (cmd == "simulate-discrete") res = cmd_simulate_discrete(config, out);
    else if (cmd == "simulate-sde") res = cmd_simulate_sde(config, out);
    else if (cmd == "verify-lln") res = cmd_verify_lln(config, out);
    else if (cmd == "verify-dissipativity") res = cmd_verify_dissipativity(config, out);
    else if (cmd == "drift-oracle") res = cmd_drift_oracle(config, out);
    else if (cmd == "waiting-time") res = cmd_waiting_time(config, out);
    else res = cmd_scaling(config, out);

    outcome.exit_code = res.pass ? 0 : 1;
    outcome.message = res.summary;
    json report = {{"schema_version", 1}, {"command", cmd}, {"pass", res.pass}, {"summary", res.summary}};
    report.update(res.report);
    outcome.report_json = report.dump(2) + "\n";
    out.write("report.json", outcome.report_json);
    out.write("report.txt", res.summary + "\n\n" + res.text);

    std::vector<std::string> files = out.written();
    files.push_back("manifest.json");
    json manifest = {{"schema_version", 1},
                     {"tool", "mgsde"},
                     {"code_version", code_version()},
                     {"command", cmd},
                     {"seeds", config.seeds},
                     {"config", json::parse(dump_config(config))},
                     {"files", files},
                     {"omitted", out.omitted()},
                     {"exit_code", outcome.exit_code}};
    out.write("manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    outcome.exit_code = exit_code_for(e.code());
    outcome.message = std::string(e.code() == ErrorCode::config ? "configuration error: " : "error: ") + e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = 1;
    outcome.message = std::string("error: ") + e.what();
  }
  return outcome;
}

}  // namespace mgsde
