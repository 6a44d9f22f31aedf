#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgsde/ergodicity.hpp"
#include "mgsde/sde.hpp"
#include "mgsde/stationarity.hpp"

namespace mgsde {

// ---------------------------------------------------------------------------
// Experiment configuration. One JSON file describes one experiment; every
// block is optional and falls back to the defaults below. Unknown keys are
// rejected at every level.

struct GameBlock {
  std::size_t n_agents = 64;
  double alpha = 1.0;
  double gamma_rate = 1.0;
  bool operator==(const GameBlock&) const = default;
};

struct DiscreteBlock {
  std::uint64_t steps = 10000;
  std::uint64_t record_every = 100;
  std::vector<std::size_t> tracked;  // 0-based agents; empty = all
  bool zero_initial = false;         // start from y = 0 instead of the scenario
  bool operator==(const DiscreteBlock&) const = default;
};

struct IntegratorBlock {
  double dt = 1e-2;
  double t_end = 100.0;  // SDE time
  std::uint64_t record_every = 100;
  std::size_t replicas = 128;
  Sigma2Model sigma2 = Sigma2Model::attendance_variance;
  bool rescaled = false;
  std::vector<std::size_t> tracked;  // simulate-sde
  std::size_t tracked_count = 0;     // waiting-time and scaling; 0 = all
  double t_end_per_agent = 0.0;      // waiting-time and scaling
  bool operator==(const IntegratorBlock&) const = default;
};

struct LlnBlock {
  std::vector<std::size_t> n_grid{256, 1024, 4096};
  std::size_t probe_agents = 64;
  double slope_lo = -0.7;
  double slope_hi = -0.3;
  double xi2_tolerance = 0.02;  // on mean |xi_xi(i,i) - 1/2| at the largest N
  bool operator==(const LlnBlock&) const = default;
};

struct DissipativityBlock {
  ProbeFamily family = ProbeFamily::all_large;
  std::size_t n_probes = 1000;
  std::vector<double> radii;
  double pass_level = 0.99;
  double normalized_threshold = 0.45;
  double spread = 0.5;
  bool operator==(const DissipativityBlock&) const = default;
};

struct DriftOracleBlock {
  std::size_t test_points = 10;
  std::uint64_t samples = 100000;
  double y_scale = 1.5;
  double z_limit = 3.0;
  double coverage = 0.95;
  bool operator==(const DriftOracleBlock&) const = default;
};

struct WaitingBlock {
  double envelope_coverage = 0.95;
  bool operator==(const WaitingBlock&) const = default;
};

struct ScalingBlock {
  std::vector<std::size_t> n_grid{32, 64, 128, 256};
  std::vector<double> alpha_grid;  // optional sweep at sweep_n
  std::size_t sweep_n = 128;
  double min_r2 = 0.9;
  bool operator==(const ScalingBlock&) const = default;
};

struct ExperimentConfig {
  std::string command;
  std::string output_dir;
  std::size_t jobs = 1;
  std::vector<std::uint64_t> seeds{1};
  GameBlock game;
  ScenarioSpec scenario;
  DiscreteBlock discrete;
  IntegratorBlock integrator;
  StationarityConfig stationarity;
  LlnBlock lln;
  DissipativityBlock dissipativity;
  DriftOracleBlock drift_oracle;
  WaitingBlock waiting;
  ScalingBlock scaling;
  bool operator==(const ExperimentConfig&) const = default;
};

// Throws Error(ErrorCode::config) naming the offending field.
ExperimentConfig parse_config(const std::string& json_text);
// Canonical JSON with every field spelled out.
std::string dump_config(const ExperimentConfig& config);
void validate_config(const ExperimentConfig& config);

const std::vector<std::string>& command_names();

// Every per-seed command builds its game from cell seed derive_seed(seed, N):
// table Rng(cell, 0), initial condition Rng(cell, 1), SDE noise
// derive_seed(cell, 2), discrete game derive_seed(cell, 3), drift oracle
// derive_seed(cell, 4), radial probes derive_seed(cell, 5).
std::uint64_t cell_seed(std::uint64_t seed, std::size_t n_agents);

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
  std::string out_dir;                 // overrides the config and the environment
  std::optional<std::size_t> jobs;     // overrides config jobs
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::size_t> seed_count;  // seeds 1..M
};

struct RunOutcome {
  int exit_code = 0;  // 0 success, 1 check failed, 2 configuration error
  std::string message;
  std::string report_json;
  std::string out_dir;
};

// Default output root when neither RunOptions nor the config name one.
inline constexpr const char* kOutRootEnv = "MGSDE_OUT_ROOT";

// Never throws; failures are folded into the exit code and message.
RunOutcome run_command(const std::string& command, const std::string& config_text, const RunOptions& options);

std::string code_version();

}  // namespace mgsde
