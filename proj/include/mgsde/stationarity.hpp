#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgsde/ergodicity.hpp"
#include "mgsde/sde.hpp"

namespace mgsde {

// ---------------------------------------------------------------------------
// Histograms and total variation

// `bins` uniform bins on [lo, hi]; values outside are clamped into the end bins.
struct BinEdges {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t bins = 64;

  std::size_t index(double x) const;
  bool operator==(const BinEdges&) const = default;
};

BinEdges uniform_edges(double lo, double hi, std::size_t bins);
// Spans the [lower, upper] quantiles of the pooled values.
BinEdges percentile_edges(std::span<const double> pooled, std::size_t bins, double lower = 0.005,
                          double upper = 0.995);

struct Histogram {
  BinEdges edges;
  std::vector<double> mass;  // sums to 1
  std::size_t count = 0;
};

Histogram make_histogram(std::span<const double> values, const BinEdges& edges);

// 0.5 sum |p - q|; throws on differing bins.
double tv_distance(const Histogram& a, const Histogram& b);

// One histogram per tracked coordinate.
struct EmpiricalWindow {
  double t_center = 0.0;
  std::vector<Histogram> marginals;
};

// Maximum of the marginal distances.
double tv_distance(const EmpiricalWindow& a, const EmpiricalWindow& b);

// Expected |X/n - p| for X ~ Binomial(n, p).
double binomial_mean_abs_deviation(std::size_t n, double p);

// Expected TV between a histogram of n_a draws and one of n_b draws from the
// distribution `mass`, treating bins independently.
double tv_noise_floor(std::span<const double> mass, std::size_t n_a, std::size_t n_b);

// ---------------------------------------------------------------------------
// Waiting-time detection

enum class Observable { y, tanh_y };

std::string to_string(Observable observable);
Observable observable_from_string(const std::string& name);

struct StationarityConfig {
  double epsilon = 0.05;
  std::size_t window = 1;   // consecutive recorded samples pooled into one window
  std::size_t confirm = 3;  // windows that must stay below epsilon
  Observable observable = Observable::tanh_y;
  std::size_t bins = 64;
  bool floor_correction = true;  // compare the excess over the sampling-noise floor
  double tail_fraction = 0.25;   // trailing share of samples forming the stationary proxy

  void validate() const;
  bool operator==(const StationarityConfig&) const = default;
};

struct TvPoint {
  double t = 0.0;      // SDE time at the window centre
  double tv = 0.0;     // max marginal TV against the proxy
  double floor = 0.0;  // noise floor of the coordinate attaining the max excess
  double excess = 0.0; // max over coordinates of (tv_j - floor_j)^+
};

struct PowerLawFit {
  double exponent = 0.0;  // tv ~ a (1 + t)^(-exponent)
  double prefactor = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

struct StationarityReport {
  std::vector<TvPoint> curve;
  std::optional<double> t_hat;    // SDE time
  std::optional<double> tau_hat;  // score time t / Gamma
  double gamma_rate = 1.0;
  double proxy_start = 0.0;  // SDE time where the proxy segment begins
  std::size_t replicas = 0;
  std::size_t tracked = 0;
  PowerLawFit fit;

  bool open() const { return !t_hat.has_value(); }
  // Value compared against epsilon.
  double statistic(const TvPoint& p, const StationarityConfig& config) const {
    return config.floor_correction ? p.excess : p.tv;
  }
};

// Needs at least two replicas. Without a sustained crossing before the proxy
// segment the verdict stays open.
StationarityReport detect_waiting_time(const EnsembleRecording& recording, const StationarityConfig& config);

// First index i with statistic <= epsilon on [i, i + confirm).
std::optional<std::size_t> first_sustained_crossing(std::span<const double> statistic, double epsilon,
                                                    std::size_t confirm);

PowerLawFit fit_power_law(std::span<const TvPoint> curve, bool use_excess);

// ---------------------------------------------------------------------------
// Envelope m' (1 + |c y0|^l) (1 + t)^(-(k+1)) against a measured curve

struct EnvelopeCheck {
  bool ok = false;  // false when m' could not be fitted
  std::string error;
  EnvelopeFit fit;
  double fit_until = 0.0;  // SDE time of the last fitted point
  double coverage = 0.0;   // over the whole curve
  double bound_tau = 0.0;  // waiting_time_bound with the fitted m'
  double c = 1.0;
  double k = 0.0;
  double l = 2.0;
};

// m' is fitted on the transient (windows up to t_hat, or the first half of
// the curve when the verdict is open) and coverage is measured on every
// window. Exponents are the midpoints of the admissible ranges in `rc`.
// Uses the floor-corrected excess when config.floor_correction is set.
EnvelopeCheck envelope_check(const StationarityReport& report, double y0_norm, const StationarityConfig& config,
                             const RescaleConstant& rc);

// ---------------------------------------------------------------------------
// Scaling experiment

struct WaitingSettings {
  double alpha = 1.0;
  double gamma_rate = 1.0;
  ScenarioSpec scenario;  // finite_asymmetric with beta gamma = 1 by default
  Sigma2Model sigma2 = Sigma2Model::attendance_variance;
  std::size_t replicas = 64;
  double dt = 1e-2;
  double t_end = 400.0;        // SDE time, fixed part
  double t_end_per_agent = 0.0; // added per agent
  std::uint64_t record_every = 100;
  std::size_t tracked = 0;  // 0 = every agent
  StationarityConfig stationarity;
};

struct WaitingCell {
  std::size_t n_agents = 0;
  std::size_t n_states = 0;
  double alpha = 0.0;
  double gamma_rate = 0.0;
  std::uint64_t seed = 0;
  double y0_norm = 0.0;
  double t_end = 0.0;
  StationarityReport report;
};

// Table from Rng(cell seed, 0), y0 from Rng(cell seed, 1), noise seed
// derive_seed(cell seed, 2), where cell seed = derive_seed(seed, N).
WaitingCell run_waiting_cell(const WaitingSettings& settings, std::size_t n_agents, std::uint64_t seed);

struct ScalingSettings {
  std::vector<std::size_t> n_grid{32, 64, 128, 256};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  WaitingSettings cell;
  std::size_t jobs = 1;
};

struct ScalingLevel {
  std::size_t n_agents = 0;
  std::size_t closed = 0;
  double mean_tau_hat = 0.0;  // over closed cells
  std::optional<double> median_tau_hat;
};

struct ScalingReport {
  std::vector<WaitingCell> cells;  // ordered by (N, seed)
  std::vector<ScalingLevel> levels;
  std::size_t open_cells = 0;
  LinearFit vs_n;       // tau_hat of every closed cell against N
  LinearFit vs_n_mean;  // seed-averaged tau_hat against N
  LinearFit vs_y0_sq;   // tau_hat against |y0|^2
  bool fit_ok = false;  // at least two distinct N among closed cells
};

ScalingReport scaling_experiment(const ScalingSettings& settings);

// Median of tau_hat over the cells with the given N; open cells count as
// +infinity, so the result is infinite when at least half are open.
std::optional<double> median_tau_hat(std::span<const WaitingCell> cells, std::size_t n_agents);

struct AlphaSweep {
  std::vector<double> alphas;  // decreasing
  std::vector<ScalingReport> runs;
  std::vector<double> medians;  // +infinity when at least half the cells are open
  bool non_decreasing = false;  // medians never drop as alpha decreases
};

AlphaSweep alpha_sweep(const WaitingSettings& cell, std::size_t n_agents, std::vector<double> alphas,
                       const std::vector<std::uint64_t>& seeds, std::size_t jobs);

}  // namespace mgsde
