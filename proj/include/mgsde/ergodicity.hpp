#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mgsde/rng.hpp"
#include "mgsde/scenario.hpp"
#include "mgsde/sde.hpp"

namespace mgsde {

// ---------------------------------------------------------------------------
// Initial conditions

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::finite_asymmetric;
  double gamma_frac = 1.0;  // fraction of agents with y_i(0) != 0
  double beta = 1.0;        // min over those agents of y_i tanh(y_i)
  double y_max = 50.0;      // stands in for |y_i(0)| -> infinity
  std::size_t producers = 1;
  // finite_asymmetric magnitudes are uniform on [x*, (1 + spread) x*], with
  // x* tanh(x*) = beta; one agent sits exactly at x*.
  double spread = 0.5;

  void validate() const;
  bool operator==(const ScenarioSpec&) const = default;
};

// Positive root of x tanh(x) = beta.
double weakest_asymmetry(double beta);

std::vector<double> make_initial_condition(const ScenarioSpec& spec, std::size_t n_agents, Rng& rng);

// ---------------------------------------------------------------------------
// Law-of-large-numbers suite over the overlap statistics.

struct LlnSettings {
  std::vector<std::size_t> n_grid{256, 1024, 4096};
  double alpha = 1.0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t probe_agents = 64;
  std::size_t jobs = 1;
  Interval slope_bounds{-0.7, -0.3};  // closed in the check
};

// Statistics of one table at a probe set of agents (the first probe_agents).
struct LlnCell {
  std::size_t n_agents = 0;
  std::size_t n_states = 0;
  std::uint64_t seed = 0;
  double mean_abs_xi_theta = 0.0;   // mean_i |xi_theta(i)|
  double mean_abs_xi2_dev = 0.0;    // mean_i |xi_xi(i,i) - 1/2|
  double mean_abs_cross_sum = 0.0;  // mean_i |sum_{j != i} xi_xi(i,j)|
  double mean_xi_theta = 0.0;       // signed means, for symmetry checks
  double mean_xi2_dev = 0.0;
  double mean_cross_sum = 0.0;
  double max_abs_xi2_dev_all = 0.0;  // over every agent, not only probes
};

LlnCell lln_statistics(const StrategyTable& table, std::size_t probe_agents);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct LlnLevel {
  std::size_t n_agents = 0;
  std::size_t n_states = 0;
  double mean_abs_xi_theta = 0.0;
  double mean_abs_xi2_dev = 0.0;
  double mean_abs_cross_sum = 0.0;
};

struct LlnReport {
  std::vector<LlnCell> cells;  // ordered by (N, seed); table seed derive_seed(seed, N)
  std::vector<LlnLevel> levels;
  LinearFit xi_theta_decay;  // log mean |.| against log N
  LinearFit xi2_decay;
  LinearFit cross_decay;
  bool slopes_ok = false;  // xi_theta and cross-sum slopes inside slope_bounds
  // How many seeds have max_i |xi_xi(i,i) - 1/2| non-increasing along n_grid.
  std::size_t trend_seeds = 0;
};

LlnReport lln_suite(const LlnSettings& settings);

// ---------------------------------------------------------------------------
// Radial drift (Veretennikov-type) condition

enum class ProbeFamily {
  all_large,      // every coordinate of comparable, large magnitude
  sparse_finite,  // a gamma-fraction of coordinates with x tanh x >= beta
};

std::string to_string(ProbeFamily family);
ProbeFamily probe_family_from_string(const std::string& name);

// The scenario, beta and gamma of the target come from the RescaleConstant;
// sparse_finite probes are built with the same beta and gamma.
struct RadialCheckSettings {
  ProbeFamily family = ProbeFamily::all_large;
  double spread = 0.5;
  std::size_t n_probes = 1000;
  std::vector<double> radii;  // increasing |x|; empty = sqrt(N) * {0.5,1,2,5,10,20,50}
  double pass_level = 0.99;
  double normalized_threshold = 0.45;  // on <b(x), x> / N
  std::uint64_t seed = 1;
};

struct RadialLevel {
  double radius = 0.0;
  double pass_fraction = 0.0;             // <b(x), x> > target
  double normalized_pass_fraction = 0.0;  // <b(x), x>/N >= normalized_threshold
  double mean_normalized = 0.0;
  double min_margin = 0.0;  // min over probes of <b(x), x> - target
};

struct VeretennikovReport {
  double r_required = 0.0;  // N/2 + 1
  double r_achieved = 0.0;  // c (N/2 - 1)
  double target = 0.0;      // beta gamma (N/2 - 1), the bound on <b(x), x>
  std::optional<double> m0_empirical;
  double pass_fraction = 0.0;             // at m0 (or the largest radius)
  double normalized_pass_fraction = 0.0;  // same radius
  double k = 0.0;
  double l = 0.0;
  std::vector<RadialLevel> profile;
  bool pass = false;
};

VeretennikovReport radial_drift_check(const DriftSpec& spec, const RescaleConstant& rescale,
                                      const RadialCheckSettings& settings);

// ---------------------------------------------------------------------------
// Discrete game against the continuum drift

struct DriftOracleSettings {
  std::size_t test_points = 10;
  std::uint64_t samples = 100000;  // rounds per test point
  double y_scale = 1.5;            // test points y_i ~ U(-y_scale, y_scale)
  double z_limit = 3.0;            // agreement within z_limit standard errors
  double coverage = 0.95;          // required share of agreeing coordinates
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

struct DriftOraclePoint {
  std::vector<double> y;
  std::vector<double> measured;   // mean increment per unit SDE time
  std::vector<double> predicted;  // -b^N(y)
  std::vector<double> std_error;
  std::size_t within = 0;
};

struct DriftOracleReport {
  std::vector<DriftOraclePoint> points;
  std::size_t within = 0;
  std::size_t total = 0;
  double coverage = 0.0;
  bool pass = false;
};

// Test point k uses Rng(seed, 1000 + k) for y and Rng(seed, k) for the game.
DriftOracleReport drift_oracle_check(const StrategyTable& table, double gamma_rate, const DriftOracleSettings& settings);

// ---------------------------------------------------------------------------
// Exponents, waiting time and the envelope constant

struct ExponentChoice {
  Interval k_range;
  Interval l_range;
  double k = 0.0;  // k_range midpoint
  double l = 0.0;  // l_range midpoint
};

ExponentChoice exponent_ranges(std::size_t n_agents, ScenarioKind scenario, double beta = 1.0,
                               double gamma_frac = 1.0);

// T such that m' (1 + |c y0|^l) (1 + T G)^{-(k+1)} = epsilon, in score time,
// clamped at zero.
double waiting_time_bound(double epsilon, double gamma_rate, double y0_norm, double c, double k, double l,
                          double m_prime);

struct EnvelopeFit {
  double m_prime = 0.0;     // smallest constant whose envelope dominates every fitted pair
  double m_prime_ls = 0.0;  // log-space least-squares constant
  std::size_t ls_violations = 0;  // pairs above the least-squares curve
  std::size_t pairs = 0;
};

struct TvSample {
  double t = 0.0;  // SDE time
  double tv = 0.0;
};

// Fits m' for the envelope m' (1 + |c y0|^l) (1 + t)^{-(k+1)}. Needs at least
// three pairs and a net decrease of tv; throws ErrorCode::check_failed
// otherwise.
EnvelopeFit calibrate_m_prime(std::span<const TvSample> pairs, double k, double l, double c, double y0_norm);

// Fraction of samples with tv <= m' (1 + |c y0|^l) (1 + t)^{-(k+1)}.
double envelope_coverage(std::span<const TvSample> samples, double m_prime, double k, double l, double c,
                         double y0_norm);

}  // namespace mgsde
