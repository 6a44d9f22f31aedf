#include "mgsde/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mgsde/discrete_game.hpp"
#include "mgsde/overlaps.hpp"
#include "mgsde/parallel.hpp"

namespace mgsde {

// ---------------------------------------------------------------------------
// initial conditions

void ScenarioSpec::validate() const {
  if (kind == ScenarioKind::producer) {
    require(std::isfinite(y_max) && y_max > 0.0, "scenario.y_max must be positive");
    require(producers >= 1, "scenario.producers must be at least 1");
    return;
  }
  require(gamma_frac > 0.0 && gamma_frac <= 1.0, "scenario.gamma_frac must lie in (0, 1]");
  require(std::isfinite(beta) && beta > 0.0, "scenario.beta must be positive");
  require(beta * gamma_frac <= 1.0, "scenario: beta * gamma_frac must lie in (0, 1]");
  require(std::isfinite(spread) && spread >= 0.0, "scenario.spread must be non-negative");
  require(std::isfinite(y_max) && y_max > 0.0, "scenario.y_max must be positive");
}

double weakest_asymmetry(double beta) {
  require(std::isfinite(beta) && beta >= 0.0, "weakest_asymmetry: beta must be non-negative");
  if (beta == 0.0) return 0.0;
  const auto f = [beta](double x) { return x * std::tanh(x) - beta; };
  double lo = 0.0;
  double hi = beta + 2.0;
  while (f(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

// First `count` entries of a random permutation of 0..n-1.
std::vector<std::size_t> random_subset(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < count; ++k) std::swap(idx[k], idx[k + rng.index(n - k)]);
  idx.resize(count);
  return idx;
}

}  // namespace

std::vector<double> make_initial_condition(const ScenarioSpec& spec, std::size_t n_agents, Rng& rng) {
  spec.validate();
  require(n_agents >= 1, "make_initial_condition: need at least one agent");
  std::vector<double> y(n_agents, 0.0);

  if (spec.kind == ScenarioKind::producer) {
    require(spec.producers <= n_agents, "make_initial_condition: more producers than agents");
    for (const auto i : random_subset(n_agents, spec.producers, rng)) y[i] = rng.coin() ? spec.y_max : -spec.y_max;
    return y;
  }

  const double x_star = weakest_asymmetry(spec.beta);
  if (x_star > spec.y_max) {
    fail(ErrorCode::invalid_argument, "make_initial_condition: beta = " + std::to_string(spec.beta) +
                                          " needs |y_i| >= " + std::to_string(x_star) + " > y_max");
  }
  const double upper = std::min((1.0 + spec.spread) * x_star, spec.y_max);
  const auto count = static_cast<std::size_t>(
      std::clamp(std::ceil(spec.gamma_frac * static_cast<double>(n_agents) - 1e-9), 1.0, static_cast<double>(n_agents)));
  const auto chosen = random_subset(n_agents, count, rng);
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const double magnitude = k == 0 ? x_star : rng.uniform(x_star, upper);
    y[chosen[k]] = rng.coin() ? magnitude : -magnitude;
  }
  return y;
}

// ---------------------------------------------------------------------------
// LLN suite

LlnCell lln_statistics(const StrategyTable& table, std::size_t probe_agents) {
  const std::size_t n = table.n_agents();
  const std::size_t p = table.n_states();
  const std::size_t probes = std::min(std::max<std::size_t>(probe_agents, 1), n);

  std::vector<std::int64_t> xt(probes, 0);
  std::vector<std::int64_t> cross(probes, 0);
  std::vector<std::int64_t> sq(n, 0);
  for (std::size_t mu = 0; mu < p; ++mu) {
    const auto row = table.xi_row(mu);
    const std::int64_t theta = table.theta(mu);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += row[i];
      sq[i] += row[i] * row[i];
    }
    for (std::size_t i = 0; i < probes; ++i) {
      xt[i] += row[i] * theta;
      cross[i] += row[i] * (total - row[i]);
    }
  }

  const double inv_p = 1.0 / static_cast<double>(p);
  LlnCell cell;
  cell.n_agents = n;
  cell.n_states = p;
  cell.seed = table.seed();
  for (std::size_t i = 0; i < probes; ++i) {
    const double a = static_cast<double>(xt[i]) * inv_p;
    const double b = static_cast<double>(sq[i]) * inv_p - 0.5;
    const double c = static_cast<double>(cross[i]) * inv_p;
    cell.mean_abs_xi_theta += std::abs(a);
    cell.mean_abs_xi2_dev += std::abs(b);
    cell.mean_abs_cross_sum += std::abs(c);
    cell.mean_xi_theta += a;
    cell.mean_xi2_dev += b;
    cell.mean_cross_sum += c;
  }
  const double inv_probes = 1.0 / static_cast<double>(probes);
  cell.mean_abs_xi_theta *= inv_probes;
  cell.mean_abs_xi2_dev *= inv_probes;
  cell.mean_abs_cross_sum *= inv_probes;
  cell.mean_xi_theta *= inv_probes;
  cell.mean_xi2_dev *= inv_probes;
  cell.mean_cross_sum *= inv_probes;
  for (std::size_t i = 0; i < n; ++i) {
    cell.max_abs_xi2_dev_all = std::max(cell.max_abs_xi2_dev_all, std::abs(static_cast<double>(sq[i]) * inv_p - 0.5));
  }
  return cell;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points of equal length");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  require(sxx > 0.0, "fit_line: x values are all equal");
  LinearFit fit;
  fit.points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

LlnReport lln_suite(const LlnSettings& settings) {
  require(!settings.n_grid.empty(), "lln_suite: empty N grid");
  require(!settings.seeds.empty(), "lln_suite: need at least one seed");
  const std::size_t n_seeds = settings.seeds.size();
  std::vector<std::size_t> grid = settings.n_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const std::size_t cells = grid.size() * n_seeds;
  LlnReport report;
  report.cells.resize(cells);
  parallel_for(cells, settings.jobs, [&](std::size_t k) {
    const std::size_t n = grid[k / n_seeds];
    const std::size_t s = k % n_seeds;
    const auto params = make_game_params(n, settings.alpha, 1.0, derive_seed(settings.seeds[s], n));
    report.cells[k] = lln_statistics(sample_strategies(params), settings.probe_agents);
    report.cells[k].seed = settings.seeds[s];
  });

  std::vector<double> log_n, log_xt, log_x2, log_cross;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    LlnLevel level;
    level.n_agents = grid[g];
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const auto& cell = report.cells[g * n_seeds + s];
      level.n_states = cell.n_states;
      level.mean_abs_xi_theta += cell.mean_abs_xi_theta;
      level.mean_abs_xi2_dev += cell.mean_abs_xi2_dev;
      level.mean_abs_cross_sum += cell.mean_abs_cross_sum;
    }
    const double inv = 1.0 / static_cast<double>(n_seeds);
    level.mean_abs_xi_theta *= inv;
    level.mean_abs_xi2_dev *= inv;
    level.mean_abs_cross_sum *= inv;
    report.levels.push_back(level);
    log_n.push_back(std::log(static_cast<double>(grid[g])));
    log_xt.push_back(std::log(level.mean_abs_xi_theta));
    log_x2.push_back(std::log(level.mean_abs_xi2_dev));
    log_cross.push_back(std::log(level.mean_abs_cross_sum));
  }

  if (grid.size() >= 2) {
    report.xi_theta_decay = fit_line(log_n, log_xt);
    report.xi2_decay = fit_line(log_n, log_x2);
    report.cross_decay = fit_line(log_n, log_cross);
    const auto in_bounds = [&](double slope) {
      return slope >= settings.slope_bounds.lo && slope <= settings.slope_bounds.hi;
    };
    report.slopes_ok = in_bounds(report.xi_theta_decay.slope) && in_bounds(report.cross_decay.slope);
  }

  for (std::size_t s = 0; s < n_seeds; ++s) {
    bool monotone = true;
    for (std::size_t g = 1; g < grid.size(); ++g) {
      monotone = monotone && report.cells[g * n_seeds + s].max_abs_xi2_dev_all <=
                                 report.cells[(g - 1) * n_seeds + s].max_abs_xi2_dev_all;
    }
    if (monotone) ++report.trend_seeds;
  }
  return report;
}

// ---------------------------------------------------------------------------
// radial drift check

std::string to_string(ProbeFamily family) {
  return family == ProbeFamily::all_large ? "all_large" : "sparse_finite";
}

ProbeFamily probe_family_from_string(const std::string& name) {
  if (name == "all_large") return ProbeFamily::all_large;
  if (name == "sparse_finite") return ProbeFamily::sparse_finite;
  fail(ErrorCode::config, "unknown probe family '" + name + "' (expected all_large or sparse_finite)");
}

VeretennikovReport radial_drift_check(const DriftSpec& spec, const RescaleConstant& rescale,
                                      const RadialCheckSettings& settings) {
  const std::size_t n = spec.dimension();
  require(n >= 4, "radial_drift_check: need N >= 4");
  require(settings.n_probes >= 1, "radial_drift_check: need at least one probe");
  require(settings.pass_level > 0.0 && settings.pass_level <= 1.0, "radial_drift_check: pass_level must lie in (0, 1]");

  const double h = static_cast<double>(n) / 2.0 - 1.0;
  const bool finite = rescale.scenario == ScenarioKind::finite_asymmetric;
  const double bg = finite ? rescale.beta * rescale.gamma_frac : 1.0;

  std::vector<double> radii = settings.radii;
  if (radii.empty()) {
    for (const double m : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) radii.push_back(m * std::sqrt(static_cast<double>(n)));
  }
  require(std::is_sorted(radii.begin(), radii.end()) && radii.front() > 0.0,
          "radial_drift_check: radii must be positive and increasing");

  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(settings.n_probes);
  Matrix directions(rows, cols);
  Vector base_norm(cols);
  Rng rng(settings.seed, 0);
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (settings.family == ProbeFamily::all_large) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double magnitude = rng.uniform(0.5, 1.5);
        directions(i, j) = rng.coin() ? magnitude : -magnitude;
      }
      base_norm(j) = 0.0;
    } else {
      ScenarioSpec scenario;
      scenario.kind = ScenarioKind::finite_asymmetric;
      scenario.beta = rescale.beta;
      scenario.gamma_frac = rescale.gamma_frac;
      scenario.spread = settings.spread;
      const auto x = make_initial_condition(scenario, n, rng);
      for (Eigen::Index i = 0; i < rows; ++i) directions(i, j) = x[static_cast<std::size_t>(i)];
      base_norm(j) = directions.col(j).norm();
    }
    directions.col(j).normalize();
  }

  VeretennikovReport report;
  report.r_required = rescale.r_required;
  report.r_achieved = rescale.r;
  report.target = bg * h;
  report.k = rescale.k_range.midpoint();
  report.l = rescale.l_range.midpoint();

  Matrix x(rows, cols);
  for (const double radius : radii) {
    for (Eigen::Index j = 0; j < cols; ++j) x.col(j) = std::max(radius, base_norm(j)) * directions.col(j);
    const Matrix b = drift_columns(spec, x);
    RadialLevel level;
    level.radius = radius;
    level.min_margin = std::numeric_limits<double>::infinity();
    std::size_t pass = 0, normalized_pass = 0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double ip = x.col(j).dot(b.col(j));
      const double normalized = ip / static_cast<double>(n);
      if (ip > report.target) ++pass;
      if (normalized >= settings.normalized_threshold) ++normalized_pass;
      level.mean_normalized += normalized;
      level.min_margin = std::min(level.min_margin, ip - report.target);
    }
    level.pass_fraction = static_cast<double>(pass) / static_cast<double>(cols);
    level.normalized_pass_fraction = static_cast<double>(normalized_pass) / static_cast<double>(cols);
    level.mean_normalized /= static_cast<double>(cols);
    report.profile.push_back(level);
  }

  // Smallest scanned radius from which every larger radius also passes.
  std::optional<std::size_t> m0_index;
  for (std::size_t k = report.profile.size(); k-- > 0;) {
    if (report.profile[k].pass_fraction < settings.pass_level) break;
    m0_index = k;
  }
  const auto& at = report.profile[m0_index.value_or(report.profile.size() - 1)];
  if (m0_index) report.m0_empirical = at.radius;
  report.pass_fraction = at.pass_fraction;
  report.normalized_pass_fraction = at.normalized_pass_fraction;
  report.pass = report.r_achieved > report.r_required && m0_index.has_value();
  return report;
}

// ---------------------------------------------------------------------------
// drift oracle

DriftOracleReport drift_oracle_check(const StrategyTable& table, double gamma_rate, const DriftOracleSettings& settings) {
  require(settings.test_points >= 1, "drift oracle: need at least one test point");
  require(settings.samples >= 2, "drift oracle: need at least two samples per point");
  require(settings.y_scale >= 0.0 && settings.z_limit > 0.0, "drift oracle: invalid y_scale or z_limit");
  const auto overlaps = std::make_shared<const OverlapData>(compute_overlaps(table));
  const DriftSpec spec(overlaps, table.n_states());
  const std::size_t n = table.n_agents();

  DriftOracleReport report;
  report.points.resize(settings.test_points);
  parallel_for(settings.test_points, settings.jobs, [&](std::size_t k) {
    auto& point = report.points[k];
    Rng point_rng(settings.seed, 1000 + k);
    point.y.resize(n);
    for (auto& v : point.y) v = point_rng.uniform(-settings.y_scale, settings.y_scale);
    Rng game_rng(settings.seed, k);
    const auto estimate = estimate_discrete_drift(table, gamma_rate, point.y, settings.samples, game_rng);
    const Vector b = drift(spec, Eigen::Map<const Vector>(point.y.data(), static_cast<Eigen::Index>(n)));
    point.measured = estimate.mean;
    point.std_error = estimate.std_error;
    point.predicted.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      point.predicted[i] = -b(static_cast<Eigen::Index>(i));
      if (std::abs(point.measured[i] - point.predicted[i]) <= settings.z_limit * point.std_error[i]) ++point.within;
    }
  });
  for (const auto& p : report.points) report.within += p.within;
  report.total = settings.test_points * n;
  report.coverage = static_cast<double>(report.within) / static_cast<double>(report.total);
  report.pass = report.coverage >= settings.coverage;
  return report;
}

// ---------------------------------------------------------------------------
// exponents, waiting time, envelope

ExponentChoice exponent_ranges(std::size_t n_agents, ScenarioKind scenario, double beta, double gamma_frac) {
  const auto rc = rescale_constant(n_agents, scenario, beta, gamma_frac);
  ExponentChoice choice;
  choice.k_range = rc.k_range;
  choice.k = rc.k_range.midpoint();
  choice.l_range = rc.l_range;
  choice.l = rc.l_range.midpoint();
  return choice;
}

double waiting_time_bound(double epsilon, double gamma_rate, double y0_norm, double c, double k, double l,
                          double m_prime) {
  require(epsilon > 0.0, "waiting_time_bound: epsilon must be positive");
  require(gamma_rate > 0.0, "waiting_time_bound: gamma_rate must be positive");
  require(m_prime > 0.0, "waiting_time_bound: m' must be positive");
  require(y0_norm >= 0.0 && c > 0.0 && k > -1.0, "waiting_time_bound: invalid y0_norm, c or k");
  const double bracket = m_prime * (1.0 + std::pow(c * y0_norm, l)) / epsilon;
  if (bracket <= 1.0) return 0.0;
  return (std::pow(bracket, 1.0 / (k + 1.0)) - 1.0) / gamma_rate;
}

namespace {

double envelope_shape(double t, double k, double l, double c, double y0_norm) {
  return (1.0 + std::pow(c * y0_norm, l)) * std::pow(1.0 + t, -(k + 1.0));
}

}  // namespace

EnvelopeFit calibrate_m_prime(std::span<const TvSample> pairs, double k, double l, double c, double y0_norm) {
  if (pairs.size() < 3) fail(ErrorCode::check_failed, "calibrate_m_prime: need at least three (t, tv) pairs");
  for (const auto& p : pairs) {
    require(std::isfinite(p.tv) && p.tv >= 0.0 && p.t >= 0.0, "calibrate_m_prime: invalid (t, tv) pair");
  }
  if (!(pairs.back().tv < pairs.front().tv)) {
    fail(ErrorCode::check_failed, "calibrate_m_prime: TV data is not decreasing (run too short or not converging)");
  }

  EnvelopeFit fit;
  fit.pairs = pairs.size();
  double log_sum = 0.0;
  std::size_t positive = 0;
  for (const auto& p : pairs) {
    const double ratio = p.tv / envelope_shape(p.t, k, l, c, y0_norm);
    fit.m_prime = std::max(fit.m_prime, ratio);
    if (ratio > 0.0) {
      log_sum += std::log(ratio);
      ++positive;
    }
  }
  fit.m_prime_ls = std::exp(log_sum / static_cast<double>(positive));
  for (const auto& p : pairs) {
    if (p.tv > fit.m_prime_ls * envelope_shape(p.t, k, l, c, y0_norm)) ++fit.ls_violations;
  }
  return fit;
}

double envelope_coverage(std::span<const TvSample> samples, double m_prime, double k, double l, double c,
                         double y0_norm) {
  require(!samples.empty(), "envelope_coverage: no samples");
  std::size_t covered = 0;
  for (const auto& s : samples) {
    if (s.tv <= m_prime * envelope_shape(s.t, k, l, c, y0_norm)) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(samples.size());
}

}  // namespace mgsde
