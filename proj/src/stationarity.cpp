#include "mgsde/stationarity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "mgsde/parallel.hpp"

namespace mgsde {

// ---------------------------------------------------------------------------
// histograms

std::size_t BinEdges::index(double x) const {
  if (!(x > lo)) return 0;
  if (x >= hi) return bins - 1;
  const auto k = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
  return std::min(k, bins - 1);
}

BinEdges uniform_edges(double lo, double hi, std::size_t bins) {
  require(bins >= 1, "uniform_edges: need at least one bin");
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "uniform_edges: need finite lo < hi");
  return BinEdges{lo, hi, bins};
}

BinEdges percentile_edges(std::span<const double> pooled, std::size_t bins, double lower, double upper) {
  require(!pooled.empty(), "percentile_edges: no values");
  require(0.0 <= lower && lower < upper && upper <= 1.0, "percentile_edges: need 0 <= lower < upper <= 1");
  std::vector<double> v(pooled.begin(), pooled.end());
  const auto quantile = [&](double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
  };
  double lo = quantile(lower);
  double hi = quantile(upper);
  if (!(hi > lo)) {
    // Degenerate (e.g. a point mass): widen symmetrically.
    const double pad = std::max(1e-12, 1e-9 * std::abs(lo));
    lo -= pad;
    hi += pad;
  }
  return uniform_edges(lo, hi, bins);
}

Histogram make_histogram(std::span<const double> values, const BinEdges& edges) {
  require(!values.empty(), "make_histogram: no values");
  Histogram h;
  h.edges = edges;
  h.mass.assign(edges.bins, 0.0);
  h.count = values.size();
  for (const double x : values) h.mass[edges.index(x)] += 1.0;
  const double inv = 1.0 / static_cast<double>(values.size());
  for (auto& m : h.mass) m *= inv;
  return h;
}

double tv_distance(const Histogram& a, const Histogram& b) {
  if (!(a.edges == b.edges) || a.mass.size() != b.mass.size()) {
    fail(ErrorCode::invalid_argument, "tv_distance: histograms use different bins");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < a.mass.size(); ++k) sum += std::abs(a.mass[k] - b.mass[k]);
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

double tv_distance(const EmpiricalWindow& a, const EmpiricalWindow& b) {
  if (a.marginals.size() != b.marginals.size() || a.marginals.empty()) {
    fail(ErrorCode::invalid_argument, "tv_distance: windows track different coordinates");
  }
  double d = 0.0;
  for (std::size_t j = 0; j < a.marginals.size(); ++j) d = std::max(d, tv_distance(a.marginals[j], b.marginals[j]));
  return d;
}

double binomial_mean_abs_deviation(std::size_t n, double p) {
  require(n >= 1, "binomial_mean_abs_deviation: n must be positive");
  require(p >= 0.0 && p <= 1.0, "binomial_mean_abs_deviation: p must lie in [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  // E|X - np| = 2 v C(n, v) p^v (1-p)^(n-v+1), v = floor(np) + 1.
  const double nd = static_cast<double>(n);
  const double v = std::floor(nd * p) + 1.0;
  if (v > nd) return 0.0;
  const double log_term = std::log(2.0 * v) + std::lgamma(nd + 1.0) - std::lgamma(v + 1.0) -
                          std::lgamma(nd - v + 1.0) + v * std::log(p) + (nd - v + 1.0) * std::log1p(-p);
  return std::exp(log_term) / nd;
}

double tv_noise_floor(std::span<const double> mass, std::size_t n_a, std::size_t n_b) {
  double sum = 0.0;
  for (const double q : mass) {
    const double da = binomial_mean_abs_deviation(n_a, q);
    const double db = binomial_mean_abs_deviation(n_b, q);
    sum += std::sqrt(da * da + db * db);
  }
  return 0.5 * sum;
}

// ---------------------------------------------------------------------------
// detection

std::string to_string(Observable observable) { return observable == Observable::y ? "y" : "tanh_y"; }

Observable observable_from_string(const std::string& name) {
  if (name == "y") return Observable::y;
  if (name == "tanh_y") return Observable::tanh_y;
  fail(ErrorCode::config, "unknown observable '" + name + "' (expected y or tanh_y)");
}

void StationarityConfig::validate() const {
  require(std::isfinite(epsilon) && epsilon > 0.0, "stationarity.epsilon must be positive");
  require(window >= 1, "stationarity.window must be at least 1");
  require(confirm >= 1, "stationarity.confirm must be at least 1");
  require(bins >= 2, "stationarity.bins must be at least 2");
  require(tail_fraction > 0.0 && tail_fraction < 1.0, "stationarity.tail_fraction must lie in (0, 1)");
}

std::optional<std::size_t> first_sustained_crossing(std::span<const double> statistic, double epsilon,
                                                    std::size_t confirm) {
  std::size_t run = 0;
  for (std::size_t k = 0; k < statistic.size(); ++k) {
    run = statistic[k] <= epsilon ? run + 1 : 0;
    if (run == confirm) return k + 1 - confirm;
  }
  return std::nullopt;
}

PowerLawFit fit_power_law(std::span<const TvPoint> curve, bool use_excess) {
  std::vector<double> x, y;
  for (const auto& p : curve) {
    const double v = use_excess ? p.excess : p.tv;
    if (v > 0.0) {
      x.push_back(std::log1p(p.t));
      y.push_back(std::log(v));
    }
  }
  PowerLawFit fit;
  fit.points = x.size();
  if (x.size() < 2 || std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) return fit;
  const auto line = fit_line(x, y);
  fit.exponent = -line.slope;
  fit.prefactor = std::exp(line.intercept);
  fit.r2 = line.r2;
  return fit;
}

StationarityReport detect_waiting_time(const EnsembleRecording& rec, const StationarityConfig& config) {
  config.validate();
  require(rec.replicas >= 2, "detect_waiting_time: need at least two replicas");
  require(rec.width() >= 1, "detect_waiting_time: no tracked coordinates");
  const std::size_t samples = rec.samples();
  const auto tail = static_cast<std::size_t>(std::ceil(config.tail_fraction * static_cast<double>(samples)));
  require(tail >= 1 && tail < samples, "detect_waiting_time: recording too short for the proxy segment");
  const std::size_t proxy_begin = samples - tail;

  const auto observe = [&](double v) { return config.observable == Observable::tanh_y ? std::tanh(v) : v; };
  const auto column = [&](std::size_t first, std::size_t last, std::size_t j) {
    std::vector<double> out;
    out.reserve((last - first) * rec.replicas);
    for (std::size_t s = first; s < last; ++s) {
      for (std::size_t r = 0; r < rec.replicas; ++r) out.push_back(observe(rec.at(s, r, j)));
    }
    return out;
  };

  StationarityReport report;
  report.gamma_rate = rec.gamma_rate;
  report.replicas = rec.replicas;
  report.tracked = rec.width();
  report.proxy_start = rec.t[proxy_begin];

  const std::size_t width = rec.width();
  std::vector<std::vector<double>> proxy(width);
  for (std::size_t j = 0; j < width; ++j) proxy[j] = column(proxy_begin, samples, j);

  // Windows lie entirely before the proxy segment.
  const std::size_t windows = proxy_begin / config.window;
  std::vector<BinEdges> fixed(width, uniform_edges(-1.0, 1.0, config.bins));
  std::vector<Histogram> proxy_hist(width);
  if (config.observable == Observable::tanh_y) {
    for (std::size_t j = 0; j < width; ++j) proxy_hist[j] = make_histogram(proxy[j], fixed[j]);
  }

  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t first = w * config.window;
    const std::size_t last = first + config.window;
    TvPoint point;
    point.t = 0.5 * (rec.t[first] + rec.t[last - 1]);
    for (std::size_t j = 0; j < width; ++j) {
      const auto values = column(first, last, j);
      Histogram ph;
      Histogram wh;
      if (config.observable == Observable::tanh_y) {
        ph = proxy_hist[j];
        wh = make_histogram(values, fixed[j]);
      } else {
        std::vector<double> pooled = proxy[j];
        pooled.insert(pooled.end(), values.begin(), values.end());
        const auto edges = percentile_edges(pooled, config.bins);
        ph = make_histogram(proxy[j], edges);
        wh = make_histogram(values, edges);
      }
      const double tv = tv_distance(ph, wh);
      const double floor = tv_noise_floor(ph.mass, wh.count, ph.count);
      const double excess = std::max(0.0, tv - floor);
      point.tv = std::max(point.tv, tv);
      if (j == 0 || excess > point.excess) {
        point.excess = excess;
        point.floor = floor;
      }
    }
    report.curve.push_back(point);
  }

  std::vector<double> stat;
  stat.reserve(report.curve.size());
  for (const auto& p : report.curve) stat.push_back(report.statistic(p, config));
  if (const auto hit = first_sustained_crossing(stat, config.epsilon, config.confirm)) {
    report.t_hat = report.curve[*hit].t;
    report.tau_hat = *report.t_hat / rec.gamma_rate;
  }
  report.fit = fit_power_law(report.curve, config.floor_correction);
  return report;
}

// ---------------------------------------------------------------------------
// envelope

EnvelopeCheck envelope_check(const StationarityReport& report, double y0_norm, const StationarityConfig& config,
                             const RescaleConstant& rc) {
  EnvelopeCheck env;
  env.c = rc.c;
  env.k = rc.k_range.midpoint();
  env.l = rc.l_range.midpoint();
  if (report.curve.empty()) {
    env.error = "empty TV curve";
    return env;
  }
  const double until = report.t_hat ? *report.t_hat : report.curve[(report.curve.size() - 1) / 2].t;
  std::vector<TvSample> fit_pairs, all;
  for (const auto& p : report.curve) {
    const TvSample sample{p.t, report.statistic(p, config)};
    all.push_back(sample);
    if (p.t <= until) fit_pairs.push_back(sample);
  }
  env.fit_until = until;
  try {
    env.fit = calibrate_m_prime(fit_pairs, env.k, env.l, env.c, y0_norm);
  } catch (const Error& e) {
    env.error = e.what();
    return env;
  }
  env.ok = true;
  env.coverage = envelope_coverage(all, env.fit.m_prime, env.k, env.l, env.c, y0_norm);
  env.bound_tau = waiting_time_bound(config.epsilon, report.gamma_rate, y0_norm, env.c, env.k, env.l, env.fit.m_prime);
  return env;
}

// ---------------------------------------------------------------------------
// scaling

WaitingCell run_waiting_cell(const WaitingSettings& settings, std::size_t n_agents, std::uint64_t seed) {
  require(settings.replicas >= 2, "waiting-time run needs at least two replicas");
  const std::uint64_t cell_seed = derive_seed(seed, n_agents);
  const auto params = make_game_params(n_agents, settings.alpha, settings.gamma_rate, cell_seed);
  const auto table = sample_strategies(params);  // Rng(cell_seed, 0)
  Rng init_rng(cell_seed, 1);
  const auto y0 = make_initial_condition(settings.scenario, n_agents, init_rng);

  WaitingCell cell;
  cell.n_agents = params.n_agents;
  cell.n_states = params.n_states;
  cell.alpha = params.alpha;
  cell.gamma_rate = params.gamma_rate;
  cell.seed = seed;
  double sq = 0.0;
  for (const double v : y0) sq += v * v;
  cell.y0_norm = std::sqrt(sq);
  cell.t_end = settings.t_end + settings.t_end_per_agent * static_cast<double>(n_agents);

  const SdeModel model(params, table, settings.sigma2);
  EnsembleSettings es;
  es.dt = settings.dt;
  es.t_end = cell.t_end;
  es.record_every = settings.record_every;
  es.replicas = settings.replicas;
  es.noise_seed = derive_seed(cell_seed, 2);
  if (settings.tracked > 0 && settings.tracked < n_agents) {
    for (std::size_t i = 0; i < settings.tracked; ++i) es.tracked.push_back(i * n_agents / settings.tracked);
  }
  const auto rec = integrate_ensemble(model, y0, es);
  cell.report = detect_waiting_time(rec, settings.stationarity);
  return cell;
}

ScalingReport scaling_experiment(const ScalingSettings& settings) {
  require(!settings.n_grid.empty(), "scaling: empty N grid");
  require(!settings.seeds.empty(), "scaling: no seeds");
  std::vector<std::size_t> grid = settings.n_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<std::uint64_t> seeds = settings.seeds;
  std::sort(seeds.begin(), seeds.end());

  ScalingReport report;
  report.cells.resize(grid.size() * seeds.size());
  // Largest cells first keeps the pool busy; slots are fixed so order is too.
  std::vector<std::size_t> order(report.cells.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = order.size() - 1 - k;
  parallel_for(order.size(), settings.jobs, [&](std::size_t k) {
    const std::size_t slot = order[k];
    report.cells[slot] = run_waiting_cell(settings.cell, grid[slot / seeds.size()], seeds[slot % seeds.size()]);
  });

  std::vector<double> n, y0_sq, tau, level_n, level_mean;
  for (const std::size_t size : grid) {
    ScalingLevel level;
    level.n_agents = size;
    level.median_tau_hat = median_tau_hat(report.cells, size);
    for (const auto& cell : report.cells) {
      if (cell.n_agents != size) continue;
      if (cell.report.open()) {
        ++report.open_cells;
        continue;
      }
      ++level.closed;
      level.mean_tau_hat += *cell.report.tau_hat;
      n.push_back(static_cast<double>(cell.n_agents));
      y0_sq.push_back(cell.y0_norm * cell.y0_norm);
      tau.push_back(*cell.report.tau_hat);
    }
    if (level.closed > 0) {
      level.mean_tau_hat /= static_cast<double>(level.closed);
      level_n.push_back(static_cast<double>(size));
      level_mean.push_back(level.mean_tau_hat);
    }
    report.levels.push_back(level);
  }
  if (level_n.size() >= 2) {
    report.vs_n = fit_line(n, tau);
    report.vs_n_mean = fit_line(level_n, level_mean);
    report.vs_y0_sq = fit_line(y0_sq, tau);
    report.fit_ok = true;
  }
  return report;
}

std::optional<double> median_tau_hat(std::span<const WaitingCell> cells, std::size_t n_agents) {
  std::vector<double> v;
  for (const auto& c : cells) {
    if (c.n_agents == n_agents) v.push_back(c.report.tau_hat.value_or(std::numeric_limits<double>::infinity()));
  }
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

AlphaSweep alpha_sweep(const WaitingSettings& cell, std::size_t n_agents, std::vector<double> alphas,
                       const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  require(!alphas.empty(), "alpha sweep: empty alpha grid");
  std::sort(alphas.begin(), alphas.end(), std::greater<>());
  AlphaSweep sweep;
  sweep.alphas = alphas;
  for (const double alpha : alphas) {
    ScalingSettings settings;
    settings.n_grid = {n_agents};
    settings.seeds = seeds;
    settings.cell = cell;
    settings.cell.alpha = alpha;
    settings.jobs = jobs;
    sweep.runs.push_back(scaling_experiment(settings));
    sweep.medians.push_back(median_tau_hat(sweep.runs.back().cells, n_agents).value());
  }
  sweep.non_decreasing = std::is_sorted(sweep.medians.begin(), sweep.medians.end());
  return sweep;
}

}  // namespace mgsde
