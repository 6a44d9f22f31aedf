// Acceptance gate. Prints one line per criterion:
//   criterion <n> PASS|FAIL <name>: <details>
// and exits non-zero when any selected criterion fails.
#include <CLI11.hpp>

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "mgsde/ergodicity.hpp"
#include "mgsde/game_params.hpp"
#include "mgsde/overlaps.hpp"
#include "mgsde/rng.hpp"
#include "mgsde/sde.hpp"
#include "mgsde/stationarity.hpp"
#include "mgsde/strategy_table.hpp"

using namespace mgsde;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g(double v) { return fmt("%.4g", v); }

std::size_t g_jobs = 1;

// --- 1: LLN suite -----------------------------------------------------------

Outcome lln() {
  LlnSettings s;
  s.n_grid = {256, 1024, 4096};
  s.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  s.probe_agents = 64;
  s.slope_bounds = {-0.7, -0.3};
  s.jobs = g_jobs;
  const auto r = lln_suite(s);
  const double xi2 = r.levels.back().mean_abs_xi2_dev;
  const bool xi2_ok = xi2 <= 0.02;
  const auto in = [&](double v) { return v >= -0.7 && v <= -0.3; };
  Outcome o;
  o.pass = xi2_ok && in(r.xi_theta_decay.slope) && in(r.cross_decay.slope);
  o.detail = "mean|xi2-1/2|@4096 = " + g(xi2) + (xi2_ok ? " (ok)" : " (>0.02)") + "; slope |xi.Theta| = " +
             g(r.xi_theta_decay.slope) + ", slope |cross sum| = " + g(r.cross_decay.slope) + ", slope |xi2-1/2| = " +
             g(r.xi2_decay.slope) + " (required in [-0.7, -0.3])";
  return o;
}

// --- 2: nondegeneracy -------------------------------------------------------

Outcome nondegeneracy() {
  std::size_t positive = 0, total = 0;
  double worst_recon = 0.0, smallest = INFINITY;
  for (const std::size_t n : {256u, 1024u}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto params = make_game_params(n, 1.0, 1.0, derive_seed(seed, n));
      const auto table = sample_strategies(params);
      const auto ov = compute_overlaps(table);
      Eigen::SelfAdjointEigenSolver<Matrix> es(ov.xi_xi, Eigen::EigenvaluesOnly);
      const double lambda = es.eigenvalues().minCoeff();
      smallest = std::min(smallest, lambda);
      positive += lambda > 0.0;
      ++total;
      const auto pf = psd_factor(ov.xi_xi);
      worst_recon = std::max(worst_recon, (pf.factor * pf.factor.transpose() - ov.xi_xi).cwiseAbs().maxCoeff());
    }
  }
  Outcome o;
  o.pass = positive == total && worst_recon <= 1e-8;
  o.detail = std::to_string(positive) + "/" + std::to_string(total) + " tables with lambda_min > 0 (smallest " +
             g(smallest) + "); max reconstruction error " + g(worst_recon) + " (limit 1e-8)";
  return o;
}

// --- 3: drift oracle --------------------------------------------------------

Outcome drift_oracle() {
  const auto params = make_game_params(64, 1.0, 0.1, derive_seed(1, 64));
  const auto table = sample_strategies(params);
  DriftOracleSettings s;
  s.test_points = 10;
  s.samples = 100000;
  s.z_limit = 3.0;
  s.coverage = 0.95;
  s.seed = derive_seed(derive_seed(1, 64), 4);
  s.jobs = g_jobs;
  const auto r = drift_oracle_check(table, params.gamma_rate, s);
  Outcome o;
  o.pass = r.pass;
  o.detail = std::to_string(r.within) + "/" + std::to_string(r.total) + " coordinates within 3 SE (" +
             fmt("%.1f%%", 100.0 * r.coverage) + ", required 95%)";
  return o;
}

// --- 4: dissipativity -------------------------------------------------------

struct RadialSummary {
  bool pass = false;
  std::string text;
};

RadialSummary radial(const DriftSpec& spec, const RescaleConstant& rc, ProbeFamily family, const char* label) {
  RadialCheckSettings s;
  s.family = family;
  s.n_probes = 1000;
  s.pass_level = 0.99;
  s.normalized_threshold = 0.45;
  s.seed = derive_seed(derive_seed(1, 1024), 5);
  const auto r = radial_drift_check(spec, rc, s);
  RadialSummary out;
  double worst = 1.0;
  if (r.m0_empirical) {
    for (const auto& level : r.profile)
      if (level.radius >= *r.m0_empirical) worst = std::min(worst, level.normalized_pass_fraction);
  }
  out.pass = r.pass && r.m0_empirical && worst >= 0.99;
  out.text = std::string(label) + ": M0 = " + (r.m0_empirical ? g(*r.m0_empirical) : std::string("none")) +
             ", min share with <b,x>/N >= 0.45 at |x| >= M0 = " + g(worst) + ", r = " + fmt("%.4f", r.r_achieved) + " > " +
             fmt("%.4f", r.r_required);
  return out;
}

Outcome dissipativity() {
  const auto params = make_game_params(1024, 1.0, 1.0, derive_seed(1, 1024));
  const auto table = sample_strategies(params);
  const DriftSpec spec(std::make_shared<const OverlapData>(compute_overlaps(table)), params.n_states);
  const auto a = radial(spec, rescale_constant(1024, ScenarioKind::producer), ProbeFamily::all_large, "maximal");
  const auto b = radial(spec, rescale_constant(1024, ScenarioKind::finite_asymmetric, 1.0, 1.0),
                        ProbeFamily::sparse_finite, "finite bg=1");
  return {a.pass && b.pass, a.text + "; " + b.text};
}

// --- 5: integrator calibration ----------------------------------------------

Outcome integrator() {
  // OU: dy = -y dt + s dW on 64 independent coordinates, stationary variance s^2/2.
  const int d = 64;
  const double s = 1.0, dt = 1e-3;
  Rng rng(derive_seed(5, 0));
  const auto drift_fn = [](const Vector& v) -> Vector { return v; };
  const auto diffuse_fn = [&](const Vector&, const Vector& gn) -> Vector { return s * gn; };
  Vector y = Vector::Zero(d);
  for (int k = 0; k < 10000; ++k) y = em_step(y, dt, drift_fn, diffuse_fn, rng);
  double sum2 = 0.0;
  const int steps = 1000000;
  for (int k = 0; k < steps; ++k) {
    y = em_step(y, dt, drift_fn, diffuse_fn, rng);
    sum2 += y.squaredNorm();
  }
  const double var = sum2 / (static_cast<double>(steps) * d);
  const double ou_err = std::abs(var / (s * s / 2.0) - 1.0);

  // dt halving on the game: same Brownian path, tail-window means.
  const std::uint64_t cell = derive_seed(1, 64);
  const auto params = make_game_params(64, 1.0, 1.0, cell);
  const auto table = sample_strategies(params);
  Rng init(cell, 1);
  const auto y0 = make_initial_condition(ScenarioSpec{}, 64, init);
  const SdeModel model(params, table);
  EnsembleSettings coarse;
  coarse.dt = 0.01;
  coarse.t_end = 200.0;
  coarse.record_every = 100;
  coarse.replicas = 64;
  coarse.noise_seed = derive_seed(cell, 2);
  coarse.noise_refinement = 2;
  EnsembleSettings fine = coarse;
  fine.dt = 0.005;
  fine.record_every = 200;
  fine.noise_refinement = 1;
  const auto a = integrate_ensemble(model, y0, coarse);
  const auto b = integrate_ensemble(model, y0, fine);
  const auto tail_means = [](const EnsembleRecording& r) {
    const std::size_t first = r.samples() - r.samples() / 4;
    double abs_tanh = 0.0, abs_y = 0.0;
    std::size_t count = 0;
    for (std::size_t k = first; k < r.samples(); ++k)
      for (std::size_t rep = 0; rep < r.replicas; ++rep)
        for (std::size_t c = 0; c < r.width(); ++c) {
          abs_tanh += std::abs(std::tanh(r.at(k, rep, c)));
          abs_y += std::abs(r.at(k, rep, c));
          ++count;
        }
    return std::pair{abs_tanh / count, abs_y / count};
  };
  const auto [ta, ya] = tail_means(a);
  const auto [tb, yb] = tail_means(b);
  const double d_tanh = std::abs(ta - tb) / tb, d_y = std::abs(ya - yb) / yb;

  Outcome o;
  o.pass = ou_err <= 0.02 && d_tanh < 0.01 && d_y < 0.01;
  o.detail = "OU variance " + fmt("%.5f", var) + " vs 0.5 (rel. err " + fmt("%.2f%%", 100 * ou_err) +
             ", limit 2%); dt 0.01 -> 0.005 changes tail mean|tanh y| by " + fmt("%.3f%%", 100 * d_tanh) +
             " and tail mean|y| by " + fmt("%.3f%%", 100 * d_y) + " (limit 1%)";
  return o;
}

// --- 6: waiting-time algebra ------------------------------------------------

Outcome algebra() {
  const double tol = 1e-6;
  std::string detail;
  bool pass = true;

  const double m = 0.75, c = 1.3, k = 0.2, l = 2.4, y0 = 2.5;
  const double eps = m * (1.0 + std::pow(c * y0, l));
  const double t0 = waiting_time_bound(eps, 1.0, y0, c, k, l, m);
  const bool zero_ok = t0 == 0.0;
  pass = pass && zero_ok;
  detail += "T(eps = m'(1+|cy0|^l)) = " + g(t0) + (zero_ok ? " (ok)" : " (not 0)");

  double worst_gamma = 0.0;
  const double base = waiting_time_bound(0.05, 1.0, y0, c, k, l, m);
  for (const double gamma : {0.1, 0.5, 2.0, 7.0, 100.0}) {
    const double t = waiting_time_bound(0.05, gamma, y0, c, k, l, m);
    worst_gamma = std::max(worst_gamma, std::abs(t * gamma / base - 1.0));
  }
  pass = pass && worst_gamma <= tol;
  detail += "; max rel. dev. of T*Gamma = " + g(worst_gamma);

  const auto limits = [&](ScenarioKind kind, const char* label) {
    const auto rc = rescale_constant(1000000, kind, 1.0, 1.0);
    const auto e = exponent_ranges(1000000, kind, 1.0, 1.0);
    const double dc = std::abs(rc.c - 1.0), dk = std::abs(e.k), dl = std::abs(e.l - 2.0) / 2.0;
    const bool ok = dc <= tol && dk <= tol && dl <= tol;
    pass = pass && ok;
    detail += std::string("; ") + label + " N=1e6: c-1 = " + g(dc) + ", k = " + g(dk) + ", (l-2)/2 = " + g(dl) +
              (ok ? "" : " (exceeds 1e-6)");
  };
  limits(ScenarioKind::producer, "maximal");
  limits(ScenarioKind::finite_asymmetric, "finite bg=1");
  return {pass, detail};
}

// --- 7 and 8: waiting times ---------------------------------------------------

WaitingSettings waiting_cell() {
  WaitingSettings ws;
  ws.alpha = 1.0;
  ws.gamma_rate = 1.0;
  ws.scenario = ScenarioSpec{};  // finite, beta = gamma = 1
  ws.replicas = 128;
  ws.dt = 0.01;
  ws.t_end = 1500.0;
  ws.record_every = 100;
  ws.tracked = 0;
  ws.stationarity.epsilon = 0.1;
  ws.stationarity.window = 10;
  ws.stationarity.confirm = 3;
  return ws;
}

Outcome scaling() {
  ScalingSettings s;
  s.n_grid = {32, 64, 128, 256};
  s.seeds = {1, 2, 3, 4, 5};
  s.cell = waiting_cell();
  s.jobs = g_jobs;
  const auto rep = scaling_experiment(s);
  std::string levels;
  for (const auto& l : rep.levels)
    levels += (levels.empty() ? "" : ", ") + std::to_string(l.n_agents) + ":" +
              (l.closed ? g(l.mean_tau_hat) : std::string("open")) + "(" + std::to_string(l.closed) + ")";
  const bool law = rep.fit_ok && rep.vs_n_mean.slope > 0.0 && rep.vs_n_mean.r2 >= 0.9;

  auto cell = waiting_cell();
  cell.t_end = 1000.0;
  const auto sweep = alpha_sweep(cell, 128, {1.0, 0.7, 0.4}, {1, 2, 3}, g_jobs);
  std::string medians;
  for (std::size_t a = 0; a < sweep.alphas.size(); ++a)
    medians += (a ? ", " : "") + g(sweep.alphas[a]) + ":" + g(sweep.medians[a]);

  Outcome o;
  o.pass = law && sweep.non_decreasing;
  o.detail = "mean tau_hat by N " + levels + "; fit slope " + g(rep.vs_n_mean.slope) + ", R^2 " +
             g(rep.vs_n_mean.r2) + " (need > 0 and >= 0.9), open cells " + std::to_string(rep.open_cells) +
             "; alpha sweep N=128 medians " + medians + (sweep.non_decreasing ? " (non-decreasing)" : " (decreasing step)");
  return o;
}

Outcome envelope() {
  const auto ws = waiting_cell();
  const auto cell = run_waiting_cell(ws, 64, 1);
  const auto rc = rescale_constant(64, ScenarioKind::finite_asymmetric, 1.0, 1.0);
  const auto env = envelope_check(cell.report, cell.y0_norm, ws.stationarity, rc);
  Outcome o;
  if (!env.ok) {
    o.detail = "m' fit failed: " + env.error;
    return o;
  }
  std::vector<TvSample> raw;
  for (const auto& p : cell.report.curve) raw.push_back({p.t, p.tv});
  const double raw_cov = envelope_coverage(raw, env.fit.m_prime, env.k, env.l, env.c, cell.y0_norm);
  o.pass = env.fit.m_prime > 0.0 && env.coverage >= 0.95;
  o.detail = "m' = " + g(env.fit.m_prime) + " (k " + g(env.k) + ", l " + g(env.l) + ", c " + g(env.c) +
             ", |y0| " + g(cell.y0_norm) + "), coverage " + fmt("%.1f%%", 100 * env.coverage) + " of " +
             std::to_string(cell.report.curve.size()) + " windows (required 95%); uncorrected TV coverage " +
             fmt("%.1f%%", 100 * raw_cov) + "; tau_hat " +
             (cell.report.tau_hat ? g(*cell.report.tau_hat) : std::string("open")) + ", bound " + g(env.bound_tau);
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int which = 0;
  app.add_option("--criterion", which, "Criterion number (0 = all)")->check(CLI::Range(0, 8));
  app.add_option("--jobs", g_jobs, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"lln-suite", lln},
      {"nondegeneracy", nondegeneracy},
      {"drift-oracle", drift_oracle},
      {"dissipativity", dissipativity},
      {"integrator-calibration", integrator},
      {"waiting-time-algebra", algebra},
      {"scaling-law", scaling},
      {"envelope", envelope},
  };
  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (which != 0 && static_cast<std::size_t>(which) != i + 1) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all_pass = all_pass && o.pass;
    std::printf("criterion %zu %s %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
