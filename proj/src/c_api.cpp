#include "mgsde.h"

#include <Eigen/Eigenvalues>
#include <cstring>
#include <memory>
#include <string>

#include "mgsde/harness.hpp"
#include "mgsde/overlaps.hpp"
#include "mgsde/sde.hpp"
#include "mgsde/strategy_table.hpp"

struct mgsde_game {
  mgsde::GameParams params;
  mgsde::StrategyTable table;
  std::unique_ptr<mgsde::SdeModel> model;
};

namespace {

thread_local std::string last_error;

mgsde_status status_of(mgsde::ErrorCode code) {
  switch (code) {
    case mgsde::ErrorCode::invalid_argument: return MGSDE_E_INVALID_ARGUMENT;
    case mgsde::ErrorCode::config: return MGSDE_E_CONFIG;
    case mgsde::ErrorCode::numeric: return MGSDE_E_NUMERIC;
    case mgsde::ErrorCode::io: return MGSDE_E_IO;
    case mgsde::ErrorCode::check_failed: return MGSDE_E_CHECK_FAILED;
  }
  return MGSDE_E_INTERNAL;
}

template <class Fn>
mgsde_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return MGSDE_OK;
  } catch (const mgsde::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return MGSDE_E_INTERNAL;
}

void need(bool ok, const char* what) {
  if (!ok) mgsde::fail(mgsde::ErrorCode::invalid_argument, what);
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::unique_ptr<mgsde_game> make_game(const mgsde::GameParams& params, mgsde::StrategyTable table) {
  auto game = std::make_unique<mgsde_game>(mgsde_game{params, std::move(table), nullptr});
  game->model = std::make_unique<mgsde::SdeModel>(game->params, game->table);
  return game;
}

Eigen::Map<const mgsde::Vector> as_vector(const double* y, size_t n) {
  return {y, static_cast<Eigen::Index>(n)};
}

}  // namespace

extern "C" {

const char* mgsde_version(void) {
  static const std::string v = mgsde::code_version();
  return v.c_str();
}

const char* mgsde_last_error(void) { return last_error.c_str(); }

void mgsde_string_free(char* s) { std::free(s); }

mgsde_status mgsde_game_create(size_t n_agents, double alpha, double gamma_rate, uint64_t seed, mgsde_game** out) {
  return guarded([&] {
    need(out != nullptr, "mgsde_game_create: out is NULL");
    *out = nullptr;
    const auto params = mgsde::make_game_params(n_agents, alpha, gamma_rate, seed);
    *out = make_game(params, mgsde::sample_strategies(params)).release();
  });
}

mgsde_status mgsde_game_load(const char* path, double gamma_rate, mgsde_game** out) {
  return guarded([&] {
    need(path != nullptr && out != nullptr, "mgsde_game_load: NULL argument");
    *out = nullptr;
    auto table = mgsde::load_table(path);
    const double alpha = static_cast<double>(table.n_states()) / static_cast<double>(table.n_agents());
    auto params = mgsde::make_game_params(table.n_agents(), alpha, gamma_rate, table.seed());
    need(params.n_states == table.n_states(), "mgsde_game_load: table dimensions are inconsistent");
    *out = make_game(params, std::move(table)).release();
  });
}

void mgsde_game_destroy(mgsde_game* game) { delete game; }

mgsde_status mgsde_game_dims(const mgsde_game* game, size_t* n_agents, size_t* n_states) {
  return guarded([&] {
    need(game != nullptr, "mgsde_game_dims: game is NULL");
    if (n_agents) *n_agents = game->params.n_agents;
    if (n_states) *n_states = game->params.n_states;
  });
}

mgsde_status mgsde_game_save(const mgsde_game* game, const char* path) {
  return guarded([&] {
    need(game != nullptr && path != nullptr, "mgsde_game_save: NULL argument");
    mgsde::save_table(game->table, path);
  });
}

mgsde_status mgsde_game_drift(const mgsde_game* game, const double* y, size_t n, double* out) {
  return guarded([&] {
    need(game != nullptr && y != nullptr && out != nullptr, "mgsde_game_drift: NULL argument");
    need(n == game->params.n_agents, "mgsde_game_drift: y has the wrong length");
    const mgsde::Vector b = mgsde::drift(game->model->drift_spec(), as_vector(y, n));
    std::memcpy(out, b.data(), n * sizeof(double));
  });
}

mgsde_status mgsde_game_sigma2(const mgsde_game* game, const double* y, size_t n, double* out) {
  return guarded([&] {
    need(game != nullptr && y != nullptr && out != nullptr, "mgsde_game_sigma2: NULL argument");
    need(n == game->params.n_agents, "mgsde_game_sigma2: y has the wrong length");
    *out = mgsde::sigma_squared(game->model->diffusion_spec(), as_vector(y, n));
  });
}

mgsde_status mgsde_game_min_eigenvalue(const mgsde_game* game, double* out) {
  return guarded([&] {
    need(game != nullptr && out != nullptr, "mgsde_game_min_eigenvalue: NULL argument");
    const auto& m = game->model->drift_spec().overlaps().xi_xi;
    Eigen::SelfAdjointEigenSolver<mgsde::Matrix> solver(m, Eigen::EigenvaluesOnly);
    *out = solver.eigenvalues().minCoeff();
  });
}

mgsde_status mgsde_rescale_constant(size_t n_agents, mgsde_scenario scenario, double beta, double gamma_frac,
                                    mgsde_rescale* out) {
  return guarded([&] {
    need(out != nullptr, "mgsde_rescale_constant: out is NULL");
    need(scenario == MGSDE_SCENARIO_PRODUCER || scenario == MGSDE_SCENARIO_FINITE,
         "mgsde_rescale_constant: unknown scenario");
    const auto kind = scenario == MGSDE_SCENARIO_PRODUCER ? mgsde::ScenarioKind::producer
                                                           : mgsde::ScenarioKind::finite_asymmetric;
    const auto rc = mgsde::rescale_constant(n_agents, kind, beta, gamma_frac);
    *out = mgsde_rescale{rc.c, rc.r, rc.r_required, rc.k_range.lo, rc.k_range.hi, rc.l_range.lo, rc.l_range.hi};
  });
}

mgsde_status mgsde_waiting_time_bound(double epsilon, double gamma_rate, double y0_norm, double c, double k, double l,
                                      double m_prime, double* out) {
  return guarded([&] {
    need(out != nullptr, "mgsde_waiting_time_bound: out is NULL");
    *out = mgsde::waiting_time_bound(epsilon, gamma_rate, y0_norm, c, k, l, m_prime);
  });
}

mgsde_status mgsde_run(const char* command, const char* config_json, const mgsde_run_options* options, int* exit_code,
                       char** message, char** report_json) {
  return guarded([&] {
    need(command != nullptr && config_json != nullptr && exit_code != nullptr, "mgsde_run: NULL argument");
    if (message) *message = nullptr;
    if (report_json) *report_json = nullptr;
    mgsde::RunOptions opts;
    if (options) {
      if (options->out_dir) opts.out_dir = options->out_dir;
      if (options->jobs > 0) opts.jobs = options->jobs;
      if (options->seeds) opts.seeds = std::vector<std::uint64_t>(options->seeds, options->seeds + options->n_seeds);
      if (options->seed_count > 0) opts.seed_count = options->seed_count;
    }
    const auto outcome = mgsde::run_command(command, config_json, opts);
    *exit_code = outcome.exit_code;
    if (message) *message = copy_string(outcome.message);
    if (report_json) *report_json = copy_string(outcome.report_json);
  });
}

}  // extern "C"
