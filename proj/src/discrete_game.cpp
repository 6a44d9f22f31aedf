#include "mgsde/discrete_game.hpp"

#include <cmath>
#include <limits>

#include "mgsde/error.hpp"

namespace mgsde {

double choice_probability(double u_plus, double u_minus, double gamma_rate) {
  const double x = gamma_rate * (u_plus - u_minus);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> DiscreteState::y(double gamma_rate) const {
  std::vector<double> out(u_plus.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * gamma_rate * (u_plus[i] - u_minus[i]);
  return out;
}

DiscreteState DiscreteState::from_y(std::span<const double> y, double gamma_rate) {
  require(gamma_rate > 0.0, "gamma_rate must be positive");
  DiscreteState state;
  state.u_plus.resize(y.size());
  state.u_minus.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    state.u_plus[i] = y[i] / gamma_rate;
    state.u_minus[i] = -y[i] / gamma_rate;
  }
  return state;
}

StepOutcome discrete_step(DiscreteState& state, const StrategyTable& table, double gamma_rate, Rng& rng) {
  const std::size_t n = table.n_agents();
  require(state.n_agents() == n && state.u_minus.size() == n, "discrete_step: state size does not match table");

  StepOutcome outcome;
  outcome.mu = rng.index(table.n_states());
  const auto plus = table.plus_row(outcome.mu);
  const auto minus = table.minus_row(outcome.mu);

  int attendance = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p_plus = choice_probability(state.u_plus[i], state.u_minus[i], gamma_rate);
    attendance += rng.uniform() < p_plus ? plus[i] : minus[i];
  }
  outcome.attendance = attendance;

  const double payoff = static_cast<double>(attendance) / static_cast<double>(table.n_states());
  for (std::size_t i = 0; i < n; ++i) {
    state.u_plus[i] -= plus[i] * payoff;
    state.u_minus[i] -= minus[i] * payoff;
  }
  ++state.step;
  return outcome;
}

Trajectory run_discrete(const GameParams& params, const StrategyTable& table, const DiscreteState& initial,
                        std::uint64_t steps, std::uint64_t record_every, Rng& rng,
                        std::span<const std::size_t> tracked) {
  require(steps >= 1, "run_discrete: steps must be at least 1");
  require(record_every >= 1, "run_discrete: record_every must be at least 1");
  require(table.n_agents() == params.n_agents && table.n_states() == params.n_states,
          "run_discrete: table does not match params");

  Trajectory trajectory;
  trajectory.agents = resolve_tracked(params.n_agents, tracked);
  trajectory.gamma_rate = params.gamma_rate;

  const std::uint64_t rows = steps / record_every + 1;
  const std::uint64_t width = trajectory.agents.size();
  constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 30;
  if (width != 0 && rows > kMaxValues / width) {
    fail(ErrorCode::invalid_argument, "run_discrete: steps / record_every * agents exceeds the recording limit");
  }
  trajectory.tau.reserve(rows);
  trajectory.values.reserve(rows * width);

  DiscreteState state = initial;
  const double p = static_cast<double>(params.n_states);
  const auto record = [&] {
    const auto y = state.y(params.gamma_rate);
    trajectory.append(static_cast<double>(state.step) / p, y);
  };
  record();
  for (std::uint64_t k = 1; k <= steps; ++k) {
    discrete_step(state, table, params.gamma_rate, rng);
    if (k % record_every == 0) record();
  }
  return trajectory;
}

DriftEstimate estimate_discrete_drift(const StrategyTable& table, double gamma_rate, std::span<const double> y,
                                      std::uint64_t samples, Rng& rng) {
  require(samples >= 2, "estimate_discrete_drift: need at least two samples");
  const std::size_t n = table.n_agents();
  require(y.size() == n, "estimate_discrete_drift: y has wrong length");

  const DiscreteState base = DiscreteState::from_y(y, gamma_rate);
  const std::vector<double> y0 = base.y(gamma_rate);
  const double dt_round = gamma_rate / static_cast<double>(table.n_states());

  std::vector<double> sum(n, 0.0);
  std::vector<double> sum_sq(n, 0.0);
  DiscreteState state = base;
  for (std::uint64_t k = 0; k < samples; ++k) {
    state.u_plus = base.u_plus;
    state.u_minus = base.u_minus;
    discrete_step(state, table, gamma_rate, rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double rate = (0.5 * gamma_rate * (state.u_plus[i] - state.u_minus[i]) - y0[i]) / dt_round;
      sum[i] += rate;
      sum_sq[i] += rate * rate;
    }
  }

  DriftEstimate estimate;
  estimate.samples = samples;
  estimate.mean.resize(n);
  estimate.std_error.resize(n);
  const double m = static_cast<double>(samples);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = sum[i] / m;
    const double var = std::max(0.0, (sum_sq[i] - m * mean * mean) / (m - 1.0));
    estimate.mean[i] = mean;
    estimate.std_error[i] = std::sqrt(var / m);
  }
  return estimate;
}

AttendanceMoment estimate_attendance_moment(const StrategyTable& table, double gamma_rate,
                                            std::span<const double> y, std::uint64_t samples, Rng& rng) {
  require(samples >= 2, "estimate_attendance_moment: need at least two samples");
  require(y.size() == table.n_agents(), "estimate_attendance_moment: y has wrong length");
  const DiscreteState base = DiscreteState::from_y(y, gamma_rate);
  DiscreteState state = base;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t k = 0; k < samples; ++k) {
    state.u_plus = base.u_plus;
    state.u_minus = base.u_minus;
    const auto outcome = discrete_step(state, table, gamma_rate, rng);
    const double a2 = static_cast<double>(outcome.attendance) * outcome.attendance;
    sum += a2;
    sum_sq += a2 * a2;
  }
  const double m = static_cast<double>(samples);
  AttendanceMoment moment;
  moment.mean_square = sum / m;
  moment.std_error = std::sqrt(std::max(0.0, (sum_sq - m * moment.mean_square * moment.mean_square) / (m - 1.0)) / m);
  return moment;
}

}  // namespace mgsde
