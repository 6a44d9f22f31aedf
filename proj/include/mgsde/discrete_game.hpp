#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgsde/game_params.hpp"
#include "mgsde/rng.hpp"
#include "mgsde/strategy_table.hpp"
#include "mgsde/trajectory.hpp"

namespace mgsde {

// Probability that an agent plays s = +1, the logit rule
// e^{G U+} / (e^{G U+} + e^{G U-}) written as a logistic of G (U+ - U-) so
// that it cannot overflow.
double choice_probability(double u_plus, double u_minus, double gamma_rate);

struct DiscreteState {
  std::vector<double> u_plus;
  std::vector<double> u_minus;
  std::uint64_t step = 0;

  std::size_t n_agents() const { return u_plus.size(); }

  // y_i = G (U+ - U-) / 2
  std::vector<double> y(double gamma_rate) const;
  // U+ = y / G, U- = -y / G
  static DiscreteState from_y(std::span<const double> y, double gamma_rate);
};

struct StepOutcome {
  std::size_t mu = 0;
  int attendance = 0;  // A(t) = sum_i a^mu_{s_i, i}
};

// One round of the game: draw mu uniformly, every agent draws s_i with the
// logit rule, then both scores of every agent move by
//   U_{s,i} <- U_{s,i} - a^mu_{s,i} A / P.
// With this normalisation one round advances score time tau by 1/P and the
// SDE time t by G/P.
StepOutcome discrete_step(DiscreteState& state, const StrategyTable& table, double gamma_rate, Rng& rng);

// Runs `steps` rounds from `initial`, sampling y every `record_every` rounds
// (plus the initial state). Time axis in tau = steps / P. `tracked` selects
// the agents written to the trajectory (empty = all).
Trajectory run_discrete(const GameParams& params, const StrategyTable& table, const DiscreteState& initial,
                        std::uint64_t steps, std::uint64_t record_every, Rng& rng,
                        std::span<const std::size_t> tracked = {});

struct DriftEstimate {
  std::vector<double> mean;        // mean increment of y_i per unit SDE time
  std::vector<double> std_error;   // Monte Carlo standard error of mean
  std::uint64_t samples = 0;
};

// Holds y fixed and repeats discrete_step from it `samples` times; each
// increment is normalised by the SDE time of one round (G/P). The expected
// value is -b^N(y).
DriftEstimate estimate_discrete_drift(const StrategyTable& table, double gamma_rate, std::span<const double> y,
                                      std::uint64_t samples, Rng& rng);

// Mean of A^2 at fixed y over `samples` rounds, with its standard error; the
// Monte Carlo counterpart of sigma^2(y).
struct AttendanceMoment {
  double mean_square = 0.0;
  double std_error = 0.0;
};
AttendanceMoment estimate_attendance_moment(const StrategyTable& table, double gamma_rate,
                                            std::span<const double> y, std::uint64_t samples, Rng& rng);

}  // namespace mgsde
