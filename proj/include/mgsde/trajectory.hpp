#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace mgsde {

// Sampled path of the score differences. Time is in score-time units tau;
// the SDE time is t = gamma_rate * tau. Values are stored row-major, one row
// per sample and one column per tracked agent.
struct Trajectory {
  std::vector<std::size_t> agents;  // 0-based agent index of each column
  std::vector<double> tau;
  std::vector<double> values;
  double gamma_rate = 1.0;
  bool rescaled = false;  // values hold z = c*y instead of y
  double scale = 1.0;     // c

  std::size_t samples() const { return tau.size(); }
  std::size_t width() const { return agents.size(); }
  std::span<const double> row(std::size_t k) const { return {values.data() + k * width(), width()}; }
  double at(std::size_t k, std::size_t column) const { return values[k * width() + column]; }
  void append(double tau_now, std::span<const double> full_state);
};

// Every agent when `tracked` is empty, otherwise the given subset (checked
// against n_agents).
std::vector<std::size_t> resolve_tracked(std::size_t n_agents, std::span<const std::size_t> tracked);

// Comma separated, header row "tau,y_1,...", '.' decimal point, LF endings.
void write_csv(const Trajectory& trajectory, std::ostream& out);

}  // namespace mgsde
