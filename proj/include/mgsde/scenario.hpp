#pragma once

#include <string>

namespace mgsde {

// producer: at least one agent with maximally asymmetric initial condition.
// finite_asymmetric: a fraction gamma_frac of agents starts at finite y_i != 0.
enum class ScenarioKind { producer, finite_asymmetric };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_from_string(const std::string& name);

// Open interval (lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool empty() const { return !(lo < hi); }
  bool contains(double x) const { return lo < x && x < hi; }
  double midpoint() const { return 0.5 * (lo + hi); }
};

}  // namespace mgsde
