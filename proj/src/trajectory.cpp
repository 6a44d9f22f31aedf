#include "mgsde/trajectory.hpp"

#include <cstdio>
#include <ostream>
#include <string>

#include "mgsde/error.hpp"

namespace mgsde {

void Trajectory::append(double tau_now, std::span<const double> full_state) {
  tau.push_back(tau_now);
  for (const auto agent : agents) values.push_back(full_state[agent]);
}

std::vector<std::size_t> resolve_tracked(std::size_t n_agents, std::span<const std::size_t> tracked) {
  std::vector<std::size_t> agents;
  if (tracked.empty()) {
    agents.resize(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) agents[i] = i;
    return agents;
  }
  for (const auto agent : tracked) {
    require(agent < n_agents, "tracked agent " + std::to_string(agent) + " out of range");
    agents.push_back(agent);
  }
  return agents;
}

void write_csv(const Trajectory& trajectory, std::ostream& out) {
  const char* prefix = trajectory.rescaled ? "z_" : "y_";
  out << "tau";
  for (const auto agent : trajectory.agents) out << ',' << prefix << (agent + 1);
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < trajectory.samples(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", trajectory.tau[k]);
    out << buf;
    for (const double v : trajectory.row(k)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace mgsde
