#include "mgsde/game_params.hpp"

#include <cmath>
#include <string>

#include "mgsde/error.hpp"

namespace mgsde {

GameParams make_game_params(std::size_t n_agents, double alpha, double gamma_rate, std::uint64_t seed) {
  require(n_agents > 0, "n_agents must be positive");
  require(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive and finite");
  require(std::isfinite(gamma_rate) && gamma_rate > 0.0, "gamma_rate must be positive and finite");
  const double p = std::round(alpha * static_cast<double>(n_agents));
  require(p >= 1.0, "alpha * n_agents rounds to zero information states");
  require(p < 1e9, "alpha * n_agents is too large");

  GameParams params;
  params.n_agents = n_agents;
  params.n_states = static_cast<std::size_t>(p);
  params.alpha = static_cast<double>(params.n_states) / static_cast<double>(n_agents);
  params.gamma_rate = gamma_rate;
  params.seed = seed;
  return params;
}

}  // namespace mgsde
