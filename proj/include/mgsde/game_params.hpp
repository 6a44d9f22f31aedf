#pragma once

#include <cstddef>
#include <cstdint>

namespace mgsde {

// Transition point between the symmetric and the asymmetric phase.
inline constexpr double kAlphaCritical = 0.3374;

struct GameParams {
  std::size_t n_agents = 0;
  std::size_t n_states = 0;  // P
  double alpha = 0.0;        // P / N, recomputed from the integers
  double gamma_rate = 1.0;   // learning rate
  std::uint64_t seed = 0;

  bool asymmetric_phase_ok() const { return alpha > kAlphaCritical; }
};

// P = round(alpha * N); alpha is then recomputed as P / N so the triple is
// self-consistent. Throws on N = 0, P = 0, non-positive or non-finite alpha or
// gamma_rate.
GameParams make_game_params(std::size_t n_agents, double alpha, double gamma_rate, std::uint64_t seed);

}  // namespace mgsde
