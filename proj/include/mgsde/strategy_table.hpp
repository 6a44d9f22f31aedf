#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mgsde/game_params.hpp"

namespace mgsde {

enum class Side { plus = 0, minus = 1 };

// Random +-1 strategies a^mu_{s,i} and the derived
//   xi^mu_i    = (a^mu_{+,i} - a^mu_{-,i}) / 2  in {-1, 0, 1}
//   Theta^mu   = sum_i (a^mu_{+,i} + a^mu_{-,i}) / 2.
// Storage is mu-major: row mu holds the N agents contiguously.
class StrategyTable {
 public:
  // Builds a table from explicit actions (each entry must be +1 or -1).
  static StrategyTable from_actions(std::size_t n_agents, std::size_t n_states, std::uint64_t seed,
                                    std::vector<std::int8_t> a_plus, std::vector<std::int8_t> a_minus);

  std::size_t n_agents() const { return n_agents_; }
  std::size_t n_states() const { return n_states_; }
  std::uint64_t seed() const { return seed_; }

  int action(std::size_t mu, std::size_t i, Side s) const {
    const auto k = mu * n_agents_ + i;
    return s == Side::plus ? a_plus_[k] : a_minus_[k];
  }
  int xi(std::size_t mu, std::size_t i) const { return xi_[mu * n_agents_ + i]; }
  int theta(std::size_t mu) const { return theta_[mu]; }

  std::span<const std::int8_t> xi_row(std::size_t mu) const {
    return {xi_.data() + mu * n_agents_, n_agents_};
  }
  std::span<const std::int8_t> plus_row(std::size_t mu) const {
    return {a_plus_.data() + mu * n_agents_, n_agents_};
  }
  std::span<const std::int8_t> minus_row(std::size_t mu) const {
    return {a_minus_.data() + mu * n_agents_, n_agents_};
  }
  std::span<const std::int32_t> theta() const { return theta_; }

  // Table with every action flipped, a -> -a.
  StrategyTable negated() const;

  // True when xi and theta recomputed from the actions match the stored ones.
  bool consistent() const;

  friend bool operator==(const StrategyTable&, const StrategyTable&) = default;

 private:
  StrategyTable() = default;
  void derive();

  std::size_t n_agents_ = 0;
  std::size_t n_states_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::int8_t> a_plus_;
  std::vector<std::int8_t> a_minus_;
  std::vector<std::int8_t> xi_;
  std::vector<std::int32_t> theta_;
};

// Each action is an independent fair +-1 draw from Rng(params.seed, 0).
StrategyTable sample_strategies(const GameParams& params);

// Binary cache file, see docs/table_format.md.
void save_table(const StrategyTable& table, const std::filesystem::path& path);
StrategyTable load_table(const std::filesystem::path& path);

}  // namespace mgsde
