#pragma once

#include <Eigen/Dense>

#include "mgsde/strategy_table.hpp"

namespace mgsde {

// P-averaged statistics entering drift and diffusion:
//   xi_theta(i) = (1/P) sum_mu xi^mu_i Theta^mu
//   xi_xi(i,j)  = (1/P) sum_mu xi^mu_i xi^mu_j
struct OverlapData {
  Eigen::VectorXd xi_theta;
  Eigen::MatrixXd xi_xi;

  std::size_t dimension() const { return static_cast<std::size_t>(xi_theta.size()); }
};

OverlapData compute_overlaps(const StrategyTable& table);

// Dense P x N copy of xi, the right-hand side for batched products.
Eigen::MatrixXd xi_matrix(const StrategyTable& table);
Eigen::VectorXd theta_vector(const StrategyTable& table);

}  // namespace mgsde
