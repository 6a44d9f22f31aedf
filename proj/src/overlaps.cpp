#include "mgsde/overlaps.hpp"

namespace mgsde {

Eigen::MatrixXd xi_matrix(const StrategyTable& table) {
  const auto n = static_cast<Eigen::Index>(table.n_agents());
  const auto p = static_cast<Eigen::Index>(table.n_states());
  Eigen::MatrixXd xi(p, n);
  for (Eigen::Index mu = 0; mu < p; ++mu) {
    const auto row = table.xi_row(static_cast<std::size_t>(mu));
    for (Eigen::Index i = 0; i < n; ++i) xi(mu, i) = row[static_cast<std::size_t>(i)];
  }
  return xi;
}

Eigen::VectorXd theta_vector(const StrategyTable& table) {
  const auto theta = table.theta();
  Eigen::VectorXd v(static_cast<Eigen::Index>(theta.size()));
  for (std::size_t mu = 0; mu < theta.size(); ++mu) v(static_cast<Eigen::Index>(mu)) = theta[mu];
  return v;
}

OverlapData compute_overlaps(const StrategyTable& table) {
  const Eigen::MatrixXd xi = xi_matrix(table);
  const Eigen::VectorXd theta = theta_vector(table);
  const double inv_p = 1.0 / static_cast<double>(table.n_states());
  const auto n = xi.cols();

  // Integer-valued sums are exact in double, so the Gram matrix is exactly
  // symmetric once the lower triangle is mirrored.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(xi.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();

  OverlapData data;
  data.xi_xi = gram * inv_p;
  data.xi_theta = (xi.transpose() * theta) * inv_p;
  return data;
}

}  // namespace mgsde
