#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "mgsde/error.hpp"
#include "mgsde/game_params.hpp"
#include "mgsde/overlaps.hpp"
#include "mgsde/rng.hpp"
#include "mgsde/scenario.hpp"
#include "mgsde/strategy_table.hpp"
#include "mgsde/trajectory.hpp"

namespace mgsde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Drift b^N(y)_i = xi_theta(i) + sum_j xi_xi(i,j) tanh(y_j). The SDE moves
// along -b^N.

class DriftSpec {
 public:
  DriftSpec(std::shared_ptr<const OverlapData> overlaps, std::size_t n_states);

  const OverlapData& overlaps() const { return *overlaps_; }
  std::size_t dimension() const { return overlaps_->dimension(); }
  std::size_t n_states() const { return n_states_; }
  double alpha() const { return static_cast<double>(n_states_) / static_cast<double>(dimension()); }

 private:
  std::shared_ptr<const OverlapData> overlaps_;
  std::size_t n_states_;
};

Vector drift(const DriftSpec& spec, const Eigen::Ref<const Vector>& y);
// Column-wise drift of a batch of states (N x R).
Matrix drift_columns(const DriftSpec& spec, const Eigen::Ref<const Matrix>& ys);

// ---------------------------------------------------------------------------
// Diffusion: (A A^T)_{ij} = G sigma^2(y) / (alpha N) * xi_xi(i,j).

enum class Sigma2Model {
  // sigma^2(y) = (1/P) sum_mu [(Theta^mu + sum_i xi^mu_i tanh y_i)^2
  //                            + sum_i (xi^mu_i)^2 (1 - tanh^2 y_i)]
  attendance_variance,
  // sigma^2 = N, the upper-bound proxy
  constant,
};

std::string to_string(Sigma2Model model);
Sigma2Model sigma2_model_from_string(const std::string& name);

enum class FactorMethod { pivoted_ldlt, eigen_clipped };

struct PsdFactor {
  Matrix factor;  // C with C C^T = target up to roundoff
  FactorMethod method = FactorMethod::pivoted_ldlt;
  double clipped = 0.0;               // largest negative eigenvalue magnitude set to zero
  double reconstruction_error = 0.0;  // max |C C^T - target|

  static constexpr double kClipWarning = 1e-6;
  bool badly_conditioned() const { return clipped > kClipWarning; }
};

// Square-root factor of a symmetric PSD matrix. Tries a pivoted LDL^T
// (accepted only with a strictly positive D); otherwise falls back to an
// eigendecomposition with negative eigenvalues clipped at zero.
PsdFactor psd_factor(const Matrix& target);

class DiffusionSpec {
 public:
  DiffusionSpec(const StrategyTable& table, std::shared_ptr<const OverlapData> overlaps, double gamma_rate,
                Sigma2Model model);

  std::size_t dimension() const { return overlaps_->dimension(); }
  std::size_t n_states() const { return static_cast<std::size_t>(xi_.rows()); }
  double alpha() const { return static_cast<double>(n_states()) / static_cast<double>(dimension()); }
  double gamma_rate() const { return gamma_rate_; }
  Sigma2Model model() const { return model_; }
  const OverlapData& overlaps() const { return *overlaps_; }
  const Matrix& xi() const { return xi_; }        // P x N
  const Vector& theta() const { return theta_; }  // P

  // Factor of xi_xi, computed on first use and immutable afterwards.
  const PsdFactor& factor() const;

  // sqrt(G sigma^2 / (alpha N)) for a given sigma^2.
  double amplitude(double sigma2) const {
    return std::sqrt(gamma_rate_ * sigma2 / (alpha() * static_cast<double>(dimension())));
  }

 private:
  struct LazyFactor;

  std::shared_ptr<const OverlapData> overlaps_;
  Matrix xi_;
  Vector theta_;
  double gamma_rate_;
  Sigma2Model model_;
  std::shared_ptr<LazyFactor> lazy_;
};

double sigma_squared(const DiffusionSpec& spec, const Eigen::Ref<const Vector>& y);
// sigma^2 for each column of a batch; `tanh_ys` already holds tanh(y).
Vector sigma_squared_from_tanh(const DiffusionSpec& spec, const Eigen::Ref<const Matrix>& tanh_ys);

// A(y) = sqrt(G sigma^2(y) / (alpha N)) C.
Matrix diffusion_factor(const DiffusionSpec& spec, const Eigen::Ref<const Vector>& y);

// ---------------------------------------------------------------------------
// Euler-Maruyama step y' = y - b(y) dt + A(y) sqrt(dt) g, g ~ N(0, I).
// `drift_fn(y)` returns b(y); `diffuse_fn(y, g)` returns A(y) g. Throws
// ErrorCode::numeric if the new state is not finite.

template <typename DriftFn, typename DiffuseFn>
Vector em_step(const Vector& y, double dt, DriftFn&& drift_fn, DiffuseFn&& diffuse_fn, Rng& rng) {
  require(dt > 0.0, "em_step: dt must be positive");
  Vector g(y.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
  Vector next = y - dt * drift_fn(y) + std::sqrt(dt) * diffuse_fn(y, g);
  if (!next.allFinite()) fail(ErrorCode::numeric, "em_step: state became non-finite");
  return next;
}

// ---------------------------------------------------------------------------
// Rescaling z = c y.

struct RescaleConstant {
  double c = 1.0;
  ScenarioKind scenario = ScenarioKind::producer;
  double beta = 1.0;
  double gamma_frac = 1.0;
  double r = 0.0;           // c (N/2 - 1)
  double r_required = 0.0;  // N/2 + 1
  Interval k_range;
  Interval l_range;  // evaluated at k = k_range.midpoint()
};

// producer:          c = 1 + 2/h + 2/h^2,            h = N/2 - 1
// finite_asymmetric: c = (1 + 2/h + 2/h^2) / (beta gamma),  0 < beta gamma <= 1
// k_range = (0, r - N/2 - 1), l_range = (2k + 2, 2r - N), r = c h.
RescaleConstant rescale_constant(std::size_t n_agents, ScenarioKind scenario, double beta = 1.0,
                                 double gamma_frac = 1.0);

// ---------------------------------------------------------------------------
// Model bundle and integrators.

class SdeModel {
 public:
  SdeModel(const GameParams& params, const StrategyTable& table, Sigma2Model model = Sigma2Model::attendance_variance);
  // Reuses precomputed overlaps of `table`.
  SdeModel(const GameParams& params, const StrategyTable& table, std::shared_ptr<const OverlapData> overlaps,
           Sigma2Model model = Sigma2Model::attendance_variance);

  const GameParams& params() const { return params_; }
  const DriftSpec& drift_spec() const { return drift_; }
  const DiffusionSpec& diffusion_spec() const { return diffusion_; }
  std::size_t dimension() const { return params_.n_agents; }

 private:
  GameParams params_;
  DriftSpec drift_;
  DiffusionSpec diffusion_;
};

struct IntegrationSettings {
  double dt = 1e-2;
  double t_end = 1.0;  // SDE time
  std::uint64_t record_every = 1;
  bool rescaled = false;  // integrate z = c y
  double scale = 1.0;     // c
  std::vector<std::size_t> tracked;
};

// Single path of dy = -b dt + A dW (or of dz = -c b(z/c) dt + c A(z/c) dW
// when rescaled; then y0 is still the y-space initial condition and the
// trajectory holds z).
Trajectory integrate_sde(const SdeModel& model, std::span<const double> y0, const IntegrationSettings& settings,
                         Rng& rng);

struct EnsembleSettings {
  double dt = 1e-2;
  double t_end = 1.0;
  std::uint64_t record_every = 10;
  std::size_t replicas = 1;
  std::uint64_t noise_seed = 0;
  // Each step of size dt consumes `noise_refinement` successive N(0, I)
  // draws combined as their normalised sum. A run with dt and refinement 2
  // sees the same Brownian path as a run with dt/2 and refinement 1.
  std::uint32_t noise_refinement = 1;
  std::vector<std::size_t> tracked;
};

// Recorded values of an ensemble of replicas that share table and initial
// condition and differ only in their noise stream (noise_seed, replica).
struct EnsembleRecording {
  std::vector<std::size_t> agents;
  std::vector<double> t;  // SDE time of each sample
  std::size_t replicas = 0;
  std::vector<double> values;  // [sample][replica][column]
  double gamma_rate = 1.0;

  std::size_t samples() const { return t.size(); }
  std::size_t width() const { return agents.size(); }
  double at(std::size_t sample, std::size_t replica, std::size_t column) const {
    return values[(sample * replicas + replica) * width() + column];
  }
};

EnsembleRecording integrate_ensemble(const SdeModel& model, std::span<const double> y0,
                                     const EnsembleSettings& settings);

}  // namespace mgsde
