#include "mgsde/sde.hpp"

#include <Eigen/Eigenvalues>
#include <mutex>
#include <string>

namespace mgsde {

// ---------------------------------------------------------------------------
// drift

DriftSpec::DriftSpec(std::shared_ptr<const OverlapData> overlaps, std::size_t n_states)
    : overlaps_(std::move(overlaps)), n_states_(n_states) {
  require(overlaps_ != nullptr, "DriftSpec: overlaps missing");
  require(overlaps_->xi_xi.rows() == overlaps_->xi_theta.size() && overlaps_->xi_xi.cols() == overlaps_->xi_theta.size(),
          "DriftSpec: overlap dimensions disagree");
  require(n_states_ > 0, "DriftSpec: P must be positive");
}

Vector drift(const DriftSpec& spec, const Eigen::Ref<const Vector>& y) {
  require(static_cast<std::size_t>(y.size()) == spec.dimension(), "drift: y has length " + std::to_string(y.size()) +
                                                                      ", expected " + std::to_string(spec.dimension()));
  const auto& o = spec.overlaps();
  return o.xi_theta + o.xi_xi * y.array().tanh().matrix();
}

Matrix drift_columns(const DriftSpec& spec, const Eigen::Ref<const Matrix>& ys) {
  require(static_cast<std::size_t>(ys.rows()) == spec.dimension(), "drift_columns: row count mismatch");
  const auto& o = spec.overlaps();
  Matrix out = o.xi_xi * ys.array().tanh().matrix();
  out.colwise() += o.xi_theta;
  return out;
}

// ---------------------------------------------------------------------------
// diffusion

std::string to_string(Sigma2Model model) {
  return model == Sigma2Model::attendance_variance ? "attendance_variance" : "constant";
}

Sigma2Model sigma2_model_from_string(const std::string& name) {
  if (name == "attendance_variance") return Sigma2Model::attendance_variance;
  if (name == "constant") return Sigma2Model::constant;
  fail(ErrorCode::invalid_argument, "unknown sigma2 model '" + name + "'");
}

PsdFactor psd_factor(const Matrix& target) {
  require(target.rows() == target.cols() && target.rows() > 0, "psd_factor: matrix must be square and non-empty");
  const auto max_error = [&](const Matrix& c) { return (c * c.transpose() - target).cwiseAbs().maxCoeff(); };

  PsdFactor result;
  Eigen::LDLT<Matrix> ldlt(target);
  if (ldlt.info() == Eigen::Success) {
    const Vector d = ldlt.vectorD();
    if (d.minCoeff() > 0.0) {
      const Matrix lower = ldlt.matrixL();
      result.factor = ldlt.transpositionsP().transpose() * (lower * d.cwiseSqrt().asDiagonal());
      result.method = FactorMethod::pivoted_ldlt;
      result.reconstruction_error = max_error(result.factor);
      if (result.reconstruction_error <= 1e-8) return result;
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(target);
  if (eig.info() != Eigen::Success) fail(ErrorCode::numeric, "psd_factor: eigendecomposition failed");
  const Vector lambda = eig.eigenvalues();
  result.clipped = std::max(0.0, -lambda.minCoeff());
  result.factor = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  result.method = FactorMethod::eigen_clipped;
  result.reconstruction_error = max_error(result.factor);
  return result;
}

struct DiffusionSpec::LazyFactor {
  std::once_flag once;
  PsdFactor value;
};

DiffusionSpec::DiffusionSpec(const StrategyTable& table, std::shared_ptr<const OverlapData> overlaps,
                             double gamma_rate, Sigma2Model model)
    : overlaps_(std::move(overlaps)),
      xi_(xi_matrix(table)),
      theta_(theta_vector(table)),
      gamma_rate_(gamma_rate),
      model_(model),
      lazy_(std::make_shared<LazyFactor>()) {
  require(overlaps_ != nullptr, "DiffusionSpec: overlaps missing");
  require(overlaps_->dimension() == table.n_agents(), "DiffusionSpec: overlaps do not match the table");
  require(std::isfinite(gamma_rate) && gamma_rate > 0.0, "DiffusionSpec: gamma_rate must be positive and finite");
}

const PsdFactor& DiffusionSpec::factor() const {
  std::call_once(lazy_->once, [this] { lazy_->value = psd_factor(overlaps_->xi_xi); });
  return lazy_->value;
}

Vector sigma_squared_from_tanh(const DiffusionSpec& spec, const Eigen::Ref<const Matrix>& tanh_ys) {
  const auto columns = tanh_ys.cols();
  if (spec.model() == Sigma2Model::constant) {
    return Vector::Constant(columns, static_cast<double>(spec.dimension()));
  }
  Matrix v = spec.xi() * tanh_ys;  // P x R
  v.colwise() += spec.theta();
  const double inv_p = 1.0 / static_cast<double>(spec.n_states());
  const Vector diag = spec.overlaps().xi_xi.diagonal();
  Vector out(columns);
  for (Eigen::Index r = 0; r < columns; ++r) {
    const double mean_term = v.col(r).squaredNorm() * inv_p;
    const double var_term = (diag.array() * (1.0 - tanh_ys.col(r).array().square())).sum();
    out(r) = mean_term + var_term;
  }
  return out;
}

double sigma_squared(const DiffusionSpec& spec, const Eigen::Ref<const Vector>& y) {
  require(static_cast<std::size_t>(y.size()) == spec.dimension(), "sigma_squared: y has wrong length");
  const Matrix t = y.array().tanh().matrix();
  return sigma_squared_from_tanh(spec, t)(0);
}

Matrix diffusion_factor(const DiffusionSpec& spec, const Eigen::Ref<const Vector>& y) {
  return spec.amplitude(sigma_squared(spec, y)) * spec.factor().factor;
}

// ---------------------------------------------------------------------------
// rescaling

RescaleConstant rescale_constant(std::size_t n_agents, ScenarioKind scenario, double beta, double gamma_frac) {
  require(n_agents >= 4, "rescale_constant: need N >= 4 so that N/2 - 1 > 0");
  const double n = static_cast<double>(n_agents);
  const double h = n / 2.0 - 1.0;
  const double base = 1.0 + 2.0 / h + 2.0 / (h * h);

  RescaleConstant rc;
  rc.scenario = scenario;
  rc.r_required = n / 2.0 + 1.0;
  if (scenario == ScenarioKind::producer) {
    rc.c = base;
    rc.beta = 1.0;
    rc.gamma_frac = 1.0;
    rc.k_range = {0.0, 2.0 / h};
    rc.r = rc.c * h;
    const double k = rc.k_range.midpoint();
    rc.l_range = {2.0 * k + 2.0, 2.0 + 4.0 / h};
  } else {
    require(std::isfinite(beta) && beta > 0.0, "rescale_constant: beta must be positive");
    require(gamma_frac > 0.0 && gamma_frac <= 1.0, "rescale_constant: gamma_frac must lie in (0, 1]");
    const double bg = beta * gamma_frac;
    require(bg > 0.0 && bg <= 1.0, "rescale_constant: beta * gamma must lie in (0, 1]");
    const double inv = 1.0 / bg;
    rc.c = inv * base;
    rc.beta = beta;
    rc.gamma_frac = gamma_frac;
    rc.r = rc.c * h;
    // Closed forms of r - N/2 - 1 and 2r - N without the cancellation.
    rc.k_range = {0.0, (n / 2.0 + 1.0) * (inv - 1.0) + inv * 2.0 / h};
    const double k = rc.k_range.midpoint();
    rc.l_range = {2.0 * k + 2.0, n * (inv - 1.0) + 2.0 * inv + 2.0 * inv * 2.0 / h};
  }
  if (rc.k_range.empty() || rc.l_range.empty()) {
    fail(ErrorCode::invalid_argument, "rescale_constant: empty exponent interval, N too small for the scenario");
  }
  return rc;
}

// ---------------------------------------------------------------------------
// integrators

SdeModel::SdeModel(const GameParams& params, const StrategyTable& table, Sigma2Model model)
    : SdeModel(params, table, std::make_shared<const OverlapData>(compute_overlaps(table)), model) {}

SdeModel::SdeModel(const GameParams& params, const StrategyTable& table, std::shared_ptr<const OverlapData> overlaps,
                   Sigma2Model model)
    : params_(params), drift_(overlaps, params.n_states), diffusion_(table, overlaps, params.gamma_rate, model) {
  require(table.n_agents() == params.n_agents && table.n_states() == params.n_states,
          "SdeModel: table does not match params");
}

namespace {

std::uint64_t step_count(double dt, double t_end) {
  require(dt > 0.0 && std::isfinite(dt), "integration: dt must be positive");
  require(t_end >= 0.0 && std::isfinite(t_end), "integration: t_end must be non-negative");
  const double steps = std::round(t_end / dt);
  require(steps < 1e12, "integration: too many steps");
  return static_cast<std::uint64_t>(steps);
}

}  // namespace

Trajectory integrate_sde(const SdeModel& model, std::span<const double> y0, const IntegrationSettings& settings,
                         Rng& rng) {
  const std::size_t n = model.dimension();
  require(y0.size() == n, "integrate_sde: y0 has wrong length");
  require(settings.record_every >= 1, "integrate_sde: record_every must be at least 1");
  const double c = settings.rescaled ? settings.scale : 1.0;
  require(std::isfinite(c) && c > 0.0, "integrate_sde: scale must be positive");
  const std::uint64_t steps = step_count(settings.dt, settings.t_end);

  const auto& drift_spec = model.drift_spec();
  const auto& diffusion_spec = model.diffusion_spec();
  const Matrix& factor = diffusion_spec.factor().factor;

  Trajectory trajectory;
  trajectory.agents = resolve_tracked(n, settings.tracked);
  trajectory.gamma_rate = model.params().gamma_rate;
  trajectory.rescaled = settings.rescaled;
  trajectory.scale = c;

  const auto drift_fn = [&](const Vector& z) -> Vector { return c * drift(drift_spec, z / c); };
  const auto diffuse_fn = [&](const Vector& z, const Vector& g) -> Vector {
    const double amp = diffusion_spec.amplitude(sigma_squared(diffusion_spec, z / c));
    return (c * amp) * (factor * g);
  };

  Vector state(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) state(static_cast<Eigen::Index>(i)) = c * y0[i];

  const double gamma = model.params().gamma_rate;
  trajectory.append(0.0, {state.data(), n});
  for (std::uint64_t k = 1; k <= steps; ++k) {
    try {
      state = em_step(state, settings.dt, drift_fn, diffuse_fn, rng);
    } catch (const Error& e) {
      fail(e.code(), std::string(e.what()) + " at step " + std::to_string(k) + " (t = " +
                         std::to_string(static_cast<double>(k) * settings.dt) + ")");
    }
    if (k % settings.record_every == 0) {
      trajectory.append(static_cast<double>(k) * settings.dt / gamma, {state.data(), n});
    }
  }
  return trajectory;
}

EnsembleRecording integrate_ensemble(const SdeModel& model, std::span<const double> y0,
                                     const EnsembleSettings& settings) {
  const std::size_t n = model.dimension();
  require(y0.size() == n, "integrate_ensemble: y0 has wrong length");
  require(settings.replicas >= 1, "integrate_ensemble: need at least one replica");
  require(settings.record_every >= 1, "integrate_ensemble: record_every must be at least 1");
  require(settings.noise_refinement >= 1, "integrate_ensemble: noise_refinement must be at least 1");
  const std::uint64_t steps = step_count(settings.dt, settings.t_end);

  const auto& drift_spec = model.drift_spec();
  const auto& diffusion_spec = model.diffusion_spec();
  const auto& overlaps = drift_spec.overlaps();
  const Matrix& factor = diffusion_spec.factor().factor;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(settings.replicas);

  EnsembleRecording rec;
  rec.agents = resolve_tracked(n, settings.tracked);
  rec.replicas = settings.replicas;
  rec.gamma_rate = model.params().gamma_rate;
  const std::uint64_t n_samples = steps / settings.record_every + 1;
  rec.t.reserve(n_samples);
  rec.values.reserve(n_samples * settings.replicas * rec.agents.size());

  std::vector<Rng> streams;
  streams.reserve(settings.replicas);
  for (std::size_t r = 0; r < settings.replicas; ++r) streams.emplace_back(settings.noise_seed, r);

  Matrix y(rows, cols);
  for (Eigen::Index r = 0; r < cols; ++r) {
    for (Eigen::Index i = 0; i < rows; ++i) y(i, r) = y0[static_cast<std::size_t>(i)];
  }

  const auto record = [&](double t_now) {
    rec.t.push_back(t_now);
    for (Eigen::Index r = 0; r < cols; ++r) {
      for (const auto agent : rec.agents) rec.values.push_back(y(static_cast<Eigen::Index>(agent), r));
    }
  };

  Matrix tanh_y(rows, cols);
  Matrix b(rows, cols);
  Matrix g(rows, cols);
  Matrix noise(rows, cols);
  const double sqrt_dt = std::sqrt(settings.dt);
  const double inv_sqrt_refine = 1.0 / std::sqrt(static_cast<double>(settings.noise_refinement));

  record(0.0);
  for (std::uint64_t k = 1; k <= steps; ++k) {
    tanh_y = y.array().tanh();
    b.noalias() = overlaps.xi_xi * tanh_y;
    b.colwise() += overlaps.xi_theta;
    const Vector sigma2 = sigma_squared_from_tanh(diffusion_spec, tanh_y);

    g.setZero();
    for (Eigen::Index r = 0; r < cols; ++r) {
      auto& rng = streams[static_cast<std::size_t>(r)];
      for (std::uint32_t sub = 0; sub < settings.noise_refinement; ++sub) {
        for (Eigen::Index i = 0; i < rows; ++i) g(i, r) += rng.normal();
      }
    }
    noise.noalias() = factor * g;
    for (Eigen::Index r = 0; r < cols; ++r) {
      const double amp = diffusion_spec.amplitude(sigma2(r)) * sqrt_dt * inv_sqrt_refine;
      y.col(r) += amp * noise.col(r) - settings.dt * b.col(r);
    }
    if (!y.allFinite()) {
      fail(ErrorCode::numeric, "integrate_ensemble: state became non-finite at step " + std::to_string(k));
    }
    if (k % settings.record_every == 0) record(static_cast<double>(k) * settings.dt);
  }
  return rec;
}

}  // namespace mgsde
