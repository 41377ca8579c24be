#include "magmap/sequential.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "magmap/error.hpp"

namespace magmap {

namespace {

void symmetrize_in_place(Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
  }
}

}  // namespace

SequentialModel::SequentialModel(Basis basis, const Hyperparameters& theta)
    : basis_(std::move(basis)), theta_(theta) {
  theta_.validate();
  lambda_ = basis_.lambda_diag(theta_);
}

SequentialState SequentialModel::init() const {
  SequentialState s;
  s.mu = Eigen::VectorXd::Zero(basis_.dim());
  s.sigma = lambda_.asDiagonal();
  return s;
}

void SequentialModel::update_static(SequentialState& state, const MagneticSample& sample) const {
  if (!sample.x.allFinite() || !sample.y.allFinite()) {
    throw ParameterError("sample has non-finite values");
  }
  if (!basis_.domain().contains(sample.x)) {
    throw DomainError("sample " + std::to_string(state.samples_seen) + " is outside the domain");
  }
  const Eigen::MatrixXd h = basis_.gradient_block(sample.x);
  const Eigen::MatrixXd u = state.sigma * h.transpose();  // dim x 3
  Mat3 s = h * u;
  s.diagonal().array() += theta_.sigma2_noise;
  s = 0.5 * (s + s.transpose()).eval();
  const Eigen::LLT<Mat3> s_llt(s);
  if (s_llt.info() != Eigen::Success) throw NumericalError("innovation covariance not invertible");
  const Eigen::MatrixXd k = s_llt.solve(u.transpose()).transpose();  // dim x 3

  const Vec3 innovation = sample.y - h * state.mu;
  state.mu.noalias() += k * innovation;

  // Joseph form (I - K H) Sigma (I - K H)^T + K R K^T, expanded so every
  // term is a rank-3 product.
  const Eigen::MatrixXd ks = k * s;
  state.sigma.noalias() -= k * u.transpose();
  state.sigma.noalias() -= u * k.transpose();
  state.sigma.noalias() += ks * k.transpose();
  symmetrize_in_place(state.sigma);
  ++state.samples_seen;
}

void SequentialModel::propagate(SequentialState& state, double t_new) const {
  propagate(state, t_new, theta_.ell_time);
}

void SequentialModel::propagate(SequentialState& state, double t_new, double ell_time) const {
  if (!std::isfinite(t_new)) throw ParameterError("timestamp must be finite");
  if (!(ell_time > 0.0)) throw ParameterError("ell_time must be positive");
  if (!state.t_last) {
    state.t_last = t_new;
    return;
  }
  const double dt = t_new - *state.t_last;
  if (dt < 0.0) {
    throw OrderingError("timestamp " + std::to_string(t_new) + " precedes previous " +
                        std::to_string(*state.t_last));
  }
  state.t_last = t_new;
  if (dt == 0.0) return;

  const double a = std::exp(-dt / ell_time);
  const double a2 = a * a;
  const Eigen::Index m = static_cast<Eigen::Index>(basis_.m());
  state.mu.tail(m) *= a;
  state.sigma.topRightCorner(3, m) *= a;
  state.sigma.bottomLeftCorner(m, 3) *= a;
  state.sigma.bottomRightCorner(m, m) *= a2;
  state.sigma.diagonal().tail(m) += (1.0 - a2) * lambda_.tail(m);
}

void SequentialModel::update_spatiotemporal(SequentialState& state,
                                            const MagneticSample& sample) const {
  propagate(state, sample.t);
  update_static(state, sample);
}

FieldPrediction SequentialModel::predict_at(const SequentialState& state, const Vec3& x,
                                            bool with_potential) const {
  return project_posterior(basis_, state.mu, state.sigma, x, with_potential);
}

}  // namespace magmap
