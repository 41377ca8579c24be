#pragma once

#include <optional>

#include <Eigen/Core>

#include "magmap/batch.hpp"
#include "magmap/eigenbasis.hpp"
#include "magmap/types.hpp"

namespace magmap {

/// Kalman-filter state over the 3 + m basis coefficients.
struct SequentialState {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  std::optional<double> t_last;  ///< set by the spatio-temporal recursion
  std::size_t samples_seen = 0;
};

/// Recursive estimation of the reduced-rank scalar-potential model with
/// known hyperparameters. Static mode is exactly the batch solution
/// computed one sample at a time; spatio-temporal mode adds an
/// Ornstein-Uhlenbeck time evolution to the eigenfunction coefficients
/// while the three linear (background) coefficients stay static.
///
/// The model is immutable; states are plain values owned by the caller.
class SequentialModel {
 public:
  SequentialModel(Basis basis, const Hyperparameters& theta);

  /// mu = 0, Sigma = Lambda.
  SequentialState init() const;

  /// Kalman measurement update with one 3-vector observation, Joseph form
  /// plus re-symmetrization; O(m^2).
  void update_static(SequentialState& state, const MagneticSample& sample) const;

  /// Time update to t_new with the model's ell_time. A state without a
  /// timestamp just adopts t_new. Throws OrderingError if t_new < t_last.
  void propagate(SequentialState& state, double t_new) const;
  void propagate(SequentialState& state, double t_new, double ell_time) const;

  /// propagate to sample.t, then update_static.
  void update_spatiotemporal(SequentialState& state, const MagneticSample& sample) const;

  FieldPrediction predict_at(const SequentialState& state, const Vec3& x,
                             bool with_potential = false) const;

  CoefficientPosterior posterior(const SequentialState& state) const {
    return {state.mu, state.sigma};
  }

  const Basis& basis() const { return basis_; }
  const Hyperparameters& theta() const { return theta_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }

 private:
  Basis basis_;
  Hyperparameters theta_;
  Eigen::VectorXd lambda_;
};

}  // namespace magmap
