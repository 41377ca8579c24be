#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "magmap/eigenbasis.hpp"
#include "magmap/optimizer.hpp"
#include "magmap/reduced_rank.hpp"
#include "magmap/types.hpp"

namespace magmap {

// Component-wise baselines: every field component is its own scalar GP
// with a constant + SE kernel, expanded in [1, phi_1, ..., phi_m] on the
// same Laplace eigenbasis as the scalar-potential model. The components
// either have independent hyperparameters or share one set.

struct ComponentGram {
  GramStatistics shared;  ///< three output columns, n observations each
  std::array<double, 3> yty{};

  /// Statistics of a single component, for independent learning.
  GramStatistics component(int c) const;
};

ComponentGram component_gram(std::span<const MagneticSample> samples, const Basis& basis);

Eigen::Vector4d to_log_params(const ComponentHyperparameters& theta);
ComponentHyperparameters component_from_log_params(const Eigen::Vector4d& p);

struct ComponentOptimizeOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double lower = 1e-6;
  double upper = 1e6;
};

/// Joint learning of one hyperparameter set for all three components.
ComponentHyperparameters optimize_shared(const ComponentGram& gram,
                                         const ComponentHyperparameters& theta0,
                                         const ComponentOptimizeOptions& opts = {});
/// Separate learning per component.
std::array<ComponentHyperparameters, 3> optimize_independent(
    const ComponentGram& gram, const std::array<ComponentHyperparameters, 3>& theta0,
    const ComponentOptimizeOptions& opts = {});

class ComponentModel {
 public:
  static ComponentModel fit(const Basis& basis, const ComponentGram& gram,
                            const std::array<ComponentHyperparameters, 3>& theta);
  static ComponentModel fit_shared(const Basis& basis, const ComponentGram& gram,
                                   const ComponentHyperparameters& theta) {
    return fit(basis, gram, {theta, theta, theta});
  }

  /// Diagonal covariance: the components are a-posteriori independent.
  FieldPrediction predict(const Vec3& x) const;
  std::vector<Vec3> predict_means(std::span<const Vec3> points) const;

  const std::array<ComponentHyperparameters, 3>& theta() const { return theta_; }

 private:
  Basis basis_;
  std::array<ComponentHyperparameters, 3> theta_{};
  Eigen::MatrixXd mean_;  // (1 + m) x 3
  std::array<Eigen::LLT<Eigen::MatrixXd>, 3> information_;
};

}  // namespace magmap
