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

/// Coefficient mean and covariance over the 3 + m basis weights. Field
/// predictions are H(x) mean and H(x) cov H(x)^T with H the gradient block.
///
/// Sign convention: measurements are modelled as +grad(potential), so the
/// potential reported by predictions is the negative magnetic potential.
struct CoefficientPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

FieldPrediction project_posterior(const Basis& basis, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& covariance, const Vec3& x,
                                  bool with_potential = false);
inline FieldPrediction project_posterior(const Basis& basis, const CoefficientPosterior& post,
                                         const Vec3& x, bool with_potential = false) {
  return project_posterior(basis, post.mean, post.covariance, x, with_potential);
}

/// One pass over the data: H^T H, H^T y and y^T y for the stacked gradient
/// design (3 rows per sample). Throws DomainError for samples outside the
/// basis domain.
GramStatistics potential_gram(std::span<const MagneticSample> samples, const Basis& basis);

Eigen::Vector4d to_log_params(const Hyperparameters& theta);
Hyperparameters from_log_params(const Eigen::Vector4d& log_params,
                                double ell_time = std::numeric_limits<double>::infinity());

/// Approximate negative log marginal likelihood of the scalar-potential
/// model from cached Gram statistics. Cost O(m^3), independent of n.
double nlml(const Hyperparameters& theta, const GramStatistics& stats);
/// Same, with the gradient with respect to (log sigma2_lin, log sigma2_se,
/// log ell_se, log sigma2_noise).
double nlml(const Hyperparameters& theta, const GramStatistics& stats, Eigen::Vector4d& grad);

/// Reduced-rank batch posterior of the scalar-potential model.
class BatchModel {
 public:
  static BatchModel fit(std::span<const MagneticSample> samples, const Domain& domain,
                        std::size_t m, const Hyperparameters& theta);
  static BatchModel fit(const Basis& basis, const GramStatistics& stats,
                        const Hyperparameters& theta);

  /// Mean, 3x3 covariance and optionally the potential at x. Points
  /// outside the domain are evaluated but flagged.
  FieldPrediction predict(const Vec3& x, bool with_potential = false) const;
  /// Posterior mean field only, for many points.
  std::vector<Vec3> predict_means(std::span<const Vec3> points) const;

  const Basis& basis() const { return basis_; }
  const Hyperparameters& theta() const { return theta_; }
  const Eigen::VectorXd& coefficients() const { return mean_; }
  /// Mean weights of the three linear basis functions, i.e. the constant
  /// background field in uT.
  Vec3 linear_coefficients() const { return mean_.head<3>(); }
  /// Explicit s2 (H^T H + s2 Lambda^-1)^-1.
  CoefficientPosterior posterior() const;
  std::size_t sample_count() const { return sample_count_; }

 private:
  Basis basis_;
  Hyperparameters theta_;
  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> information_;
  std::size_t sample_count_ = 0;
};

struct OptimizeOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  /// Box bounds in natural units; ell_time is ignored.
  Hyperparameters lower{1e-6, 1e-6, 1e-6, 1e-6};
  Hyperparameters upper{1e6, 1e6, 1e6, 1e6};
};

enum class BoundState { Interior, AtLower, AtUpper };

struct OptimizeResult {
  Hyperparameters theta;
  double nlml = 0.0;
  BoxBfgsResult details;
  /// Order: sigma2_lin, sigma2_se, ell_se, sigma2_noise.
  std::array<BoundState, 4> bounds{};

  bool boundary_clipped(int which) const { return bounds[static_cast<std::size_t>(which)] != BoundState::Interior; }
  bool any_clipped() const {
    for (auto b : bounds) {
      if (b != BoundState::Interior) return true;
    }
    return false;
  }
};

/// Maximizes the approximate marginal likelihood over log-parameters with
/// a box-constrained BFGS. The Gram statistics are computed once.
OptimizeResult optimize_hyperparameters(const GramStatistics& stats, const Hyperparameters& theta0,
                                        const OptimizeOptions& opts = {});
OptimizeResult optimize_hyperparameters(std::span<const MagneticSample> samples,
                                        const Domain& domain, std::size_t m,
                                        const Hyperparameters& theta0,
                                        const OptimizeOptions& opts = {});

/// Bound classification of log-space optimizer output.
std::array<BoundState, 4> classify_bounds(const Eigen::Vector4d& x, const Eigen::Vector4d& lower,
                                          const Eigen::Vector4d& upper);

}  // namespace magmap
