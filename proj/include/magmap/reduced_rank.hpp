#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace magmap {

/// Sufficient statistics of a linear-Gaussian reduced-rank regression
/// y_c = H w_c + e, w_c ~ N(0, Lambda), e ~ N(0, s2 I), for r output
/// columns sharing one design H. Everything the marginal likelihood needs
/// once the data pass is done; no further O(n) work per evaluation.
///
/// Lambda = diag(offset variance x n_offset, S_SE(lambda_1), ..., S_SE(lambda_m)).
struct GramStatistics {
  Eigen::MatrixXd gram;         ///< H^T H, dim x dim
  Eigen::MatrixXd cross;        ///< H^T Y, dim x r
  double yty = 0.0;             ///< sum of squared targets over all columns
  double observations = 0.0;    ///< scalar observations per column (rows of H)
  int n_offset = 3;             ///< leading non-spectral entries
  Eigen::VectorXd eigenvalues;  ///< lambda_j^2, length dim - n_offset

  Eigen::Index dim() const { return gram.rows(); }
  Eigen::Index outputs() const { return cross.cols(); }
};

/// Log-parameter vector layout shared by every reduced-rank model.
enum LogParam : int { kLogOffset = 0, kLogSigma2Se = 1, kLogEllSe = 2, kLogNoise = 3 };

/// Lambda diagonal for natural parameters (offset, sigma2_se, ell_se).
Eigen::VectorXd prior_variances(const GramStatistics& stats, double offset, double sigma2_se,
                                double ell_se);

/// Negative log marginal likelihood
///   r/2 [(N - dim) log s2 + sum log Lambda + log|s2 Lambda^-1 + H^T H|]
///   + (y^T y - sum_c b_c^T Z^-1 b_c) / (2 s2) + r N/2 log 2 pi,
/// the exact value of the Gaussian model with covariance H Lambda H^T + s2 I.
/// Optionally returns the gradient with respect to the log-parameters.
/// Returns +infinity when the inner factorization fails.
double reduced_rank_nlml(const GramStatistics& stats, const Eigen::Vector4d& log_params,
                         Eigen::Vector4d* grad = nullptr);

/// Posterior over the coefficients: mean Z^-1 H^T Y and covariance s2 Z^-1,
/// Z = H^T H + s2 Lambda^-1.
struct CoefficientSolve {
  Eigen::MatrixXd mean;  ///< dim x r
  Eigen::LLT<Eigen::MatrixXd> information;  ///< factor of Z
  double sigma2_noise = 1.0;
};

CoefficientSolve solve_coefficients(const GramStatistics& stats, const Eigen::VectorXd& lambda,
                                    double sigma2_noise);

}  // namespace magmap
