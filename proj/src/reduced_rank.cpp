#include "magmap/reduced_rank.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "magmap/error.hpp"
#include "magmap/linalg.hpp"

namespace magmap {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
// Spectral weights below this are clamped; the mode has then effectively
// dropped out of the model and its gradient contribution is zeroed.
constexpr double kLambdaFloor = 1e-200;

}  // namespace

Eigen::VectorXd prior_variances(const GramStatistics& stats, double offset, double sigma2_se,
                                double ell_se) {
  const Eigen::Index dim = stats.dim();
  Eigen::VectorXd lam(dim);
  lam.head(stats.n_offset).setConstant(offset);
  const double scale = sigma2_se * std::pow(2.0 * std::numbers::pi * ell_se * ell_se, 1.5);
  for (Eigen::Index j = 0; j < stats.eigenvalues.size(); ++j) {
    lam[stats.n_offset + j] = scale * std::exp(-0.5 * stats.eigenvalues[j] * ell_se * ell_se);
  }
  return lam;
}

double reduced_rank_nlml(const GramStatistics& stats, const Eigen::Vector4d& p,
                         Eigen::Vector4d* grad) {
  if (!p.allFinite()) return std::numeric_limits<double>::infinity();
  const Eigen::Index dim = stats.dim();
  const double r = static_cast<double>(stats.outputs());
  const double nobs = stats.observations;
  const double s2 = std::exp(p[kLogNoise]);
  const double ell = std::exp(p[kLogEllSe]);

  Eigen::VectorXd lam =
      prior_variances(stats, std::exp(p[kLogOffset]), std::exp(p[kLogSigma2Se]), ell);
  Eigen::Array<bool, Eigen::Dynamic, 1> clamped = lam.array() < kLambdaFloor;
  lam = lam.cwiseMax(kLambdaFloor);
  if (!lam.allFinite() || !(s2 > 0.0) || !std::isfinite(s2)) {
    return std::numeric_limits<double>::infinity();
  }

  Eigen::MatrixXd z = stats.gram;
  z.diagonal().array() += s2 / lam.array();
  Eigen::LLT<Eigen::MatrixXd> llt(z);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd alpha = llt.solve(stats.cross);
  const double q = (stats.cross.array() * alpha.array()).sum();
  const double resid = stats.yty - q;
  const double value = 0.5 * r *
                           ((nobs - static_cast<double>(dim)) * std::log(s2) +
                            lam.array().log().sum() + log_det(llt)) +
                       0.5 * resid / s2 + 0.5 * r * nobs * kLog2Pi;

  if (grad) {
    // diag(Z^-1) from the columns of L^-1.
    const Eigen::MatrixXd linv =
        llt.matrixL().solve(Eigen::MatrixXd::Identity(dim, dim));
    const Eigen::VectorXd zinv_diag = linv.colwise().squaredNorm().transpose();
    const Eigen::VectorXd alpha_sq = alpha.rowwise().squaredNorm();
    const Eigen::ArrayXd inv_lam = lam.array().inverse();

    (*grad)[kLogNoise] = 0.5 * r * (nobs - static_cast<double>(dim)) +
                         0.5 * r * s2 * (zinv_diag.array() * inv_lam).sum() - 0.5 * resid / s2 +
                         0.5 * (alpha_sq.array() * inv_lam).sum();

    // Per-entry contribution of d log Lambda_j.
    const Eigen::ArrayXd w = 0.5 * r - 0.5 * r * s2 * zinv_diag.array() * inv_lam -
                             0.5 * alpha_sq.array() * inv_lam;
    Eigen::ArrayXd g_offset = Eigen::ArrayXd::Zero(dim);
    Eigen::ArrayXd g_sigma = Eigen::ArrayXd::Zero(dim);
    Eigen::ArrayXd g_ell = Eigen::ArrayXd::Zero(dim);
    g_offset.head(stats.n_offset) = 1.0;
    for (Eigen::Index j = 0; j < stats.eigenvalues.size(); ++j) {
      const Eigen::Index k = stats.n_offset + j;
      g_sigma[k] = 1.0;
      g_ell[k] = 3.0 - stats.eigenvalues[j] * ell * ell;
    }
    for (Eigen::Index k = 0; k < dim; ++k) {
      if (clamped[k]) {
        g_offset[k] = g_sigma[k] = g_ell[k] = 0.0;
      }
    }
    (*grad)[kLogOffset] = (w * g_offset).sum();
    (*grad)[kLogSigma2Se] = (w * g_sigma).sum();
    (*grad)[kLogEllSe] = (w * g_ell).sum();
  }
  return value;
}

CoefficientSolve solve_coefficients(const GramStatistics& stats, const Eigen::VectorXd& lambda,
                                    double sigma2_noise) {
  if (lambda.size() != stats.dim()) throw ParameterError("prior variance length mismatch");
  Eigen::MatrixXd z = stats.gram;
  z.diagonal().array() += sigma2_noise / lambda.array().max(kLambdaFloor);
  CoefficientSolve out;
  out.information = robust_cholesky(z);
  out.mean = out.information.solve(stats.cross);
  out.sigma2_noise = sigma2_noise;
  return out;
}

}  // namespace magmap
