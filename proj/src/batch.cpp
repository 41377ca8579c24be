#include "magmap/batch.hpp"

#include <cmath>

#include "magmap/error.hpp"
#include "magmap/linalg.hpp"

namespace magmap {

namespace {

constexpr Eigen::Index kChunk = 256;

}  // namespace

FieldPrediction project_posterior(const Basis& basis, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& covariance, const Vec3& x,
                                  bool with_potential) {
  FieldPrediction out;
  const Eigen::MatrixXd h = basis.gradient_block(x);
  out.mean = h * mean;
  out.covariance = h * covariance * h.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  if (with_potential) {
    const Eigen::RowVectorXd row = basis.potential_row(x);
    out.potential_mean = row.dot(mean);
    out.potential_variance = (row * covariance).dot(row);
  }
  out.outside_domain = !basis.domain().contains(x);
  return out;
}

GramStatistics potential_gram(std::span<const MagneticSample> samples, const Basis& basis) {
  require_inside(samples, basis.domain());
  const Eigen::Index dim = basis.dim();
  GramStatistics stats;
  stats.gram = Eigen::MatrixXd::Zero(dim, dim);
  stats.cross = Eigen::MatrixXd::Zero(dim, 1);
  stats.observations = 3.0 * static_cast<double>(samples.size());
  stats.n_offset = 3;
  stats.eigenvalues = Eigen::Map<const Eigen::VectorXd>(basis.index_set().eigenvalues.data(),
                                                        static_cast<Eigen::Index>(basis.m()));

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd h(3 * kChunk, dim);
  Eigen::VectorXd y(3 * kChunk);
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index count = std::min(kChunk, n - start);
    for (Eigen::Index i = 0; i < count; ++i) {
      const auto& s = samples[static_cast<std::size_t>(start + i)];
      basis.gradient_block(s.x, h.middleRows(3 * i, 3));
      y.segment<3>(3 * i) = s.y;
    }
    const auto hc = h.topRows(3 * count);
    stats.gram.selfadjointView<Eigen::Lower>().rankUpdate(hc.transpose());
    stats.cross.noalias() += hc.transpose() * y.head(3 * count);
    stats.yty += y.head(3 * count).squaredNorm();
  }
  stats.gram.triangularView<Eigen::StrictlyUpper>() = stats.gram.transpose();
  return stats;
}

Eigen::Vector4d to_log_params(const Hyperparameters& theta) {
  return {std::log(theta.sigma2_lin), std::log(theta.sigma2_se), std::log(theta.ell_se),
          std::log(theta.sigma2_noise)};
}

Hyperparameters from_log_params(const Eigen::Vector4d& p, double ell_time) {
  Hyperparameters th;
  th.sigma2_lin = std::exp(p[kLogOffset]);
  th.sigma2_se = std::exp(p[kLogSigma2Se]);
  th.ell_se = std::exp(p[kLogEllSe]);
  th.sigma2_noise = std::exp(p[kLogNoise]);
  th.ell_time = ell_time;
  return th;
}

double nlml(const Hyperparameters& theta, const GramStatistics& stats) {
  theta.validate();
  const double v = reduced_rank_nlml(stats, to_log_params(theta));
  if (!std::isfinite(v)) throw NumericalError("marginal likelihood factorization failed");
  return v;
}

double nlml(const Hyperparameters& theta, const GramStatistics& stats, Eigen::Vector4d& grad) {
  theta.validate();
  const double v = reduced_rank_nlml(stats, to_log_params(theta), &grad);
  if (!std::isfinite(v)) throw NumericalError("marginal likelihood factorization failed");
  return v;
}

// ---------------------------------------------------------------------------

BatchModel BatchModel::fit(std::span<const MagneticSample> samples, const Domain& domain,
                           std::size_t m, const Hyperparameters& theta) {
  const Basis basis(domain, m);
  return fit(basis, potential_gram(samples, basis), theta);
}

BatchModel BatchModel::fit(const Basis& basis, const GramStatistics& stats,
                           const Hyperparameters& theta) {
  theta.validate();
  if (stats.dim() != basis.dim()) throw ParameterError("Gram statistics do not match the basis");
  BatchModel model;
  model.basis_ = basis;
  model.theta_ = theta;
  auto solve = solve_coefficients(stats, basis.lambda_diag(theta), theta.sigma2_noise);
  model.mean_ = solve.mean.col(0);
  model.information_ = std::move(solve.information);
  model.sample_count_ = static_cast<std::size_t>(stats.observations / 3.0);
  return model;
}

FieldPrediction BatchModel::predict(const Vec3& x, bool with_potential) const {
  FieldPrediction out;
  const Eigen::MatrixXd h = basis_.gradient_block(x);
  out.mean = h * mean_;
  const Eigen::MatrixXd v = information_.matrixL().solve(h.transpose());
  out.covariance = theta_.sigma2_noise * (v.transpose() * v);
  if (with_potential) {
    const Eigen::RowVectorXd row = basis_.potential_row(x);
    out.potential_mean = row.dot(mean_);
    const Eigen::VectorXd w = information_.matrixL().solve(row.transpose());
    out.potential_variance = theta_.sigma2_noise * w.squaredNorm();
  }
  out.outside_domain = !basis_.domain().contains(x);
  return out;
}

std::vector<Vec3> BatchModel::predict_means(std::span<const Vec3> points) const {
  std::vector<Vec3> out(points.size());
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd h(3 * kChunk, basis_.dim());
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index count = std::min(kChunk, n - start);
    for (Eigen::Index i = 0; i < count; ++i) {
      basis_.gradient_block(points[static_cast<std::size_t>(start + i)], h.middleRows(3 * i, 3));
    }
    const Eigen::VectorXd f = h.topRows(3 * count) * mean_;
    for (Eigen::Index i = 0; i < count; ++i) {
      out[static_cast<std::size_t>(start + i)] = f.segment<3>(3 * i);
    }
  }
  return out;
}

CoefficientPosterior BatchModel::posterior() const {
  const Eigen::Index dim = basis_.dim();
  CoefficientPosterior post;
  post.mean = mean_;
  post.covariance =
      theta_.sigma2_noise * information_.solve(Eigen::MatrixXd::Identity(dim, dim));
  symmetrize(post.covariance);
  return post;
}

// ---------------------------------------------------------------------------

std::array<BoundState, 4> classify_bounds(const Eigen::Vector4d& x, const Eigen::Vector4d& lower,
                                          const Eigen::Vector4d& upper) {
  std::array<BoundState, 4> out{};
  for (int i = 0; i < 4; ++i) {
    const double tol = 1e-9 * std::max(1.0, std::abs(upper[i] - lower[i]));
    if (x[i] <= lower[i] + tol) {
      out[static_cast<std::size_t>(i)] = BoundState::AtLower;
    } else if (x[i] >= upper[i] - tol) {
      out[static_cast<std::size_t>(i)] = BoundState::AtUpper;
    } else {
      out[static_cast<std::size_t>(i)] = BoundState::Interior;
    }
  }
  return out;
}

OptimizeResult optimize_hyperparameters(const GramStatistics& stats, const Hyperparameters& theta0,
                                        const OptimizeOptions& opts) {
  theta0.validate();
  const Eigen::Vector4d lo = to_log_params(opts.lower);
  const Eigen::Vector4d hi = to_log_params(opts.upper);
  if ((lo.array() > hi.array()).any()) throw ParameterError("optimizer lower bound above upper bound");

  const Objective objective = [&stats](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    Eigen::Vector4d g;
    const double v = reduced_rank_nlml(stats, x, grad ? &g : nullptr);
    if (grad) *grad = g;
    return v;
  };
  BoxBfgsOptions bopts;
  bopts.max_iterations = opts.max_iterations;
  bopts.gradient_tolerance = opts.gradient_tolerance;

  OptimizeResult result;
  result.details = minimize_box_bfgs(objective, to_log_params(theta0), lo, hi, bopts);
  const Eigen::Vector4d x = result.details.x;
  result.theta = from_log_params(x, theta0.ell_time);
  result.nlml = result.details.value;
  result.bounds = classify_bounds(x, lo, hi);
  return result;
}

OptimizeResult optimize_hyperparameters(std::span<const MagneticSample> samples,
                                        const Domain& domain, std::size_t m,
                                        const Hyperparameters& theta0,
                                        const OptimizeOptions& opts) {
  const Basis basis(domain, m);
  return optimize_hyperparameters(potential_gram(samples, basis), theta0, opts);
}

}  // namespace magmap
