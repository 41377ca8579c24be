#include "magmap/kernels.hpp"

#include <cmath>
#include <string>

#include "magmap/error.hpp"
#include "magmap/linalg.hpp"

namespace magmap {

namespace {

void check_scale(double sigma2, double ell) {
  if (!(sigma2 > 0.0) || !(ell > 0.0) || !std::isfinite(sigma2) || !std::isfinite(ell)) {
    throw ParameterError("kernel hyperparameters must be positive (sigma2=" +
                         std::to_string(sigma2) + ", ell=" + std::to_string(ell) + ")");
  }
}

}  // namespace

double k_se(const Vec3& x, const Vec3& x2, double sigma2, double ell) {
  check_scale(sigma2, ell);
  return sigma2 * std::exp(-(x - x2).squaredNorm() / (2.0 * ell * ell));
}

double k_const(double sigma2) {
  check_scale(sigma2, 1.0);
  return sigma2;
}

double k_lin(const Vec3& x, const Vec3& x2, double sigma2) {
  check_scale(sigma2, 1.0);
  return sigma2 * x.dot(x2);
}

Mat3 k_curlfree(const Vec3& x, const Vec3& x2, double sigma2, double ell) {
  check_scale(sigma2, ell);
  const Vec3 r = (x - x2) / ell;
  const double e = std::exp(-0.5 * r.squaredNorm());
  return (sigma2 / (ell * ell)) * e * (Mat3::Identity() - r * r.transpose());
}

double k_ou(double t, double t2, double ell_time) {
  if (!(ell_time > 0.0)) throw ParameterError("ell_time must be positive");
  return std::exp(-std::abs(t - t2) / ell_time);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_cap(std::size_t observations, const DenseOptions& opts) {
  if (observations > opts.max_observations) {
    throw ParameterError("dense GP limited to " + std::to_string(opts.max_observations) +
                         " scalar observations, got " + std::to_string(observations));
  }
}

Eigen::MatrixXd component_gram(std::span<const MagneticSample> train,
                               const ComponentHyperparameters& th) {
  const auto n = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = th.sigma2_const + k_se(train[i].x, train[j].x, th.sigma2_se, th.ell_se);
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) += th.sigma2_noise;
  }
  return k;
}

Eigen::MatrixXd potential_gram(std::span<const MagneticSample> train, const Hyperparameters& th) {
  const auto n = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd k(3 * n, 3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      Mat3 b = k_curlfree(train[i].x, train[j].x, th.sigma2_se, th.ell_se);
      b.diagonal().array() += th.sigma2_lin;
      k.block<3, 3>(3 * i, 3 * j) = b;
      k.block<3, 3>(3 * j, 3 * i) = b.transpose();
    }
  }
  k.diagonal().array() += th.sigma2_noise;
  return k;
}

Eigen::MatrixXd component_targets(std::span<const MagneticSample> train) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(train.size()), 3);
  for (std::size_t i = 0; i < train.size(); ++i) y.row(static_cast<Eigen::Index>(i)) = train[i].y;
  return y;
}

Eigen::VectorXd stacked_targets(std::span<const MagneticSample> train) {
  Eigen::VectorXd y(3 * static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) y.segment<3>(3 * static_cast<Eigen::Index>(i)) = train[i].y;
  return y;
}

// Posterior for one scalar GP per listed component sharing the same Gram.
void predict_components(std::span<const MagneticSample> train, const ComponentHyperparameters& th,
                        std::span<const int> components, std::span<const Vec3> test,
                        bool with_variance, std::vector<FieldPrediction>& out) {
  th.validate();
  const auto n = static_cast<Eigen::Index>(train.size());
  const double prior = th.sigma2_const + th.sigma2_se;
  if (n == 0) {
    for (std::size_t t = 0; t < test.size(); ++t) {
      for (int c : components) out[t].covariance(c, c) = prior;
    }
    return;
  }
  const auto llt = robust_cholesky(component_gram(train, th));
  const Eigen::MatrixXd y = component_targets(train);
  const Eigen::MatrixXd alpha = llt.solve(y);
  Eigen::VectorXd kstar(n);
  for (std::size_t t = 0; t < test.size(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      kstar[i] = th.sigma2_const + k_se(test[t], train[i].x, th.sigma2_se, th.ell_se);
    }
    double var = 0.0;
    if (with_variance) var = prior - llt.matrixL().solve(kstar).squaredNorm();
    for (int c : components) {
      out[t].mean[c] = kstar.dot(alpha.col(c));
      out[t].covariance(c, c) = var;
    }
  }
}

}  // namespace

std::vector<FieldPrediction> dense_gp_fit_predict(const DenseModel& model,
                                                  std::span<const MagneticSample> train,
                                                  std::span<const Vec3> test,
                                                  const DenseOptions& opts) {
  std::vector<FieldPrediction> out(test.size());
  if (const auto* ind = std::get_if<IndependentTheta>(&model)) {
    check_cap(train.size(), opts);
    for (int c = 0; c < 3; ++c) {
      const int comp[] = {c};
      predict_components(train, (*ind)[static_cast<std::size_t>(c)], comp, test,
                         opts.compute_variance, out);
    }
    return out;
  }
  if (const auto* sh = std::get_if<SharedTheta>(&model)) {
    check_cap(train.size(), opts);
    const int comps[] = {0, 1, 2};
    predict_components(train, sh->theta, comps, test, opts.compute_variance, out);
    return out;
  }

  const Hyperparameters& th = std::get<PotentialTheta>(model).theta;
  th.validate();
  const auto n = static_cast<Eigen::Index>(train.size());
  check_cap(3 * train.size(), opts);
  const Mat3 prior = (th.sigma2_lin + th.field_magnitude()) * Mat3::Identity();
  if (n == 0) {
    for (auto& p : out) p.covariance = prior;
    return out;
  }
  const auto llt = robust_cholesky(potential_gram(train, th));
  const Eigen::VectorXd alpha = llt.solve(stacked_targets(train));
  Eigen::MatrixXd kstar(3 * n, 3);
  for (std::size_t t = 0; t < test.size(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Mat3 b = k_curlfree(train[i].x, test[t], th.sigma2_se, th.ell_se);
      b.diagonal().array() += th.sigma2_lin;
      kstar.block<3, 3>(3 * i, 0) = b;
    }
    out[t].mean = kstar.transpose() * alpha;
    if (opts.compute_variance) {
      const Eigen::MatrixXd v = llt.matrixL().solve(kstar);
      out[t].covariance = prior - v.transpose() * v;
    }
  }
  return out;
}

double shared_loglik(std::span<const MagneticSample> train, const ComponentHyperparameters& theta,
                     const DenseOptions& opts) {
  theta.validate();
  if (train.empty()) throw ParameterError("shared_loglik requires at least one sample");
  check_cap(train.size(), opts);
  const auto n = static_cast<double>(train.size());
  const auto llt = robust_cholesky(component_gram(train, theta));
  const Eigen::MatrixXd y = component_targets(train);
  const Eigen::MatrixXd w = llt.matrixL().solve(y);
  return 1.5 * log_det(llt) + 0.5 * w.squaredNorm() + 1.5 * n * kLog2Pi;
}

double component_nll(std::span<const MagneticSample> train, int component,
                     const ComponentHyperparameters& theta, const DenseOptions& opts) {
  theta.validate();
  if (component < 0 || component > 2) throw ParameterError("component index must be 0, 1 or 2");
  if (train.empty()) throw ParameterError("component_nll requires at least one sample");
  check_cap(train.size(), opts);
  const auto n = static_cast<double>(train.size());
  const auto llt = robust_cholesky(component_gram(train, theta));
  const Eigen::VectorXd y = component_targets(train).col(component);
  const Eigen::VectorXd w = llt.matrixL().solve(y);
  return 0.5 * log_det(llt) + 0.5 * w.squaredNorm() + 0.5 * n * kLog2Pi;
}

double potential_nll(std::span<const MagneticSample> train, const Hyperparameters& theta,
                     const DenseOptions& opts) {
  theta.validate();
  if (train.empty()) throw ParameterError("potential_nll requires at least one sample");
  check_cap(3 * train.size(), opts);
  const auto llt = robust_cholesky(potential_gram(train, theta));
  const Eigen::VectorXd w = llt.matrixL().solve(stacked_targets(train));
  return 0.5 * log_det(llt) + 0.5 * w.squaredNorm() +
         1.5 * static_cast<double>(train.size()) * kLog2Pi;
}

}  // namespace magmap
