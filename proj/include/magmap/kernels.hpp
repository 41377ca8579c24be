#pragma once

#include <array>
#include <span>
#include <variant>
#include <vector>

#include "magmap/types.hpp"

namespace magmap {

// Closed-form covariance functions. All throw ParameterError on
// non-positive hyperparameters.

/// sigma2 * exp(-|x - x2|^2 / (2 ell^2))
double k_se(const Vec3& x, const Vec3& x2, double sigma2, double ell);

double k_const(double sigma2);

/// sigma2 * x^T x2
double k_lin(const Vec3& x, const Vec3& x2, double sigma2);

/// Curl-free matrix kernel, the cross-covariance of the gradients of an SE
/// potential: (sigma2/ell^2) [I - r r^T / ell^2] exp(-|r|^2 / (2 ell^2)), r = x - x2.
Mat3 k_curlfree(const Vec3& x, const Vec3& x2, double sigma2, double ell);

/// Ornstein-Uhlenbeck (exponential) kernel in time, exp(-|t - t2| / ell_time).
double k_ou(double t, double t2, double ell_time);

struct SquaredExponential {
  double sigma2;
  double ell;
  double operator()(const Vec3& x, const Vec3& x2) const { return k_se(x, x2, sigma2, ell); }
};

struct Constant {
  double sigma2;
  double operator()(const Vec3&, const Vec3&) const { return k_const(sigma2); }
};

struct Linear {
  double sigma2;
  double operator()(const Vec3& x, const Vec3& x2) const { return k_lin(x, x2, sigma2); }
};

struct CurlFree {
  double sigma2;
  double ell;
  Mat3 operator()(const Vec3& x, const Vec3& x2) const { return k_curlfree(x, x2, sigma2, ell); }
};

struct OrnsteinUhlenbeckTime {
  double ell_time;
  double operator()(double t, double t2) const { return k_ou(t, t2, ell_time); }
};

using KernelKind = std::variant<SquaredExponential, Constant, Linear, CurlFree, OrnsteinUhlenbeckTime>;

// ---------------------------------------------------------------------------
// Dense (full) GP regression. O(n^3); the exactness oracle for the
// reduced-rank estimators, not a production path.

struct DenseOptions {
  /// Maximum number of scalar observations in a single solve.
  std::size_t max_observations = 2000;
  /// When false only posterior means are computed; covariances stay zero.
  bool compute_variance = true;
};

/// Three independent GPs, each with its own constant + SE hyperparameters.
using IndependentTheta = std::array<ComponentHyperparameters, 3>;
/// Three GPs sharing one set of constant + SE hyperparameters.
struct SharedTheta {
  ComponentHyperparameters theta;
};
/// Curl-free field, sigma2_lin I3 + K_curl, i.e. the gradient of an
/// SE + linear scalar potential.
struct PotentialTheta {
  Hyperparameters theta;
};

using DenseModel = std::variant<IndependentTheta, SharedTheta, PotentialTheta>;

/// Exact GP posterior of the field at each test point. Potential
/// predictions are not produced by the dense solver.
std::vector<FieldPrediction> dense_gp_fit_predict(const DenseModel& model,
                                                  std::span<const MagneticSample> train,
                                                  std::span<const Vec3> test,
                                                  const DenseOptions& opts = {});

/// Negative log marginal likelihood of the shared-hyperparameter model:
/// (3/2) log|K + s2 I| + (1/2) tr[Y (K + s2 I)^-1 Y^T] + (3n/2) log 2pi.
double shared_loglik(std::span<const MagneticSample> train, const ComponentHyperparameters& theta,
                     const DenseOptions& opts = {});

/// Negative log marginal likelihood of a single component GP.
double component_nll(std::span<const MagneticSample> train, int component,
                     const ComponentHyperparameters& theta, const DenseOptions& opts = {});

/// Negative log marginal likelihood of the dense curl-free model.
double potential_nll(std::span<const MagneticSample> train, const Hyperparameters& theta,
                     const DenseOptions& opts = {});

}  // namespace magmap
