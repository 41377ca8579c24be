#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace magmap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Units throughout: meters, microtesla, seconds.

/// One vector magnetometer reading at a known position.
struct MagneticSample {
  double t = 0.0;  ///< seconds; ignored by the static estimators
  Vec3 x = Vec3::Zero();  ///< position [m]
  Vec3 y = Vec3::Zero();  ///< field [uT]

  bool finite() const { return std::isfinite(t) && x.allFinite() && y.allFinite(); }
};

/// Axis-aligned cuboid [c - L, c + L] on which the Laplace eigenbasis lives.
class Domain {
 public:
  Domain() = default;
  /// Throws ParameterError unless every half length is finite and > 0.
  Domain(const Vec3& center, const Vec3& half_lengths);

  static Domain centered(double l1, double l2, double l3) {
    return Domain(Vec3::Zero(), Vec3(l1, l2, l3));
  }

  const Vec3& center() const { return center_; }
  const Vec3& half_lengths() const { return half_lengths_; }

  /// Closed box test; points on the boundary are inside.
  bool contains(const Vec3& p) const {
    for (int d = 0; d < 3; ++d) {
      if (!(std::abs(p[d] - center_[d]) <= half_lengths_[d])) return false;
    }
    return true;
  }

  Vec3 to_local(const Vec3& p) const { return p - center_; }

  bool operator==(const Domain& other) const = default;

 private:
  Vec3 center_ = Vec3::Zero();
  Vec3 half_lengths_ = Vec3::Ones();
};

/// Hyperparameters of the scalar-potential model (linear + SE potential
/// kernel, optional OU time kernel on the SE part).
struct Hyperparameters {
  double sigma2_lin = 1.0;    ///< (uT)^2 m^-2, variance of the linear potential term
  double sigma2_se = 1.0;     ///< potential magnitude; field variance is sigma2_se / ell_se^2
  double ell_se = 1.0;        ///< m
  double sigma2_noise = 1.0;  ///< (uT)^2
  double ell_time = std::numeric_limits<double>::infinity();  ///< s; infinity means static

  /// Magnitude in field units, sigma2_se / ell_se^2 [(uT)^2].
  double field_magnitude() const { return sigma2_se / (ell_se * ell_se); }

  /// Throws ParameterError on any non-positive or non-finite value
  /// (ell_time may be +infinity).
  void validate() const;
};

/// Hyperparameters of one component-wise GP (constant + SE kernel on a
/// single field component), used by the baseline models.
struct ComponentHyperparameters {
  double sigma2_const = 1.0;
  double sigma2_se = 1.0;  ///< field variance [(uT)^2]
  double ell_se = 1.0;
  double sigma2_noise = 1.0;

  void validate() const;
};

/// Posterior of the field at a single location.
struct FieldPrediction {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
  std::optional<double> potential_mean;
  std::optional<double> potential_variance;
  bool outside_domain = false;
};

struct ValidationReport {
  std::size_t n = 0;
  std::size_t inside_count = 0;
  std::size_t outside_count = 0;
  std::vector<std::size_t> non_finite_rows;
  std::vector<std::size_t> outside_rows;
  std::vector<std::size_t> timestamp_regressions;  ///< row i with t[i] < t[i-1]

  bool clean() const {
    return outside_count == 0 && non_finite_rows.empty() && timestamp_regressions.empty();
  }
};

ValidationReport validate_dataset(std::span<const MagneticSample> samples, const Domain& domain);

/// Throws DomainError naming the first row outside the domain, and
/// ParameterError on non-finite rows.
void require_inside(std::span<const MagneticSample> samples, const Domain& domain);

}  // namespace magmap
