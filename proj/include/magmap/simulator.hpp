#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "magmap/eigenbasis.hpp"
#include "magmap/types.hpp"

namespace magmap {

/// Deterministic engine for a (seed, stream) pair, so that independent
/// random quantities of one experiment never share a sequence.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

/// A draw from the reduced-rank scalar-potential prior: the field at x is
/// grad Phi(x) w with w ~ N(0, Lambda), hence exactly curl-free.
class SyntheticField {
 public:
  SyntheticField(Basis basis, Eigen::VectorXd weights, std::uint64_t seed);

  Vec3 field(const Vec3& x) const;
  double potential(const Vec3& x) const;
  std::vector<Vec3> fields(std::span<const Vec3> points) const;

  const Basis& basis() const { return basis_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Basis basis_;
  Eigen::VectorXd weights_;
  std::uint64_t seed_ = 0;
};

SyntheticField sample_field(const Domain& domain, const Hyperparameters& theta, std::size_t m_sim,
                            std::uint64_t seed);

/// A time-dependent ground truth, f(t, x).
using FieldFunction = std::function<Vec3(double t, const Vec3& x)>;

struct Waypoint {
  double t = 0.0;
  Vec3 x = Vec3::Zero();
};

/// Samples a piecewise-linear path at `rate` Hz from the first waypoint
/// time: ceil(duration * rate) + 1 samples, positions held at the last
/// waypoint past its time. y = f(t, x) + N(0, sigma_noise^2 I).
/// Throws DomainError for a waypoint outside the domain and
/// ParameterError for non-increasing waypoint times.
std::vector<MagneticSample> simulate_trajectory(const FieldFunction& field, const Domain& domain,
                                                std::span<const Waypoint> path, double rate,
                                                double sigma_noise, std::uint64_t seed);

/// A localized, curl-free change of the field switched on at t_on: the
/// gradient of (peak . r) exp(-|r|^2 / (2 width^2)), r = x - center. The
/// change equals `peak` at the center and decays like a Gaussian.
struct FieldEvent {
  double t_on = 0.0;
  Vec3 center = Vec3::Zero();
  Vec3 peak = Vec3::Zero();  ///< uT
  double width = 0.1;        ///< m
};

Vec3 event_delta(const FieldEvent& event, const Vec3& x);

/// Static base field plus events, each active for t >= t_on.
class TimeVaryingField {
 public:
  explicit TimeVaryingField(SyntheticField base) : base_(std::move(base)) {}

  Vec3 operator()(double t, const Vec3& x) const;
  void add_event(const FieldEvent& event) { events_.push_back(event); }

  const SyntheticField& base() const { return base_; }
  const std::vector<FieldEvent>& events() const { return events_; }

 private:
  SyntheticField base_;
  std::vector<FieldEvent> events_;
};

TimeVaryingField apply_field_event(SyntheticField field, const FieldEvent& event);

/// Regular k^3 grid over the cube [-half, half]^3 around `center`.
std::vector<Vec3> cube_grid(const Vec3& center, double half, std::size_t k);

/// Joint RMSE over points and the three components.
double rmse(std::span<const Vec3> predicted, std::span<const Vec3> truth);
/// Per-component RMSE.
Vec3 component_rmse(std::span<const Vec3> predicted, std::span<const Vec3> truth);

}  // namespace magmap
