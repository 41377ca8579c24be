#include "magmap/simulator.hpp"

#include <cmath>
#include <string>

#include "magmap/error.hpp"

namespace magmap {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6d61676dU};
  return std::mt19937_64(seq);
}

SyntheticField::SyntheticField(Basis basis, Eigen::VectorXd weights, std::uint64_t seed)
    : basis_(std::move(basis)), weights_(std::move(weights)), seed_(seed) {
  if (weights_.size() != basis_.dim()) throw ParameterError("weight vector length must be 3 + m");
}

Vec3 SyntheticField::field(const Vec3& x) const { return basis_.gradient_block(x) * weights_; }

double SyntheticField::potential(const Vec3& x) const {
  return basis_.potential_row(x).dot(weights_);
}

std::vector<Vec3> SyntheticField::fields(std::span<const Vec3> points) const {
  std::vector<Vec3> out(points.size());
  Eigen::MatrixXd h(3, basis_.dim());
  for (std::size_t i = 0; i < points.size(); ++i) {
    basis_.gradient_block(points[i], h);
    out[i] = h * weights_;
  }
  return out;
}

SyntheticField sample_field(const Domain& domain, const Hyperparameters& theta, std::size_t m_sim,
                            std::uint64_t seed) {
  Basis basis(domain, m_sim);
  const Eigen::VectorXd lam = basis.lambda_diag(theta);
  auto rng = make_rng(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(lam.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = std::sqrt(lam[j]) * normal(rng);
  return SyntheticField(std::move(basis), std::move(w), seed);
}

std::vector<MagneticSample> simulate_trajectory(const FieldFunction& field, const Domain& domain,
                                                std::span<const Waypoint> path, double rate,
                                                double sigma_noise, std::uint64_t seed) {
  if (path.empty()) return {};
  if (!(rate > 0.0)) throw ParameterError("sampling rate must be positive");
  if (!(sigma_noise >= 0.0)) throw ParameterError("noise level must be non-negative");
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!domain.contains(path[i].x)) {
      throw DomainError("waypoint " + std::to_string(i) + " is outside the domain");
    }
    if (i > 0 && !(path[i].t > path[i - 1].t)) {
      throw ParameterError("waypoint times must be strictly increasing");
    }
  }
  const double t0 = path.front().t;
  const double duration = path.back().t - t0;
  const auto count = static_cast<std::size_t>(std::ceil(duration * rate - 1e-9)) + 1;

  auto rng = make_rng(seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<MagneticSample> out;
  out.reserve(count);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t0 + static_cast<double>(k) / rate;
    while (seg + 1 < path.size() && path[seg + 1].t <= t) ++seg;
    Vec3 x = path[seg].x;
    if (seg + 1 < path.size()) {
      const double u = (t - path[seg].t) / (path[seg + 1].t - path[seg].t);
      x = (1.0 - u) * path[seg].x + u * path[seg + 1].x;
    }
    MagneticSample s;
    s.t = t;
    s.x = x;
    s.y = field(t, x);
    if (sigma_noise > 0.0) {
      for (int d = 0; d < 3; ++d) s.y[d] += sigma_noise * normal(rng);
    }
    out.push_back(s);
  }
  return out;
}

Vec3 event_delta(const FieldEvent& event, const Vec3& x) {
  const Vec3 r = x - event.center;
  const double w2 = event.width * event.width;
  const double e = std::exp(-0.5 * r.squaredNorm() / w2);
  return e * (event.peak - (event.peak.dot(r) / w2) * r);
}

Vec3 TimeVaryingField::operator()(double t, const Vec3& x) const {
  Vec3 f = base_.field(x);
  for (const auto& ev : events_) {
    if (t >= ev.t_on) f += event_delta(ev, x);
  }
  return f;
}

TimeVaryingField apply_field_event(SyntheticField field, const FieldEvent& event) {
  if (!(event.width > 0.0)) throw ParameterError("event width must be positive");
  TimeVaryingField tv(std::move(field));
  tv.add_event(event);
  return tv;
}

std::vector<Vec3> cube_grid(const Vec3& center, double half, std::size_t k) {
  if (k < 2) throw ParameterError("grid resolution must be at least 2");
  std::vector<Vec3> out;
  out.reserve(k * k * k);
  const double step = 2.0 * half / static_cast<double>(k - 1);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t l = 0; l < k; ++l) {
        out.emplace_back(center[0] - half + step * static_cast<double>(i),
                         center[1] - half + step * static_cast<double>(j),
                         center[2] - half + step * static_cast<double>(l));
      }
    }
  }
  return out;
}

double rmse(std::span<const Vec3> predicted, std::span<const Vec3> truth) {
  if (predicted.size() != truth.size()) throw ParameterError("rmse: size mismatch");
  if (predicted.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += (predicted[i] - truth[i]).squaredNorm();
  return std::sqrt(acc / (3.0 * static_cast<double>(truth.size())));
}

Vec3 component_rmse(std::span<const Vec3> predicted, std::span<const Vec3> truth) {
  if (predicted.size() != truth.size()) throw ParameterError("rmse: size mismatch");
  if (predicted.empty()) return Vec3::Zero();
  Vec3 acc = Vec3::Zero();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    acc += (predicted[i] - truth[i]).cwiseAbs2();
  }
  return (acc / static_cast<double>(truth.size())).cwiseSqrt();
}

}  // namespace magmap
