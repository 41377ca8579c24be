#include "magmap/types.hpp"

#include <cmath>
#include <string>

#include "magmap/error.hpp"

namespace magmap {

namespace {

void require_positive(double v, const char* name) {
  if (!(std::isfinite(v) && v > 0.0)) {
    throw ParameterError(std::string(name) + " must be finite and positive, got " +
                         std::to_string(v));
  }
}

}  // namespace

Domain::Domain(const Vec3& center, const Vec3& half_lengths)
    : center_(center), half_lengths_(half_lengths) {
  if (!center.allFinite()) throw ParameterError("domain center must be finite");
  for (int d = 0; d < 3; ++d) require_positive(half_lengths[d], "domain half length");
}

void Hyperparameters::validate() const {
  require_positive(sigma2_lin, "sigma2_lin");
  require_positive(sigma2_se, "sigma2_se");
  require_positive(ell_se, "ell_se");
  require_positive(sigma2_noise, "sigma2_noise");
  if (!(ell_time > 0.0)) throw ParameterError("ell_time must be positive");
}

void ComponentHyperparameters::validate() const {
  require_positive(sigma2_const, "sigma2_const");
  require_positive(sigma2_se, "sigma2_se");
  require_positive(ell_se, "ell_se");
  require_positive(sigma2_noise, "sigma2_noise");
}

ValidationReport validate_dataset(std::span<const MagneticSample> samples, const Domain& domain) {
  ValidationReport report;
  report.n = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.finite()) {
      report.non_finite_rows.push_back(i);
      continue;
    }
    if (domain.contains(s.x)) {
      ++report.inside_count;
    } else {
      ++report.outside_count;
      report.outside_rows.push_back(i);
    }
    if (i > 0 && std::isfinite(samples[i - 1].t) && s.t < samples[i - 1].t) {
      report.timestamp_regressions.push_back(i);
    }
  }
  return report;
}

void require_inside(std::span<const MagneticSample> samples, const Domain& domain) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].x.allFinite() || !samples[i].y.allFinite()) {
      throw ParameterError("sample " + std::to_string(i) + " has non-finite values");
    }
    if (!domain.contains(samples[i].x)) {
      throw DomainError("sample " + std::to_string(i) + " at (" +
                        std::to_string(samples[i].x[0]) + ", " + std::to_string(samples[i].x[1]) +
                        ", " + std::to_string(samples[i].x[2]) + ") is outside the domain");
    }
  }
}

}  // namespace magmap
