#include "magmap/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "magmap/error.hpp"

namespace magmap {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Components at a bound with the gradient pushing further out are zeroed.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)) pg[i] = 0.0;
  }
  return pg;
}

std::string describe(const std::vector<IterationRecord>& trace) {
  std::ostringstream os;
  os << "optimizer trace (" << trace.size() << " iterations):";
  for (const auto& r : trace) os << " [" << r.iteration << ": f=" << r.value << "]";
  return os.str();
}

}  // namespace

BoxBfgsResult minimize_box_bfgs(const Objective& objective, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                const BoxBfgsOptions& opts) {
  const Eigen::Index k = x0.size();
  BoxBfgsResult result;
  Eigen::VectorXd x = project(x0, lower, upper);
  Eigen::VectorXd g(k);
  double f = objective(x, &g);
  result.evaluations = 1;
  if (!std::isfinite(f) || !g.allFinite()) {
    throw OptimizationError("objective is not finite at the initial point");
  }

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(k, k);
  bool h_is_identity = true;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd pg = projected_gradient(x, g, lower, upper);
    result.trace.push_back({it, f, pg.lpNorm<Eigen::Infinity>(), x});
    if (pg.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) {
      result.converged = true;
      result.status = "gradient tolerance reached";
      break;
    }

    Eigen::VectorXd d = -(h * pg);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (pg[i] == 0.0) d[i] = 0.0;
    }
    if (pg.dot(d) >= 0.0) {
      h.setIdentity();
      h_is_identity = true;
      d = -pg;
    }

    double alpha = std::min(1.0, opts.max_step / std::max(d.lpNorm<Eigen::Infinity>(), 1e-300));
    bool accepted = false;
    bool any_finite = false;
    Eigen::VectorXd x_new, g_new(k);
    double f_new = 0.0;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      x_new = project(x + alpha * d, lower, upper);
      f_new = objective(x_new, &g_new);
      ++result.evaluations;
      const bool finite = std::isfinite(f_new) && g_new.allFinite();
      any_finite = any_finite || finite;
      if (finite && f_new <= f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      alpha *= finite ? 0.5 : 0.1;
    }

    if (!accepted) {
      if (!any_finite && h_is_identity) {
        throw OptimizationError("objective non-finite along the descent direction; " +
                                describe(result.trace));
      }
      if (!h_is_identity) {
        h.setIdentity();
        h_is_identity = true;
        continue;
      }
      result.status = "line search failed";
      result.converged = pg.lpNorm<Eigen::Infinity>() < 1e3 * opts.gradient_tolerance;
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const bool stalled = std::abs(f - f_new) <= opts.function_tolerance * std::max(1.0, std::abs(f));
    x = x_new;
    g = g_new;
    f = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(k, k);
      h = (eye - rho * s * y.transpose()) * h * (eye - rho * y * s.transpose()) +
          rho * s * s.transpose();
      h_is_identity = false;
    }
    if (stalled) {
      result.trace.push_back({it + 1, f, projected_gradient(x, g, lower, upper).lpNorm<Eigen::Infinity>(), x});
      result.converged = true;
      result.status = "function change below tolerance";
      ++it;
      break;
    }
  }
  if (it >= opts.max_iterations && result.status.empty()) result.status = "iteration limit";
  result.x = x;
  result.value = f;
  result.iterations = it;
  return result;
}

}  // namespace magmap
