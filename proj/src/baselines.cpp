#include "magmap/baselines.hpp"

#include <cmath>

#include "magmap/error.hpp"

namespace magmap {

namespace {

constexpr Eigen::Index kChunk = 512;

Eigen::VectorXd component_row(const Basis& basis, const Vec3& x) {
  Eigen::VectorXd row(static_cast<Eigen::Index>(basis.m()) + 1);
  row[0] = 1.0;
  basis.eigen_values_at(x, row.tail(static_cast<Eigen::Index>(basis.m())));
  return row;
}

Eigen::VectorXd component_prior(const GramStatistics& stats, const ComponentHyperparameters& th) {
  return prior_variances(stats, th.sigma2_const, th.sigma2_se, th.ell_se);
}

Eigen::Vector4d uniform_bound(double v) { return Eigen::Vector4d::Constant(std::log(v)); }

BoxBfgsResult run(const GramStatistics& stats, const Eigen::Vector4d& x0,
                  const ComponentOptimizeOptions& opts) {
  const Objective objective = [&stats](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    Eigen::Vector4d g;
    const double v = reduced_rank_nlml(stats, x, grad ? &g : nullptr);
    if (grad) *grad = g;
    return v;
  };
  BoxBfgsOptions bopts;
  bopts.max_iterations = opts.max_iterations;
  bopts.gradient_tolerance = opts.gradient_tolerance;
  return minimize_box_bfgs(objective, x0, uniform_bound(opts.lower), uniform_bound(opts.upper),
                           bopts);
}

}  // namespace

GramStatistics ComponentGram::component(int c) const {
  if (c < 0 || c > 2) throw ParameterError("component index must be 0, 1 or 2");
  GramStatistics one;
  one.gram = shared.gram;
  one.cross = shared.cross.col(c);
  one.yty = yty[static_cast<std::size_t>(c)];
  one.observations = shared.observations;
  one.n_offset = shared.n_offset;
  one.eigenvalues = shared.eigenvalues;
  return one;
}

ComponentGram component_gram(std::span<const MagneticSample> samples, const Basis& basis) {
  require_inside(samples, basis.domain());
  const Eigen::Index dim = static_cast<Eigen::Index>(basis.m()) + 1;
  ComponentGram out;
  auto& st = out.shared;
  st.gram = Eigen::MatrixXd::Zero(dim, dim);
  st.cross = Eigen::MatrixXd::Zero(dim, 3);
  st.observations = static_cast<double>(samples.size());
  st.n_offset = 1;
  st.eigenvalues = Eigen::Map<const Eigen::VectorXd>(basis.index_set().eigenvalues.data(),
                                                     static_cast<Eigen::Index>(basis.m()));

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd h(kChunk, dim);
  Eigen::MatrixXd y(kChunk, 3);
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index count = std::min(kChunk, n - start);
    for (Eigen::Index i = 0; i < count; ++i) {
      const auto& s = samples[static_cast<std::size_t>(start + i)];
      h.row(i) = component_row(basis, s.x).transpose();
      y.row(i) = s.y.transpose();
    }
    const auto hc = h.topRows(count);
    st.gram.selfadjointView<Eigen::Lower>().rankUpdate(hc.transpose());
    st.cross.noalias() += hc.transpose() * y.topRows(count);
    for (int c = 0; c < 3; ++c) out.yty[static_cast<std::size_t>(c)] += y.col(c).head(count).squaredNorm();
  }
  st.gram.triangularView<Eigen::StrictlyUpper>() = st.gram.transpose();
  st.yty = out.yty[0] + out.yty[1] + out.yty[2];
  return out;
}

Eigen::Vector4d to_log_params(const ComponentHyperparameters& theta) {
  return {std::log(theta.sigma2_const), std::log(theta.sigma2_se), std::log(theta.ell_se),
          std::log(theta.sigma2_noise)};
}

ComponentHyperparameters component_from_log_params(const Eigen::Vector4d& p) {
  return {std::exp(p[0]), std::exp(p[1]), std::exp(p[2]), std::exp(p[3])};
}

ComponentHyperparameters optimize_shared(const ComponentGram& gram,
                                         const ComponentHyperparameters& theta0,
                                         const ComponentOptimizeOptions& opts) {
  theta0.validate();
  return component_from_log_params(run(gram.shared, to_log_params(theta0), opts).x);
}

std::array<ComponentHyperparameters, 3> optimize_independent(
    const ComponentGram& gram, const std::array<ComponentHyperparameters, 3>& theta0,
    const ComponentOptimizeOptions& opts) {
  std::array<ComponentHyperparameters, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const auto& t0 = theta0[static_cast<std::size_t>(c)];
    t0.validate();
    out[static_cast<std::size_t>(c)] =
        component_from_log_params(run(gram.component(c), to_log_params(t0), opts).x);
  }
  return out;
}

ComponentModel ComponentModel::fit(const Basis& basis, const ComponentGram& gram,
                                   const std::array<ComponentHyperparameters, 3>& theta) {
  ComponentModel model;
  model.basis_ = basis;
  model.theta_ = theta;
  model.mean_.resize(gram.shared.dim(), 3);
  for (int c = 0; c < 3; ++c) {
    const auto& th = theta[static_cast<std::size_t>(c)];
    th.validate();
    const GramStatistics one = gram.component(c);
    auto solve = solve_coefficients(one, component_prior(one, th), th.sigma2_noise);
    model.mean_.col(c) = solve.mean.col(0);
    model.information_[static_cast<std::size_t>(c)] = std::move(solve.information);
  }
  return model;
}

FieldPrediction ComponentModel::predict(const Vec3& x) const {
  FieldPrediction out;
  const Eigen::VectorXd row = component_row(basis_, x);
  for (int c = 0; c < 3; ++c) {
    const auto& info = information_[static_cast<std::size_t>(c)];
    out.mean[c] = row.dot(mean_.col(c));
    const Eigen::VectorXd v = info.matrixL().solve(row);
    out.covariance(c, c) = theta_[static_cast<std::size_t>(c)].sigma2_noise * v.squaredNorm();
  }
  out.outside_domain = !basis_.domain().contains(x);
  return out;
}

std::vector<Vec3> ComponentModel::predict_means(std::span<const Vec3> points) const {
  std::vector<Vec3> out(points.size());
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd h(kChunk, mean_.rows());
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index count = std::min(kChunk, n - start);
    for (Eigen::Index i = 0; i < count; ++i) {
      h.row(i) = component_row(basis_, points[static_cast<std::size_t>(start + i)]).transpose();
    }
    const Eigen::MatrixXd f = h.topRows(count) * mean_;
    for (Eigen::Index i = 0; i < count; ++i) out[static_cast<std::size_t>(start + i)] = f.row(i).transpose();
  }
  return out;
}

}  // namespace magmap
