#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "magmap/batch.hpp"
#include "magmap/error.hpp"
#include "magmap/io.hpp"
#include "magmap/kernels.hpp"
#include "magmap/sequential.hpp"
#include "magmap/simulator.hpp"
#include "magmap/study.hpp"

namespace py = pybind11;
using namespace magmap;

namespace {

using RowMatrix3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_points(const Eigen::Ref<const RowMatrix3>& a) {
  std::vector<Vec3> out(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = a.row(i).transpose();
  return out;
}

RowMatrix3 from_points(const std::vector<Vec3>& p) {
  RowMatrix3 out(static_cast<Eigen::Index>(p.size()), 3);
  for (std::size_t i = 0; i < p.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = p[i].transpose();
  return out;
}

std::vector<MagneticSample> to_samples(const Eigen::Ref<const RowMatrix3>& positions,
                                       const Eigen::Ref<const RowMatrix3>& fields,
                                       std::optional<Eigen::VectorXd> times) {
  if (positions.rows() != fields.rows()) throw ParameterError("positions and fields differ in length");
  if (times && times->size() != positions.rows()) throw ParameterError("times differ in length");
  std::vector<MagneticSample> out(static_cast<std::size_t>(positions.rows()));
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    auto& s = out[static_cast<std::size_t>(i)];
    s.t = times ? (*times)[i] : static_cast<double>(i);
    s.x = positions.row(i).transpose();
    s.y = fields.row(i).transpose();
  }
  return out;
}

/// Means and marginal variances (n x 3 each) at many points.
py::tuple predict_points(const std::function<FieldPrediction(const Vec3&)>& predict,
                         const Eigen::Ref<const RowMatrix3>& points) {
  RowMatrix3 mean(points.rows(), 3), var(points.rows(), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto p = predict(points.row(i).transpose());
    mean.row(i) = p.mean.transpose();
    var.row(i) = p.covariance.diagonal().transpose();
  }
  return py::make_tuple(mean, var);
}

/// Stateful wrapper around the immutable sequential model.
class SequentialEstimator {
 public:
  SequentialEstimator(const Domain& domain, std::size_t m, const Hyperparameters& theta)
      : model_(Basis(domain, m), theta), state_(model_.init()) {}

  void update(const Eigen::Ref<const RowMatrix3>& positions, const Eigen::Ref<const RowMatrix3>& fields,
              std::optional<Eigen::VectorXd> times) {
    const bool temporal = std::isfinite(model_.theta().ell_time);
    if (temporal && !times) throw ParameterError("spatio-temporal updates need times");
    for (const auto& s : to_samples(positions, fields, times)) {
      if (temporal) model_.update_spatiotemporal(state_, s);
      else model_.update_static(state_, s);
    }
  }

  py::tuple predict(const Eigen::Ref<const RowMatrix3>& points) const {
    return predict_points([&](const Vec3& x) { return model_.predict_at(state_, x); }, points);
  }

  const SequentialState& state() const { return state_; }
  const SequentialModel& model() const { return model_; }

 private:
  SequentialModel model_;
  SequentialState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Curl-free magnetic field mapping with reduced-rank Gaussian processes";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", error.ptr());
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<OrderingError>(m, "OrderingError", error.ptr());
  auto format = py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<ModelFileError>(m, "ModelFileError", format.ptr());
  py::register_exception<OptimizationError>(m, "OptimizationError", error.ptr());

  py::class_<Domain>(m, "Domain")
      .def(py::init<const Vec3&, const Vec3&>(), py::arg("center"), py::arg("half_lengths"))
      .def_static("centered", &Domain::centered, py::arg("l1"), py::arg("l2"), py::arg("l3"))
      .def_property_readonly("center", &Domain::center)
      .def_property_readonly("half_lengths", &Domain::half_lengths)
      .def("contains", &Domain::contains, py::arg("point"))
      .def("__repr__", [](const Domain& d) {
        return "Domain(center=[" + std::to_string(d.center()[0]) + ", " + std::to_string(d.center()[1]) +
               ", " + std::to_string(d.center()[2]) + "], half_lengths=[" +
               std::to_string(d.half_lengths()[0]) + ", " + std::to_string(d.half_lengths()[1]) + ", " +
               std::to_string(d.half_lengths()[2]) + "])";
      });

  py::class_<Hyperparameters>(m, "Hyperparameters")
      .def(py::init([](double sigma2_lin, double sigma2_se, double ell_se, double sigma2_noise,
                       double ell_time) {
             Hyperparameters h{sigma2_lin, sigma2_se, ell_se, sigma2_noise, ell_time};
             h.validate();
             return h;
           }),
           py::arg("sigma2_lin"), py::arg("sigma2_se"), py::arg("ell_se"), py::arg("sigma2_noise"),
           py::arg("ell_time") = std::numeric_limits<double>::infinity())
      .def_readwrite("sigma2_lin", &Hyperparameters::sigma2_lin)
      .def_readwrite("sigma2_se", &Hyperparameters::sigma2_se)
      .def_readwrite("ell_se", &Hyperparameters::ell_se)
      .def_readwrite("sigma2_noise", &Hyperparameters::sigma2_noise)
      .def_readwrite("ell_time", &Hyperparameters::ell_time)
      .def("field_magnitude", &Hyperparameters::field_magnitude)
      .def("__repr__", [](const Hyperparameters& h) { return "Hyperparameters(" + to_json(h).dump() + ")"; });

  m.def("k_curlfree", &k_curlfree, py::arg("x"), py::arg("x2"), py::arg("sigma2"), py::arg("ell"),
        "3x3 curl-free covariance between the fields at x and x2");
  m.def(
      "basis_indices",
      [](std::size_t count, const Domain& d) {
        const auto set = build_index_set(count, d);
        Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> idx(static_cast<Eigen::Index>(count), 3);
        for (std::size_t j = 0; j < count; ++j) {
          for (int k = 0; k < 3; ++k) idx(static_cast<Eigen::Index>(j), k) = set.indices[j][k];
        }
        const Eigen::VectorXd eig = Eigen::Map<const Eigen::VectorXd>(
            set.eigenvalues.data(), static_cast<Eigen::Index>(set.eigenvalues.size()));
        return py::make_tuple(idx, eig);
      },
      py::arg("m"), py::arg("domain"), "First m Laplace eigenfunction indices and eigenvalues");

  py::class_<BatchModel>(m, "BatchModel")
      .def_static(
          "fit",
          [](const Eigen::Ref<const RowMatrix3>& positions, const Eigen::Ref<const RowMatrix3>& fields,
             const Domain& d, std::size_t basis_size, const Hyperparameters& theta) {
            return BatchModel::fit(to_samples(positions, fields, std::nullopt), d, basis_size, theta);
          },
          py::arg("positions"), py::arg("fields"), py::arg("domain"), py::arg("m"), py::arg("theta"))
      .def(
          "predict",
          [](const BatchModel& b, const Eigen::Ref<const RowMatrix3>& points) {
            return predict_points([&](const Vec3& x) { return b.predict(x); }, points);
          },
          py::arg("points"), "Posterior means and marginal variances, each n x 3")
      .def(
          "potential",
          [](const BatchModel& b, const Eigen::Ref<const RowMatrix3>& points) {
            Eigen::VectorXd out(points.rows());
            for (Eigen::Index i = 0; i < points.rows(); ++i) {
              out[i] = *b.predict(points.row(i).transpose(), true).potential_mean;
            }
            return out;
          },
          py::arg("points"))
      .def_property_readonly("theta", &BatchModel::theta)
      .def_property_readonly("coefficients", &BatchModel::coefficients)
      .def_property_readonly("linear_coefficients", &BatchModel::linear_coefficients)
      .def_property_readonly("sample_count", &BatchModel::sample_count);

  m.def(
      "nlml",
      [](const Eigen::Ref<const RowMatrix3>& positions, const Eigen::Ref<const RowMatrix3>& fields,
         const Domain& d, std::size_t basis_size, const Hyperparameters& theta) {
        const auto stats = potential_gram(to_samples(positions, fields, std::nullopt), Basis(d, basis_size));
        Eigen::Vector4d grad;
        const double v = nlml(theta, stats, grad);
        return py::make_tuple(v, grad);
      },
      py::arg("positions"), py::arg("fields"), py::arg("domain"), py::arg("m"), py::arg("theta"),
      "Negative log marginal likelihood and its gradient in log parameters");

  m.def(
      "optimize_hyperparameters",
      [](const Eigen::Ref<const RowMatrix3>& positions, const Eigen::Ref<const RowMatrix3>& fields,
         const Domain& d, std::size_t basis_size, const Hyperparameters& theta0, int max_iterations) {
        OptimizeOptions opts;
        opts.max_iterations = max_iterations;
        const auto r = optimize_hyperparameters(to_samples(positions, fields, std::nullopt), d,
                                                basis_size, theta0, opts);
        py::dict info;
        info["nlml"] = r.nlml;
        info["iterations"] = r.details.iterations;
        info["converged"] = r.details.converged;
        info["status"] = r.details.status;
        info["boundary_clipped"] = r.any_clipped();
        return py::make_tuple(r.theta, info);
      },
      py::arg("positions"), py::arg("fields"), py::arg("domain"), py::arg("m"), py::arg("theta0"),
      py::arg("max_iterations") = 200);

  py::class_<SequentialEstimator>(m, "SequentialEstimator")
      .def(py::init<const Domain&, std::size_t, const Hyperparameters&>(), py::arg("domain"),
           py::arg("m"), py::arg("theta"),
           "Static mode when theta.ell_time is infinite, spatio-temporal otherwise")
      .def("update", &SequentialEstimator::update, py::arg("positions"), py::arg("fields"),
           py::arg("times") = std::nullopt)
      .def("predict", &SequentialEstimator::predict, py::arg("points"))
      .def_property_readonly("mean", [](const SequentialEstimator& s) { return s.state().mu; })
      .def_property_readonly("covariance", [](const SequentialEstimator& s) { return s.state().sigma; })
      .def_property_readonly("samples_seen", [](const SequentialEstimator& s) { return s.state().samples_seen; });

  m.def(
      "simulate",
      [](std::size_t n, std::uint64_t seed, std::size_t m_sim) {
        Scenario s;
        s.m_sim = m_sim;
        const auto data = simulate_scenario(s, n, seed);
        RowMatrix3 x(static_cast<Eigen::Index>(n), 3), y(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
          x.row(static_cast<Eigen::Index>(i)) = data.train[i].x.transpose();
          y.row(static_cast<Eigen::Index>(i)) = data.train[i].y.transpose();
        }
        py::dict out;
        out["positions"] = x;
        out["fields"] = y;
        out["grid"] = from_points(data.grid);
        out["truth"] = from_points(data.truth);
        out["domain"] = scenario_domain(s);
        out["theta"] = s.theta_true;
        return out;
      },
      py::arg("n"), py::arg("seed") = 1, py::arg("m_sim") = 2048,
      "Noisy samples of a prior draw on the default simulation scenario");

  m.def(
      "read_samples_csv",
      [](const std::filesystem::path& path) {
        const auto samples = read_samples_csv(path);
        RowMatrix3 x(static_cast<Eigen::Index>(samples.size()), 3), y(x.rows(), 3);
        Eigen::VectorXd t(x.rows());
        for (std::size_t i = 0; i < samples.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          t[r] = samples[i].t;
          x.row(r) = samples[i].x.transpose();
          y.row(r) = samples[i].y.transpose();
        }
        return py::make_tuple(t, x, y);
      },
      py::arg("path"), "Returns (times, positions, fields)");

  m.def(
      "load_model",
      [](const std::filesystem::path& path) {
        const auto file = load_model(path);
        const Basis basis(file.domain, file.index_set);
        py::dict out;
        out["mode"] = file.mode;
        out["domain"] = file.domain;
        out["theta"] = file.theta;
        out["m"] = basis.m();
        out["mean"] = file.posterior.mean;
        out["covariance"] = file.posterior.covariance;
        out["samples_seen"] = file.samples_seen;
        out["predict"] = py::cpp_function([basis, post = file.posterior](const Eigen::Ref<const RowMatrix3>& points) {
          return predict_points([&](const Vec3& x) { return project_posterior(basis, post, x); }, points);
        });
        return out;
      },
      py::arg("path"), "Reads a model file written by the magmap tool");
}
