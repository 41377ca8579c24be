#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace magmap {

/// Objective returning f(x); when `grad` is non-null it must also be filled.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BoxBfgsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;  ///< on the projected gradient, infinity norm
  /// Relative change of f below which the run counts as stalled (converged).
  double function_tolerance = 1e-13;
  int max_line_search = 40;
  double max_step = 2.0;  ///< largest coordinate move per iteration
};

struct IterationRecord {
  int iteration = 0;
  double value = 0.0;
  double projected_gradient_norm = 0.0;
  Eigen::VectorXd x;
};

struct BoxBfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
  std::vector<IterationRecord> trace;
};

/// Quasi-Newton (BFGS, inverse-Hessian form) minimization under box
/// constraints. Variables at a bound whose gradient points outward are
/// frozen for the step; trial points are projected onto the box. A trial
/// with a non-finite objective shrinks the step. Throws OptimizationError
/// if the objective is non-finite at the start or in every trial of a
/// steepest-descent line search.
BoxBfgsResult minimize_box_bfgs(const Objective& objective, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                const BoxBfgsOptions& opts = {});

}  // namespace magmap
