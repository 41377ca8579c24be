#include "magmap/linalg.hpp"

#include <cmath>
#include <string>

#include "magmap/error.hpp"

namespace magmap {

Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a, int max_escalations) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const auto n = a.rows();
  if (n == 0) return llt;
  double jitter = 1e-10 * std::abs(a.trace()) / static_cast<double>(n);
  if (!(jitter > 0.0)) jitter = 1e-10;
  for (int k = 0; k < max_escalations; ++k, jitter *= 10.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += jitter;
    llt.compute(b);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError("matrix of size " + std::to_string(n) +
                       " is not positive definite after jitter escalation");
}

}  // namespace magmap
