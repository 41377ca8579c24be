#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace magmap {

/// Cholesky factorization with jitter escalation: a plain attempt first,
/// then up to `max_escalations` retries adding 1e-10 * trace / n to the
/// diagonal, growing tenfold each retry. Throws NumericalError when every
/// attempt fails.
Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a, int max_escalations = 3);

/// a <- (a + a^T) / 2
inline void symmetrize(Eigen::MatrixXd& a) {
  a = 0.5 * (a + a.transpose()).eval();
}

/// log|A| from a Cholesky factor.
inline double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace magmap
