#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "magmap/types.hpp"

namespace magmap {

/// Per-axis mode numbers (n1, n2, n3), each >= 1.
using BasisIndex = std::array<int, 3>;

/// The m lowest Dirichlet Laplace eigenmodes of a cuboid, ascending in
/// eigenvalue with lexicographic tie-break on the mode numbers.
struct BasisIndexSet {
  std::vector<BasisIndex> indices;
  std::vector<double> eigenvalues;  ///< lambda_j^2

  std::size_t size() const { return indices.size(); }
  bool operator==(const BasisIndexSet&) const = default;
};

/// lambda^2 = sum_d (pi n_d / (2 L_d))^2. Terms are summed in ascending
/// order so permuted indices on an isotropic box tie exactly.
double laplace_eigenvalue(const BasisIndex& index, const Domain& domain);

BasisIndexSet build_index_set(std::size_t m, const Domain& domain);

/// prod_d L_d^{-1/2} sin(pi n_d (x_d - c_d + L_d) / (2 L_d))
double eval_phi(const Vec3& x, const BasisIndex& index, const Domain& domain);
Vec3 eval_grad_phi(const Vec3& x, const BasisIndex& index, const Domain& domain);

/// Spectral density of the 3-D squared exponential kernel,
/// sigma2 (2 pi ell^2)^{3/2} exp(-omega^2 ell^2 / 2).
double spectral_density_se(double omega, double sigma2, double ell);

/// Evaluates the reduced-rank basis of the scalar-potential model on a
/// fixed domain: three linear functions (the translated coordinates)
/// followed by m Laplace eigenfunctions. Immutable once constructed.
class Basis {
 public:
  Basis() = default;
  Basis(Domain domain, BasisIndexSet index_set);
  Basis(const Domain& domain, std::size_t m) : Basis(domain, build_index_set(m, domain)) {}

  const Domain& domain() const { return domain_; }
  const BasisIndexSet& index_set() const { return index_set_; }
  std::size_t m() const { return index_set_.size(); }
  /// Total coefficient count, 3 + m.
  Eigen::Index dim() const { return 3 + static_cast<Eigen::Index>(m()); }

  /// Row [x_local^T, phi_1(x), ..., phi_m(x)].
  void potential_row(const Vec3& x, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) const;
  /// 3 x dim block whose row d is the d-th partial derivative of potential_row.
  void gradient_block(const Vec3& x, Eigen::Ref<Eigen::MatrixXd> block) const;
  /// Eigenfunction values only (length m), no linear part.
  void eigen_values_at(const Vec3& x, Eigen::Ref<Eigen::VectorXd> out) const;

  Eigen::RowVectorXd potential_row(const Vec3& x) const;
  Eigen::MatrixXd gradient_block(const Vec3& x) const;

  /// diag(sigma2_lin x3, S_SE(lambda_1), ..., S_SE(lambda_m)).
  Eigen::VectorXd lambda_diag(const Hyperparameters& theta) const;
  /// S_SE(lambda_j) for the eigenfunction part only.
  Eigen::VectorXd spectral_weights(double sigma2_se, double ell_se) const;

 private:
  void fill_axis_tables(const Vec3& x, std::vector<double>& s, std::vector<double>& c) const;

  Domain domain_;
  BasisIndexSet index_set_;
  std::array<int, 3> max_mode_{0, 0, 0};
  std::array<double, 3> wavenumber_{0, 0, 0};  // pi / (2 L_d)
  double normalizer_ = 1.0;                     // prod L_d^{-1/2}
};

/// Basis matrices evaluated for a dataset.
struct BasisWorkspace {
  Domain domain;
  BasisIndexSet index_set;
  Eigen::MatrixXd phi;       ///< n x (3+m)
  Eigen::MatrixXd grad_phi;  ///< 3n x (3+m), rows 3i..3i+2 belong to sample i
  Eigen::VectorXd lambda_diag;
};

/// Throws DomainError naming the first sample outside the domain.
BasisWorkspace build_workspace(std::span<const MagneticSample> samples, const Domain& domain,
                               std::size_t m, const Hyperparameters& theta);

/// Caches an index set as CSV (`n1,n2,n3,eigenvalue`) keyed by domain and m.
void save_index_set(const std::filesystem::path& path, const Domain& domain,
                    const BasisIndexSet& set);
/// Returns std::nullopt when the file is missing or was written for a
/// different (domain, m); throws FormatError when it is corrupt.
std::optional<BasisIndexSet> load_index_set(const std::filesystem::path& path,
                                            const Domain& domain, std::size_t m);

}  // namespace magmap
