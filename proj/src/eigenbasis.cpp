#include "magmap/eigenbasis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

#include "magmap/error.hpp"

namespace magmap {

namespace {

constexpr double kPi = std::numbers::pi;

// (n / L)^2; the common factor (pi / 2)^2 is applied after summing so that
// index triples with exactly equal eigenvalues also compare equal.
double axis_term(int n, double half_length) {
  const double w = n / half_length;
  return w * w;
}

}  // namespace

double laplace_eigenvalue(const BasisIndex& index, const Domain& domain) {
  std::array<double, 3> terms{};
  for (int d = 0; d < 3; ++d) terms[d] = axis_term(index[d], domain.half_lengths()[d]);
  std::sort(terms.begin(), terms.end());
  return (kPi * kPi / 4.0) * ((terms[0] + terms[1]) + terms[2]);
}

BasisIndexSet build_index_set(std::size_t m, const Domain& domain) {
  if (m == 0) throw ParameterError("basis size m must be at least 1");
  const Vec3& half = domain.half_lengths();
  const double min_half = half.minCoeff();
  const double root = std::ceil(std::cbrt(static_cast<double>(m)));

  std::array<int, 3> cap{};
  for (int d = 0; d < 3; ++d) {
    cap[d] = static_cast<int>(root * std::ceil(half[d] / min_half)) + 2;
  }

  struct Candidate {
    double eigenvalue;
    BasisIndex index;
  };
  std::vector<Candidate> candidates;
  for (;;) {
    candidates.clear();
    candidates.reserve(static_cast<std::size_t>(cap[0]) * cap[1] * cap[2]);
    for (int a = 1; a <= cap[0]; ++a) {
      for (int b = 1; b <= cap[1]; ++b) {
        for (int c = 1; c <= cap[2]; ++c) {
          const BasisIndex idx{a, b, c};
          candidates.push_back({laplace_eigenvalue(idx, domain), idx});
        }
      }
    }
    if (candidates.size() >= m) {
      std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(m - 1),
                       candidates.end(), [](const Candidate& l, const Candidate& r) {
                         return l.eigenvalue < r.eigenvalue ||
                                (l.eigenvalue == r.eigenvalue && l.index < r.index);
                       });
      const double mth = candidates[m - 1].eigenvalue;
      // The cheapest triple outside the enumerated box raises one axis to
      // cap + 1 and keeps the others at 1.
      double cheapest_excluded = std::numeric_limits<double>::infinity();
      for (int d = 0; d < 3; ++d) {
        BasisIndex idx{1, 1, 1};
        idx[d] = cap[d] + 1;
        cheapest_excluded = std::min(cheapest_excluded, laplace_eigenvalue(idx, domain));
      }
      if (mth < cheapest_excluded) break;
    }
    for (auto& c : cap) c *= 2;
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& l, const Candidate& r) {
    return l.eigenvalue < r.eigenvalue || (l.eigenvalue == r.eigenvalue && l.index < r.index);
  });
  BasisIndexSet set;
  set.indices.reserve(m);
  set.eigenvalues.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    set.indices.push_back(candidates[j].index);
    set.eigenvalues.push_back(candidates[j].eigenvalue);
  }
  return set;
}

double eval_phi(const Vec3& x, const BasisIndex& index, const Domain& domain) {
  const Vec3 p = domain.to_local(x);
  double v = 1.0;
  for (int d = 0; d < 3; ++d) {
    const double l = domain.half_lengths()[d];
    v *= std::sin(kPi * index[d] * (p[d] + l) / (2.0 * l)) / std::sqrt(l);
  }
  return v;
}

Vec3 eval_grad_phi(const Vec3& x, const BasisIndex& index, const Domain& domain) {
  const Vec3 p = domain.to_local(x);
  std::array<double, 3> s{}, c{}, k{};
  for (int d = 0; d < 3; ++d) {
    const double l = domain.half_lengths()[d];
    k[d] = kPi * index[d] / (2.0 * l);
    const double arg = k[d] * (p[d] + l);
    s[d] = std::sin(arg) / std::sqrt(l);
    c[d] = std::cos(arg) / std::sqrt(l);
  }
  return {k[0] * c[0] * s[1] * s[2], k[1] * s[0] * c[1] * s[2], k[2] * s[0] * s[1] * c[2]};
}

double spectral_density_se(double omega, double sigma2, double ell) {
  if (!(sigma2 > 0.0) || !(ell > 0.0)) {
    throw ParameterError("spectral density requires positive sigma2 and ell");
  }
  return sigma2 * std::pow(2.0 * kPi * ell * ell, 1.5) * std::exp(-0.5 * omega * omega * ell * ell);
}

// ---------------------------------------------------------------------------

Basis::Basis(Domain domain, BasisIndexSet index_set)
    : domain_(std::move(domain)), index_set_(std::move(index_set)) {
  if (index_set_.indices.size() != index_set_.eigenvalues.size()) {
    throw ParameterError("index set has mismatched index and eigenvalue counts");
  }
  normalizer_ = 1.0;
  for (int d = 0; d < 3; ++d) {
    wavenumber_[d] = kPi / (2.0 * domain_.half_lengths()[d]);
    normalizer_ /= std::sqrt(domain_.half_lengths()[d]);
  }
  for (const auto& idx : index_set_.indices) {
    for (int d = 0; d < 3; ++d) {
      if (idx[d] < 1) throw ParameterError("mode numbers must be >= 1");
      max_mode_[d] = std::max(max_mode_[d], idx[d]);
    }
  }
}

void Basis::fill_axis_tables(const Vec3& x, std::vector<double>& s, std::vector<double>& c) const {
  const Vec3 p = domain_.to_local(x);
  const int stride = std::max({max_mode_[0], max_mode_[1], max_mode_[2]}) + 1;
  s.assign(3 * static_cast<std::size_t>(stride), 0.0);
  c.assign(3 * static_cast<std::size_t>(stride), 0.0);
  for (int d = 0; d < 3; ++d) {
    const double base = wavenumber_[d] * (p[d] + domain_.half_lengths()[d]);
    for (int k = 1; k <= max_mode_[d]; ++k) {
      s[static_cast<std::size_t>(d * stride + k)] = std::sin(k * base);
      c[static_cast<std::size_t>(d * stride + k)] = std::cos(k * base);
    }
  }
}

void Basis::eigen_values_at(const Vec3& x, Eigen::Ref<Eigen::VectorXd> out) const {
  std::vector<double> s, c;
  fill_axis_tables(x, s, c);
  const std::size_t stride = s.size() / 3;
  for (std::size_t j = 0; j < m(); ++j) {
    const auto& idx = index_set_.indices[j];
    out[static_cast<Eigen::Index>(j)] =
        normalizer_ * s[idx[0]] * s[stride + idx[1]] * s[2 * stride + idx[2]];
  }
}

void Basis::potential_row(const Vec3& x, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) const {
  row.head<3>() = domain_.to_local(x).transpose();
  Eigen::VectorXd tmp(static_cast<Eigen::Index>(m()));
  eigen_values_at(x, tmp);
  row.tail(static_cast<Eigen::Index>(m())) = tmp.transpose();
}

void Basis::gradient_block(const Vec3& x, Eigen::Ref<Eigen::MatrixXd> block) const {
  std::vector<double> s, c;
  fill_axis_tables(x, s, c);
  const std::size_t stride = s.size() / 3;
  block.leftCols<3>().setIdentity();
  for (std::size_t j = 0; j < m(); ++j) {
    const auto& idx = index_set_.indices[j];
    const double s0 = s[idx[0]], s1 = s[stride + idx[1]], s2 = s[2 * stride + idx[2]];
    const double c0 = c[idx[0]], c1 = c[stride + idx[1]], c2 = c[2 * stride + idx[2]];
    const auto col = static_cast<Eigen::Index>(3 + j);
    block(0, col) = normalizer_ * wavenumber_[0] * idx[0] * c0 * s1 * s2;
    block(1, col) = normalizer_ * wavenumber_[1] * idx[1] * s0 * c1 * s2;
    block(2, col) = normalizer_ * wavenumber_[2] * idx[2] * s0 * s1 * c2;
  }
}

Eigen::RowVectorXd Basis::potential_row(const Vec3& x) const {
  Eigen::RowVectorXd row(dim());
  potential_row(x, row);
  return row;
}

Eigen::MatrixXd Basis::gradient_block(const Vec3& x) const {
  Eigen::MatrixXd block(3, dim());
  gradient_block(x, block);
  return block;
}

Eigen::VectorXd Basis::spectral_weights(double sigma2_se, double ell_se) const {
  if (!(sigma2_se > 0.0) || !(ell_se > 0.0)) {
    throw ParameterError("spectral weights require positive sigma2 and ell");
  }
  const double scale = sigma2_se * std::pow(2.0 * kPi * ell_se * ell_se, 1.5);
  Eigen::VectorXd w(static_cast<Eigen::Index>(m()));
  for (std::size_t j = 0; j < m(); ++j) {
    w[static_cast<Eigen::Index>(j)] =
        scale * std::exp(-0.5 * index_set_.eigenvalues[j] * ell_se * ell_se);
  }
  return w;
}

Eigen::VectorXd Basis::lambda_diag(const Hyperparameters& theta) const {
  theta.validate();
  Eigen::VectorXd lam(dim());
  lam.head<3>().setConstant(theta.sigma2_lin);
  lam.tail(static_cast<Eigen::Index>(m())) = spectral_weights(theta.sigma2_se, theta.ell_se);
  return lam;
}

// ---------------------------------------------------------------------------

BasisWorkspace build_workspace(std::span<const MagneticSample> samples, const Domain& domain,
                               std::size_t m, const Hyperparameters& theta) {
  require_inside(samples, domain);
  const Basis basis(domain, m);
  const auto n = static_cast<Eigen::Index>(samples.size());
  BasisWorkspace ws;
  ws.domain = domain;
  ws.index_set = basis.index_set();
  ws.phi.resize(n, basis.dim());
  ws.grad_phi.resize(3 * n, basis.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& x = samples[static_cast<std::size_t>(i)].x;
    basis.potential_row(x, ws.phi.row(i));
    basis.gradient_block(x, ws.grad_phi.middleRows(3 * i, 3));
  }
  ws.lambda_diag = basis.lambda_diag(theta);
  return ws;
}

// ---------------------------------------------------------------------------

namespace {

std::string cache_key(const Domain& domain, std::size_t m) {
  std::ostringstream os;
  os << std::setprecision(17) << "# magmap-basis v1 m=" << m << " center=" << domain.center()[0]
     << ',' << domain.center()[1] << ',' << domain.center()[2]
     << " half=" << domain.half_lengths()[0] << ',' << domain.half_lengths()[1] << ','
     << domain.half_lengths()[2];
  return os.str();
}

}  // namespace

void save_index_set(const std::filesystem::path& path, const Domain& domain,
                    const BasisIndexSet& set) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write basis cache " + path.string());
  out << cache_key(domain, set.size()) << '\n' << "n1,n2,n3,eigenvalue\n";
  out << std::setprecision(17);
  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto& idx = set.indices[j];
    out << idx[0] << ',' << idx[1] << ',' << idx[2] << ',' << set.eigenvalues[j] << '\n';
  }
}

std::optional<BasisIndexSet> load_index_set(const std::filesystem::path& path,
                                            const Domain& domain, std::size_t m) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line) || line != cache_key(domain, m)) return std::nullopt;
  if (!std::getline(in, line) || line != "n1,n2,n3,eigenvalue") {
    throw FormatError("basis cache " + path.string() + " has a bad header");
  }
  BasisIndexSet set;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    BasisIndex idx{};
    double ev = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> idx[0] >> c1 >> idx[1] >> c2 >> idx[2] >> c3 >> ev) || c1 != ',' || c2 != ',' ||
        c3 != ',') {
      throw FormatError("basis cache " + path.string() + " has a malformed row: " + line);
    }
    set.indices.push_back(idx);
    set.eigenvalues.push_back(ev);
  }
  if (set.size() != m) throw FormatError("basis cache " + path.string() + " is truncated");
  return set;
}

}  // namespace magmap
