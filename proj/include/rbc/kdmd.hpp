#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rbc/errors.hpp"
#include "rbc/linalg.hpp"

namespace rbc {

/// Kernel choice for the implicit observable space. The gaussian form is
/// exp(-||a-b||^2 / (sigma^2 scale^2)); scale <= 0 asks fit() to resolve it
/// from the data by the median pairwise distance heuristic, which keeps
/// sigma O(1) and dimensionless regardless of the state dimension.
struct KernelSpec {
  enum class Kind { gaussian, polynomial };
  Kind kind = Kind::gaussian;
  double sigma = 2.0;
  int degree = 1;
  double scale = 0.0;

  void validate() const {
    if (kind == Kind::gaussian && !(sigma > 0.0))
      throw std::invalid_argument("KernelSpec: sigma must be positive");
    if (kind == Kind::polynomial && degree < 1)
      throw std::invalid_argument("KernelSpec: degree must be >= 1");
  }
};

/// Columns of y_matrix are the states one record step after the matching
/// columns of x_matrix.
struct SnapshotPair {
  Matrix x_matrix;  // N x (m-1)
  Matrix y_matrix;  // N x (m-1)

  void validate() const {
    if (x_matrix.rows() != y_matrix.rows() || x_matrix.cols() != y_matrix.cols())
      throw ShapeMismatch("SnapshotPair: x and y shapes differ");
    if (x_matrix.cols() < 2)
      throw std::invalid_argument("SnapshotPair: need at least 2 snapshot pairs");
    if (!x_matrix.allFinite() || !y_matrix.allFinite())
      throw std::invalid_argument("SnapshotPair: non-finite data");
  }
};

/// Truncated kernel-DMD decomposition. eigfun_coeffs maps a kernel row
/// (evaluations against the retained basis) to eigenfunction values; modes
/// combine with those values to reconstruct states.
struct KdmdModel {
  ComplexVector eigenvalues;    // r, descending |lambda|
  ComplexMatrix eigfun_coeffs;  // (m-1) x r
  ComplexMatrix modes;          // N x r
  Matrix basis;                 // N x (m-1), the retained x columns
  KernelSpec kernel;            // scale resolved
  int rank = 0;

  /// Continuous-time rates ln(lambda_k)/dt.
  ComplexVector continuous_rates(double dt) const {
    ComplexVector w(eigenvalues.size());
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k)
      w(k) = std::log(eigenvalues(k)) / dt;
    return w;
  }
};

inline double kernel_eval(const KernelSpec& spec, const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw LengthMismatch("kernel_eval: vectors of different length");
  if (spec.kind == KernelSpec::Kind::gaussian) {
    if (!(spec.scale > 0.0))
      throw std::invalid_argument("kernel_eval: gaussian scale not resolved");
    const double d2 = (a - b).squaredNorm();
    return std::exp(-d2 / (spec.sigma * spec.sigma * spec.scale * spec.scale));
  }
  return std::pow(1.0 + a.dot(b), spec.degree);
}

/// Median (lower) of all pairwise column distances; 1.0 when the data are
/// degenerate (all columns identical).
inline double median_pairwise_distance(const Matrix& columns) {
  const Eigen::Index c = columns.cols();
  std::vector<double> d;
  d.reserve(static_cast<size_t>(c) * (c - 1) / 2);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = i + 1; j < c; ++j)
      d.push_back((columns.col(i) - columns.col(j)).norm());
  if (d.empty()) return 1.0;
  const size_t mid = (d.size() - 1) / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  return d[mid] > 0.0 ? d[mid] : 1.0;
}

namespace detail {

inline Matrix kernel_gram(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  // entry (i, j) = f(a_i, b_j)
  Matrix g(a.cols(), b.cols());
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      g(i, j) = kernel_eval(spec, a.col(i), b.col(j));
  return g;
}

}  // namespace detail

/// Kernel-DMD fit:
///  1. G_ij = f(x_i, x_j), A_ij = f(y_i, x_j)
///  2. G = Q S^2 Q^T, truncated to singular values above trunc_tol * S_max
///  3. Khat = (S^+ Q^T) A (Q S^+)
///  4. eigendecompose Khat
///  5. training eigenfunctions Phi = Q S Vhat, coefficients C = Q S^+ Vhat
///  6. modes by least squares: Xi^T = Phi^+ X^T
///
/// The default truncation sits at the numerical-rank floor of a binary64
/// Gram eigendecomposition (S carries half the working precision, so its
/// noise floor is ~sqrt(eps) * S_max). Retaining components below it turns
/// roundoff into spurious eigenvalues outside the unit circle that explode
/// under multi-step prediction.
inline KdmdModel fit(const SnapshotPair& pairs, KernelSpec spec,
                     double trunc_tol = 1e-8) {
  pairs.validate();
  spec.validate();
  if (spec.kind == KernelSpec::Kind::gaussian && !(spec.scale > 0.0))
    spec.scale = median_pairwise_distance(pairs.x_matrix);

  const Matrix gram = detail::kernel_gram(spec, pairs.x_matrix, pairs.x_matrix);
  const Matrix amat = detail::kernel_gram(spec, pairs.y_matrix, pairs.x_matrix);

  const EigenResult gram_eig = eig_symmetric(gram);  // also enforces symmetry
  const Eigen::Index m1 = gram.rows();
  Vector sigma(m1);
  for (Eigen::Index k = 0; k < m1; ++k)
    sigma(k) = std::sqrt(std::max(gram_eig.eigenvalues(k).real(), 0.0));
  const double sigma_max = sigma(0);
  if (!(sigma_max > 0.0)) throw RankZero("fit: Gram matrix is numerically zero");
  int r = 0;
  while (r < m1 && sigma(r) > trunc_tol * sigma_max) ++r;
  if (r == 0) throw RankZero("fit: no singular values above truncation tolerance");

  const Matrix q = gram_eig.eigenvectors.real().leftCols(r);
  const Vector s = sigma.head(r);
  const Vector s_inv = s.cwiseInverse();

  const Matrix k_hat =
      s_inv.asDiagonal() * (q.transpose() * amat * q) * s_inv.asDiagonal();
  const EigenResult k_eig = eig_general(k_hat);

  KdmdModel model;
  model.kernel = spec;
  model.rank = r;
  model.eigenvalues = k_eig.eigenvalues;
  const ComplexMatrix v_hat = k_eig.eigenvectors;
  const ComplexMatrix phi = (q * s.asDiagonal()).cast<std::complex<double>>() * v_hat;
  model.eigfun_coeffs = (q * s_inv.asDiagonal()).cast<std::complex<double>>() * v_hat;
  model.basis = pairs.x_matrix;

  // Xi^T = Phi^+ X^T (plain transposes; minimizes ||X - Xi Phi^T||_F)
  const ComplexMatrix xt = pairs.x_matrix.transpose().cast<std::complex<double>>();
  model.modes = lstsq(phi, xt).transpose();
  return model;
}

/// Eigenfunction values at an arbitrary state: kernel row against the
/// retained basis times the coefficient matrix.
inline ComplexVector eigenfunctions(const KdmdModel& model, const Vector& state) {
  if (state.size() != model.basis.rows())
    throw LengthMismatch("eigenfunctions: state length does not match basis");
  Eigen::RowVectorXd row(model.basis.cols());
  for (Eigen::Index j = 0; j < model.basis.cols(); ++j)
    row(j) = kernel_eval(model.kernel, state, model.basis.col(j));
  return (row.cast<std::complex<double>>() * model.eigfun_coeffs).transpose();
}

/// Zero-step reconstruction sum_k xi_k phi_k(state).
inline Vector reconstruct(const KdmdModel& model, const Vector& state) {
  return (model.modes * eigenfunctions(model, state)).real();
}

/// Forward prediction: step n is Re(sum_k lambda_k^n xi_k phi_k(entry)).
inline std::vector<Vector> predict(const KdmdModel& model, const Vector& entry,
                                   int horizon) {
  if (horizon < 1) throw std::invalid_argument("predict: horizon must be >= 1");
  ComplexVector coeff = eigenfunctions(model, entry);
  std::vector<Vector> out;
  out.reserve(horizon);
  for (int n = 1; n <= horizon; ++n) {
    coeff.array() *= model.eigenvalues.array();
    out.push_back((model.modes * coeff).real());
  }
  return out;
}

}  // namespace rbc
