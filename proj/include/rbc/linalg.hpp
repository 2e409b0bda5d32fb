#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "rbc/errors.hpp"
#include "rbc/grid.hpp"

namespace rbc {

using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Eigendecomposition result; column k of eigenvectors pairs with
/// eigenvalues(k). Pairs satisfy ||M v - lambda v|| <= 1e-8 ||M||_F ||v||.
struct EigenResult {
  ComplexVector eigenvalues;
  ComplexMatrix eigenvectors;
};

namespace detail {

inline EigenResult sort_pairs_by_modulus(ComplexVector lam, ComplexMatrix vec) {
  const int n = static_cast<int>(lam.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(lam(a)), mb = std::abs(lam(b));
    if (ma != mb) return ma > mb;
    if (lam(a).real() != lam(b).real()) return lam(a).real() > lam(b).real();
    return lam(a).imag() > lam(b).imag();
  });
  EigenResult out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(vec.rows(), n);
  for (int k = 0; k < n; ++k) {
    out.eigenvalues(k) = lam(order[k]);
    out.eigenvectors.col(k) = vec.col(order[k]);
  }
  return out;
}

}  // namespace detail

/// All eigenpairs of a real square matrix, sorted by descending |lambda|.
inline EigenResult eig_general(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("eig_general: matrix not square");
  if (!m.allFinite()) throw std::invalid_argument("eig_general: non-finite input");
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success)
    throw NoConvergence("eig_general: eigensolver failed to converge");
  return detail::sort_pairs_by_modulus(solver.eigenvalues(),
                                       solver.eigenvectors());
}

/// Eigenpairs of a real symmetric matrix: real eigenvalues in descending
/// order, orthonormal eigenvectors. Rejects inputs with relative asymmetry
/// above 1e-9 in Frobenius norm.
inline EigenResult eig_symmetric(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("eig_symmetric: matrix not square");
  const double asym = (m - m.transpose()).norm();
  if (asym > 1e-9 * std::max(m.norm(), 1e-300))
    throw NotSymmetric("eig_symmetric: asymmetry " + std::to_string(asym) +
                       " exceeds 1e-9 * ||M||_F");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(
      0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success)
    throw NoConvergence("eig_symmetric: eigensolver failed to converge");
  const int n = static_cast<int>(m.rows());
  EigenResult out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (int k = 0; k < n; ++k) {  // ascending -> descending
    out.eigenvalues(k) = solver.eigenvalues()(n - 1 - k);
    out.eigenvectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

/// Minimum-norm least-squares solution of A X = B (complex, rank-revealing).
inline ComplexMatrix lstsq(const ComplexMatrix& a, const ComplexMatrix& b) {
  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(a);
  return cod.solve(b);
}

inline Matrix lstsq(const Matrix& a, const Matrix& b) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return cod.solve(b);
}

}  // namespace rbc
