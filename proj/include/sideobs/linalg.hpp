#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>

#include <Eigen/Dense>

#include "sideobs/errors.hpp"

namespace sideobs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

using NodeId = std::size_t;
using ArmId = std::size_t;

namespace detail {

// Relative threshold below which an eigenvalue of a PSD matrix counts as zero.
inline constexpr double kRankTol = 1e-10;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Solves G x = b for symmetric positive definite G; empty when G is
/// numerically singular.
inline std::optional<Vector> solve_spd(const Matrix& g, const Vector& b) {
  Eigen::LDLT<Matrix> ldlt(g);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  const Vector d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() <= kRankTol * dmax) return std::nullopt;
  return Vector(ldlt.solve(b));
}

/// Minimum-norm solution of G x = b for symmetric PSD G.
inline Vector pseudo_solve_psd(const Matrix& g, const Vector& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  const Vector& lam = es.eigenvalues();
  const double lmax = lam.cwiseAbs().maxCoeff();
  Vector x = Vector::Zero(g.rows());
  if (!(lmax > 0.0)) return x;
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam(k) > kRankTol * lmax) {
      const Vector v = es.eigenvectors().col(k);
      x += (v.dot(b) / lam(k)) * v;
    }
  }
  return x;
}

}  // namespace detail

/// Orthonormal coordinates for the linear span of a set of row vectors.
/// When the rows already span the ambient space the basis is the identity,
/// so full-rank inputs keep their original coordinates.
struct ContextSpan {
  Matrix basis;  // d x r, orthonormal columns
  std::size_t rank = 0;

  bool full_rank() const { return rank == static_cast<std::size_t>(basis.rows()); }

  /// Rows expressed in span coordinates (n x r).
  Matrix project(const Matrix& rows) const {
    if (full_rank()) return rows;
    return rows * basis;
  }
  Vector project(const Vector& v) const {
    if (full_rank()) return v;
    return basis.transpose() * v;
  }
};

inline ContextSpan context_span(const Matrix& rows) {
  const auto d = rows.cols();
  ContextSpan span;
  if (rows.rows() == 0 || rows.cwiseAbs().maxCoeff() == 0.0) {
    span.basis = Matrix(d, 0);
    return span;
  }
  Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  std::size_t r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > 1e-10 * sv(0)) ++r;
  span.rank = r;
  if (r == static_cast<std::size_t>(d)) {
    span.basis = Matrix::Identity(d, d);
  } else {
    span.basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(r));
  }
  return span;
}

}  // namespace sideobs
