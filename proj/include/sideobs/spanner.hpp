#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "sideobs/errors.hpp"
#include "sideobs/graph.hpp"
#include "sideobs/linalg.hpp"

namespace sideobs {

/// A C-approximate barycentric spanner: every context is a combination of
/// the basis contexts with coefficients in [-C, C].
struct Spanner {
  std::vector<std::size_t> basis;  // row indices into the context matrix
  double approx_factor = 1.0;
  std::size_t swaps = 0;

  std::size_t size() const { return basis.size(); }
};

/// Determinant-swap construction. Works in span coordinates, so
/// rank-deficient context sets yield a basis of size rank. Replacing basis
/// vector k by u scales |det| by |coef_k(u)| (Cramer), so a swap is taken
/// whenever some coefficient exceeds C.
inline Spanner barycentric_spanner(const Matrix& contexts, double C = 1.0) {
  if (!(C >= 1.0)) throw std::invalid_argument("spanner approximation factor must be >= 1");
  const ContextSpan span = context_span(contexts);
  if (span.rank == 0) throw degenerate_contexts_error("context set spans only the origin");
  const Matrix x = span.project(contexts);  // n x r
  const std::size_t n = static_cast<std::size_t>(x.rows()), r = span.rank;

  // Full-rank start by pivoted Gram-Schmidt.
  Spanner sp;
  sp.approx_factor = C;
  {
    Matrix resid = x;
    std::vector<bool> used(n, false);
    for (std::size_t step = 0; step < r; ++step) {
      std::size_t best = n;
      double best_norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        const double nn = resid.row(static_cast<Eigen::Index>(j)).norm();
        if (nn > best_norm) {
          best_norm = nn;
          best = j;
        }
      }
      used[best] = true;
      sp.basis.push_back(best);
      const Vector q = resid.row(static_cast<Eigen::Index>(best)).transpose() / best_norm;
      resid -= (resid * q) * q.transpose();
    }
  }

  const double accept = C * (1.0 + 1e-9);
  const std::size_t cap = 10 * n * static_cast<std::size_t>(contexts.cols());
  auto basis_matrix = [&] {
    Matrix b(r, r);
    for (std::size_t k = 0; k < r; ++k) b.col(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(sp.basis[k])).transpose();
    return b;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    const Eigen::PartialPivLU<Matrix> lu(basis_matrix());
    const Matrix coef = lu.solve(x.transpose());  // r x n
    for (std::size_t j = 0; j < n && !changed; ++j) {
      Eigen::Index k = 0;
      const double m = coef.col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff(&k);
      if (m > accept) {
        sp.basis[static_cast<std::size_t>(k)] = j;
        ++sp.swaps;
        changed = true;
      }
    }
    if (changed && sp.swaps > cap) throw non_convergence_error("barycentric spanner swap cap exceeded");
  }
  return sp;
}

struct SpannerCheck {
  double max_coefficient = 0.0;
  double max_residual = 0.0;
};

/// Represents every context in the basis (rows of `basis`) by least squares
/// and reports the largest absolute coefficient and residual.
inline SpannerCheck verify_spanner(const Matrix& contexts, const Matrix& basis) {
  if (basis.cols() != contexts.cols()) throw std::invalid_argument("basis dimension mismatch");
  const Matrix w = basis.transpose();  // d x r
  Eigen::ColPivHouseholderQR<Matrix> qr(w);
  qr.setThreshold(1e-10);
  if (qr.rank() != w.cols()) throw std::invalid_argument("spanner basis is not linearly independent");
  SpannerCheck out;
  for (Eigen::Index j = 0; j < contexts.rows(); ++j) {
    const Vector u = contexts.row(j).transpose();
    const Vector a = qr.solve(u);
    out.max_coefficient = std::max(out.max_coefficient, a.cwiseAbs().maxCoeff());
    out.max_residual = std::max(out.max_residual, (w * a - u).norm());
  }
  return out;
}

inline Matrix basis_rows(const Matrix& contexts, const Spanner& sp) {
  Matrix b(static_cast<Eigen::Index>(sp.size()), contexts.cols());
  for (std::size_t k = 0; k < sp.size(); ++k) b.row(static_cast<Eigen::Index>(k)) = contexts.row(static_cast<Eigen::Index>(sp.basis[k]));
  return b;
}

inline SpannerCheck verify_spanner(const Matrix& contexts, const Spanner& sp) {
  return verify_spanner(contexts, basis_rows(contexts, sp));
}

/// Every (node, basis context) arm, node-major; ids assume a catalog of
/// `n_contexts` contexts shared by all nodes.
inline std::vector<ArmId> lift_to_arms(const Spanner& sp, const Graph& g, std::size_t n_contexts) {
  std::vector<ArmId> out;
  out.reserve(g.size() * sp.size());
  for (NodeId i = 0; i < g.size(); ++i)
    for (std::size_t c : sp.basis) out.push_back(i * n_contexts + c);
  return out;
}

}  // namespace sideobs
