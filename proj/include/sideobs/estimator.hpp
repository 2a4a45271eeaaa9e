#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "sideobs/errors.hpp"
#include "sideobs/graph.hpp"
#include "sideobs/instance.hpp"
#include "sideobs/linalg.hpp"

namespace sideobs {

/// Pooled least-squares state: node i accumulates every (context, response)
/// pair it observed, i.e. its own plays and its neighbors' plays.
class GramState {
 public:
  GramState(std::size_t n_nodes, std::size_t dim)
      : gram_(n_nodes, Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
        resp_(n_nodes, Vector::Zero(static_cast<Eigen::Index>(dim))),
        dim_(dim) {}

  std::size_t n_nodes() const { return gram_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t rounds() const { return rounds_; }

  const Matrix& gram(NodeId i) const { return gram_.at(i); }
  const Vector& response(NodeId i) const { return resp_.at(i); }

  /// `played[j]` is the feature vector of the context node j played;
  /// `graph` decides which observations are pooled and must be a subgraph of
  /// the graph `obs` was drawn on.
  void ingest_round(const Graph& graph, std::span<const Vector> played, const RoundObservations& obs) {
    if (graph.size() != n_nodes() || played.size() != n_nodes())
      throw std::invalid_argument("play map does not match node count");
    for (const auto& u : played)
      if (static_cast<std::size_t>(u.size()) != dim_) throw std::invalid_argument("feature dimension mismatch");
    for (NodeId j = 0; j < n_nodes(); ++j) {
      const Vector& u = played[j];
      const Matrix outer = u * u.transpose();
      for (NodeId i : graph.neighbors(j)) {
        gram_[i].noalias() += outer;
        resp_[i].noalias() += obs.at(j, i) * u;
      }
    }
    ++rounds_;
  }

  /// G_i^{-1} b_i, or the minimum-norm least-squares solution when G_i is
  /// singular.
  Vector theta_hat(NodeId i) const {
    const Matrix& g = gram_.at(i);
    if (auto x = detail::solve_spd(g, resp_[i])) return *x;
    return detail::pseudo_solve_psd(g, resp_[i]);
  }

  double mu_hat(NodeId i, const Vector& feature) const { return feature.dot(theta_hat(i)); }

  /// x^T G_i^{-1} x.
  double gram_norm(NodeId i, const Vector& x) const {
    auto y = detail::solve_spd(gram_.at(i), x);
    if (!y) throw singular_gram_error("Gram matrix of node " + std::to_string(i) + " is singular");
    return x.dot(*y);
  }

 private:
  std::vector<Matrix> gram_;
  std::vector<Vector> resp_;
  std::size_t dim_;
  std::size_t rounds_ = 0;
};

/// Confidence half-width after t pooled rounds,
/// sigma * sqrt(2 log(T * total_arms / delta) * d / t), clamped at 0.
inline double confidence_radius(double t, double horizon, std::size_t total_arms, double delta, std::size_t d,
                                double sigma = 1.0) {
  if (!(t >= 1.0)) throw std::invalid_argument("confidence radius needs t >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (total_arms < 1) throw std::invalid_argument("need at least one arm");
  const double l = std::log(horizon * static_cast<double>(total_arms) / delta);
  if (!(l > 0.0)) return 0.0;
  return sigma * std::sqrt(2.0 * l * static_cast<double>(d) / t);
}

inline void check_threshold_arg(double t, double c) {
  if (!(t > std::numbers::e)) throw std::invalid_argument("threshold functions need t > e");
  if (!(c > 0.0)) throw std::invalid_argument("threshold constant must be positive");
}

/// Exploration scale 2 log t + c d log(d log t) + 2.
inline double f_of(double t, double c, std::size_t d) {
  check_threshold_arg(t, c);
  const double lt = std::log(t), dd = static_cast<double>(d);
  return 2.0 * lt + c * dd * std::log(dd * lt) + 2.0;
}

/// Detector scale 2 log log t + 2 log log t / log t + c d log(d log t).
inline double g_of(double t, double c, std::size_t d) {
  check_threshold_arg(t, c);
  const double lt = std::log(t), llt = std::log(lt), dd = static_cast<double>(d);
  return 2.0 * llt + 2.0 * llt / lt + c * dd * std::log(dd * lt);
}

/// Estimated mean of every context at one node.
inline Vector node_mean_estimates(const GramState& s, const Matrix& features, NodeId i) {
  return features * s.theta_hat(i);
}

/// Lowest-index argmax.
inline std::size_t argmax_lowest(const Vector& v) {
  std::size_t best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (v(k) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(k);
  return best;
}

/// Estimated gap of every arm (node-major ids). At each node exactly the
/// lowest-index estimated maximizer gets zero.
inline std::vector<double> gap_estimates(const GramState& s, const Matrix& features) {
  const std::size_t k = static_cast<std::size_t>(features.rows());
  std::vector<double> out(s.n_nodes() * k);
  for (NodeId i = 0; i < s.n_nodes(); ++i) {
    const Vector mu = node_mean_estimates(s, features, i);
    const std::size_t best = argmax_lowest(mu);
    for (std::size_t c = 0; c < k; ++c)
      out[i * k + c] = (c == best) ? 0.0 : mu(static_cast<Eigen::Index>(best)) - mu(static_cast<Eigen::Index>(c));
  }
  return out;
}

/// Detector tolerance: sigma * max_a ||u_a||_{G^{-1}} * sqrt(g(T)).
inline double epsilon_T(const GramState& s, const Matrix& features, double horizon, double c, std::size_t d,
                        double sigma = 1.0) {
  double worst = 0.0;
  for (NodeId i = 0; i < s.n_nodes(); ++i)
    for (Eigen::Index r = 0; r < features.rows(); ++r)
      worst = std::max(worst, s.gram_norm(i, features.row(r).transpose()));
  return sigma * std::sqrt(worst) * std::sqrt(g_of(horizon, c, d));
}

}  // namespace sideobs
