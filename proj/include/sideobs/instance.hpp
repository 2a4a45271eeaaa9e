#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sideobs/errors.hpp"
#include "sideobs/graph.hpp"
#include "sideobs/linalg.hpp"

namespace sideobs {

/// A (node, context) pair. Arms are densely numbered node-major:
/// id = node * n_contexts + context.
struct Arm {
  NodeId node = 0;
  std::size_t context = 0;
  ArmId id = 0;
};

/// Ground-truth problem: a graph, a context catalog shared by every node,
/// and one hidden coefficient vector per node.
class Instance {
 public:
  Instance(Graph graph, Matrix contexts, std::vector<Vector> thetas, double noise_sigma)
      : graph_(std::move(graph)), contexts_(std::move(contexts)), thetas_(std::move(thetas)), sigma_(noise_sigma) {
    if (contexts_.cols() < 1) throw std::invalid_argument("context dimension must be >= 1");
    if (contexts_.rows() < 1) throw std::invalid_argument("every node needs at least one arm");
    if (!contexts_.allFinite()) throw std::invalid_argument("contexts must be finite");
    if (thetas_.size() != graph_.size()) throw std::invalid_argument("need one coefficient vector per node");
    for (const auto& th : thetas_) {
      if (th.size() != contexts_.cols()) throw std::invalid_argument("coefficient dimension mismatch");
      if (!th.allFinite()) throw std::invalid_argument("coefficients must be finite");
    }
    if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) throw std::invalid_argument("noise sigma must be >= 0");

    means_ = Matrix(graph_.size(), contexts_.rows());
    for (NodeId i = 0; i < graph_.size(); ++i) means_.row(static_cast<Eigen::Index>(i)) = (contexts_ * thetas_[i]).transpose();

    optimal_.resize(graph_.size());
    for (NodeId i = 0; i < graph_.size(); ++i) {
      const auto row = means_.row(static_cast<Eigen::Index>(i));
      Eigen::Index best = 0;
      row.maxCoeff(&best);
      const double top = row(best);
      const double tol = 1e-12 * std::max(1.0, std::abs(top));
      for (Eigen::Index k = 0; k < row.size(); ++k) {
        if (k != best && row(k) >= top - tol)
          throw degenerate_instance_error("node " + std::to_string(i) + " has more than one optimal arm");
      }
      optimal_[i] = static_cast<std::size_t>(best);
    }
  }

  const Graph& graph() const { return graph_; }
  std::size_t n_nodes() const { return graph_.size(); }
  std::size_t n_contexts() const { return static_cast<std::size_t>(contexts_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(contexts_.cols()); }
  std::size_t n_arms() const { return n_nodes() * n_contexts(); }
  double noise_sigma() const { return sigma_; }

  const Matrix& contexts() const { return contexts_; }
  Vector context(std::size_t k) const { return contexts_.row(static_cast<Eigen::Index>(k)).transpose(); }
  const std::vector<Vector>& thetas() const { return thetas_; }
  const Vector& theta(NodeId i) const { return thetas_.at(i); }

  Arm arm(ArmId id) const {
    if (id >= n_arms()) throw std::invalid_argument("arm id out of range");
    return Arm{id / n_contexts(), id % n_contexts(), id};
  }
  ArmId arm_id(NodeId node, std::size_t context) const { return node * n_contexts() + context; }

  /// Context index of the unique optimal arm at a node.
  std::size_t optimal_context(NodeId i) const { return optimal_.at(i); }

  /// Mean responses: row = responding node, column = context.
  const Matrix& means() const { return means_; }

  /// Same contexts and coefficients on a different graph.
  Instance with_graph(Graph g) const { return Instance(std::move(g), contexts_, thetas_, sigma_); }

 private:
  Graph graph_;
  Matrix contexts_;  // n_contexts x d
  std::vector<Vector> thetas_;
  double sigma_;
  Matrix means_;
  std::vector<std::size_t> optimal_;
};

inline double mean_reward(const Instance& inst, const Arm& a) {
  return inst.means()(static_cast<Eigen::Index>(a.node), static_cast<Eigen::Index>(a.context));
}

/// Suboptimality gaps. Per-node and global extrema range over suboptimal
/// arms only and are absent when no suboptimal arm exists.
struct GapTable {
  std::vector<double> gap;        // indexed by arm id
  std::vector<bool> suboptimal;   // gap > 0
  std::vector<std::optional<double>> node_min, node_max;
  std::optional<double> min, max;

  double sum_node_max() const {
    double s = 0.0;
    for (const auto& m : node_max) s += m.value_or(0.0);
    return s;
  }
};

inline GapTable gaps(const Instance& inst) {
  GapTable t;
  const std::size_t n = inst.n_nodes(), k = inst.n_contexts();
  t.gap.resize(inst.n_arms());
  t.suboptimal.resize(inst.n_arms());
  t.node_min.resize(n);
  t.node_max.resize(n);
  for (NodeId i = 0; i < n; ++i) {
    const auto row = inst.means().row(static_cast<Eigen::Index>(i));
    const double best = row(static_cast<Eigen::Index>(inst.optimal_context(i)));
    for (std::size_t c = 0; c < k; ++c) {
      const ArmId a = inst.arm_id(i, c);
      const bool sub = c != inst.optimal_context(i);
      const double g = sub ? best - row(static_cast<Eigen::Index>(c)) : 0.0;
      t.gap[a] = g;
      t.suboptimal[a] = sub;
      if (!sub) continue;
      t.node_min[i] = t.node_min[i] ? std::min(*t.node_min[i], g) : g;
      t.node_max[i] = t.node_max[i] ? std::max(*t.node_max[i], g) : g;
      t.min = t.min ? std::min(*t.min, g) : g;
      t.max = t.max ? std::max(*t.max, g) : g;
    }
  }
  return t;
}

/// One round of feedback. For every player node i, one value per neighbor j
/// (in graph.neighbors(i) order): the response of j to the context i played.
/// The entry for j == i is the player's own reward. Refers to the graph it
/// was drawn on, which must outlive it.
class RoundObservations {
 public:
  RoundObservations() = default;
  explicit RoundObservations(const Graph& g) : graph_(&g), values_(g.size()) {
    for (NodeId i = 0; i < g.size(); ++i) values_[i].resize(g.neighbors(i).size());
  }

  const Graph& graph() const { return *graph_; }

  /// Response of `responder` to the arm played at `player`.
  double at(NodeId player, NodeId responder) const {
    const auto& nb = graph_->neighbors(player);
    auto it = std::lower_bound(nb.begin(), nb.end(), responder);
    if (it == nb.end() || *it != responder) throw std::invalid_argument("no observation for a non-adjacent pair");
    return values_[player][static_cast<std::size_t>(it - nb.begin())];
  }

  double reward(NodeId i) const { return at(i, i); }

  /// Values for one player, aligned with graph().neighbors(player).
  const std::vector<double>& from(NodeId player) const { return values_.at(player); }
  std::vector<double>& from(NodeId player) { return values_.at(player); }

  std::size_t count() const {
    std::size_t c = 0;
    for (const auto& v : values_) c += v.size();
    return c;
  }

 private:
  const Graph* graph_ = nullptr;
  std::vector<std::vector<double>> values_;
};

/// Draws one round of rewards and side-observations. `played[i]` is the arm
/// id played at node i. Noise draws are consumed player-major, neighbor
/// ascending.
inline RoundObservations observe(const Instance& inst, std::span<const ArmId> played, Rng& rng) {
  const Graph& g = inst.graph();
  if (played.size() != inst.n_nodes()) throw std::invalid_argument("play map must cover every node");
  RoundObservations obs(g);
  std::normal_distribution<double> z(0.0, 1.0);
  const double sigma = inst.noise_sigma();
  for (NodeId i = 0; i < inst.n_nodes(); ++i) {
    const Arm a = inst.arm(played[i]);
    if (a.node != i) throw std::invalid_argument("arm played at node " + std::to_string(i) + " belongs elsewhere");
    const auto& nb = g.neighbors(i);
    auto& out = obs.from(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const double mean = inst.means()(static_cast<Eigen::Index>(nb[k]), static_cast<Eigen::Index>(a.context));
      out[k] = sigma > 0.0 ? mean + sigma * z(rng) : mean;
    }
  }
  return obs;
}

inline constexpr int kInstanceResampleCap = 1000;

/// Random instance: coefficient vectors and a shared set of contexts drawn
/// uniformly from [0,1]^d, graph from G(n, p). Contexts and coefficients are
/// redrawn until every node has a unique optimal arm.
inline Instance sample_instance(std::size_t d, std::size_t n_users, std::size_t k_contexts, double edge_prob,
                                double noise_sigma, Rng& rng) {
  if (d < 1 || n_users < 1 || k_contexts < 1) throw std::invalid_argument("d, n_users and k_contexts must be >= 1");
  Graph g = erdos_renyi(n_users, edge_prob, rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < kInstanceResampleCap; ++attempt) {
    std::vector<Vector> thetas(n_users, Vector(d));
    for (auto& th : thetas)
      for (Eigen::Index c = 0; c < th.size(); ++c) th(c) = unif(rng);
    Matrix ctx(k_contexts, d);
    for (Eigen::Index r = 0; r < ctx.rows(); ++r)
      for (Eigen::Index c = 0; c < ctx.cols(); ++c) ctx(r, c) = unif(rng);
    try {
      return Instance(g, std::move(ctx), std::move(thetas), noise_sigma);
    } catch (const degenerate_instance_error&) {
    }
  }
  throw degenerate_instance_error("no instance with unique optimal arms after resample cap");
}

}  // namespace sideobs
