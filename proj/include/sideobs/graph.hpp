#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sideobs/linalg.hpp"

namespace sideobs {

/// Undirected observation graph. Every node is its own neighbor; only cross
/// edges are stored explicitly.
class Graph {
 public:
  using Edge = std::pair<NodeId, NodeId>;

  explicit Graph(std::size_t n_nodes) : n_(n_nodes), adj_(n_nodes * n_nodes, false), nbrs_(n_nodes) {
    if (n_nodes == 0) throw std::invalid_argument("graph needs at least one node");
    for (NodeId i = 0; i < n_; ++i) adj_[i * n_ + i] = true;
    rebuild();
  }

  Graph(std::size_t n_nodes, std::span<const Edge> edges) : Graph(n_nodes) {
    for (auto [i, j] : edges) {
      if (i >= n_ || j >= n_) throw std::invalid_argument("edge endpoint out of range");
      adj_[i * n_ + j] = adj_[j * n_ + i] = true;
    }
    rebuild();
  }

  static Graph complete(std::size_t n) {
    std::vector<Edge> e;
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = i + 1; j < n; ++j) e.emplace_back(i, j);
    return Graph(n, e);
  }

  std::size_t size() const { return n_; }

  bool adjacent(NodeId i, NodeId j) const {
    check(i);
    check(j);
    return adj_[i * n_ + j];
  }

  /// Neighborhood including the node itself, ascending.
  const std::vector<NodeId>& neighbors(NodeId i) const {
    check(i);
    return nbrs_[i];
  }

  /// Cross edges (i < j), lexicographic.
  std::vector<Edge> cross_edges() const {
    std::vector<Edge> e;
    for (NodeId i = 0; i < n_; ++i)
      for (NodeId j = i + 1; j < n_; ++j)
        if (adj_[i * n_ + j]) e.emplace_back(i, j);
    return e;
  }

  std::size_t cross_edge_count() const {
    std::size_t c = 0;
    for (const auto& nb : nbrs_) c += nb.size() - 1;
    return c / 2;
  }

  /// Same node set, self-loops only.
  Graph without_side_observations() const { return Graph(n_); }

  bool operator==(const Graph& o) const { return n_ == o.n_ && adj_ == o.adj_; }

 private:
  void check(NodeId i) const {
    if (i >= n_) throw std::invalid_argument("node id " + std::to_string(i) + " out of range");
  }

  void rebuild() {
    for (NodeId i = 0; i < n_; ++i) {
      nbrs_[i].clear();
      for (NodeId j = 0; j < n_; ++j)
        if (adj_[i * n_ + j]) nbrs_[i].push_back(j);
    }
  }

  std::size_t n_;
  std::vector<bool> adj_;
  std::vector<std::vector<NodeId>> nbrs_;
};

/// G(n, p): each unordered cross pair independently with probability p,
/// pairs visited in lexicographic order.
inline Graph erdos_renyi(std::size_t n, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("edge probability must lie in [0,1]");
  if (n == 0) throw std::invalid_argument("graph needs at least one node");
  std::bernoulli_distribution coin(p);
  std::vector<Graph::Edge> e;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (coin(rng)) e.emplace_back(i, j);
  return Graph(n, e);
}

inline bool is_dominating(const Graph& g, std::span<const NodeId> candidate) {
  std::vector<bool> covered(g.size(), false);
  for (NodeId s : candidate)
    for (NodeId j : g.neighbors(s)) covered[j] = true;
  return std::all_of(covered.begin(), covered.end(), [](bool c) { return c; });
}

namespace detail {

inline std::vector<NodeId> exact_dominating_set(const Graph& g) {
  const std::size_t n = g.size();
  std::vector<std::uint32_t> cover(n, 0);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j : g.neighbors(i)) cover[i] |= (1u << j);
  const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1u);

  for (std::size_t k = 1; k <= n; ++k) {
    // Gosper's hack: all k-subsets of n bits in increasing numeric order.
    std::uint32_t s = (1u << k) - 1u;
    const std::uint32_t limit = 1u << n;
    while (s < limit) {
      std::uint32_t acc = 0;
      for (std::uint32_t m = s; m != 0; m &= m - 1) acc |= cover[std::countr_zero(m)];
      if (acc == full) {
        std::vector<NodeId> out;
        for (std::uint32_t m = s; m != 0; m &= m - 1) out.push_back(static_cast<NodeId>(std::countr_zero(m)));
        return out;
      }
      const std::uint32_t c = s & (~s + 1u);
      const std::uint32_t r = s + c;
      s = (((r ^ s) >> 2) / c) | r;
    }
  }
  return {};  // unreachable: the full node set dominates
}

inline std::vector<NodeId> greedy_dominating_set(const Graph& g) {
  const std::size_t n = g.size();
  std::vector<bool> covered(n, false);
  std::size_t remaining = n;
  std::vector<NodeId> out;
  while (remaining > 0) {
    NodeId best = 0;
    std::size_t best_gain = 0;
    for (NodeId i = 0; i < n; ++i) {
      std::size_t gain = 0;
      for (NodeId j : g.neighbors(i)) gain += covered[j] ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    out.push_back(best);
    for (NodeId j : g.neighbors(best)) {
      if (!covered[j]) {
        covered[j] = true;
        --remaining;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline constexpr std::size_t kExactDominationLimit = 20;

/// Minimum dominating set for graphs up to kExactDominationLimit nodes,
/// greedy max-coverage above that. Result is sorted.
inline std::vector<NodeId> dominating_set(const Graph& g) {
  if (g.size() <= kExactDominationLimit) return detail::exact_dominating_set(g);
  return detail::greedy_dominating_set(g);
}

}  // namespace sideobs
