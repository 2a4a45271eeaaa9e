#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sideobs/graph.hpp"
#include "sideobs/instance.hpp"
#include "sideobs/planner.hpp"

namespace sideobs {

using json = nlohmann::json;

/// {"n": int, "edges": [[i, j], ...]} with cross edges only.
inline json to_json(const Graph& g) {
  json edges = json::array();
  for (auto [i, j] : g.cross_edges()) edges.push_back({i, j});
  return {{"n", g.size()}, {"edges", edges}};
}

inline Graph graph_from_json(const json& j) {
  const auto n = j.at("n").get<std::size_t>();
  std::vector<Graph::Edge> edges;
  for (const auto& e : j.value("edges", json::array())) {
    if (!e.is_array() || e.size() != 2) throw std::invalid_argument("edge must be a pair of node ids");
    edges.emplace_back(e[0].get<NodeId>(), e[1].get<NodeId>());
  }
  return Graph(n, edges);
}

namespace detail {

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

inline Vector vector_from_json(const json& a) {
  const auto xs = a.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace detail

/// {"graph": ..., "contexts": [[...]], "thetas": [[...]], "sigma": x}.
inline json to_json(const Instance& inst) {
  json ctx = json::array(), th = json::array();
  for (std::size_t c = 0; c < inst.n_contexts(); ++c) ctx.push_back(detail::vector_json(inst.context(c)));
  for (const auto& t : inst.thetas()) th.push_back(detail::vector_json(t));
  return {{"graph", to_json(inst.graph())}, {"contexts", ctx}, {"thetas", th}, {"sigma", inst.noise_sigma()}};
}

inline Instance instance_from_json(const json& j) {
  Graph g = graph_from_json(j.at("graph"));
  const auto& ctx = j.at("contexts");
  if (!ctx.is_array() || ctx.empty()) throw std::invalid_argument("instance needs a nonempty context list");
  const Vector first = detail::vector_from_json(ctx[0]);
  Matrix m(static_cast<Eigen::Index>(ctx.size()), first.size());
  for (std::size_t r = 0; r < ctx.size(); ++r) {
    const Vector v = detail::vector_from_json(ctx[r]);
    if (v.size() != first.size()) throw std::invalid_argument("contexts must share one dimension");
    m.row(static_cast<Eigen::Index>(r)) = v.transpose();
  }
  std::vector<Vector> thetas;
  for (const auto& t : j.at("thetas")) thetas.push_back(detail::vector_from_json(t));
  return Instance(std::move(g), std::move(m), std::move(thetas), j.value("sigma", 0.1));
}

/// {"beta": {"<arm id>": b, ...}, "objective": x, "violation": v, ...}.
inline json to_json(const AllocationPlan& p) {
  json beta = json::object();
  for (std::size_t a = 0; a < p.beta.size(); ++a) beta[std::to_string(a)] = p.beta[a];
  return {{"beta", beta},
          {"objective", p.objective},
          {"violation", p.max_constraint_violation},
          {"solver_iterations", p.solver_iterations},
          {"optimal", p.optimal}};
}

inline AllocationPlan plan_from_json(const json& j) {
  AllocationPlan p;
  const auto& beta = j.at("beta");
  p.beta.assign(beta.size(), 0.0);
  for (const auto& [key, val] : beta.items()) {
    const auto a = std::stoul(key);
    if (a >= p.beta.size()) throw std::invalid_argument("plan arm ids must be dense");
    p.beta[a] = val.get<double>();
  }
  p.objective = j.at("objective").get<double>();
  p.max_constraint_violation = j.value("violation", 0.0);
  p.solver_iterations = j.value("solver_iterations", 0);
  p.optimal = j.value("optimal", true);
  return p;
}

}  // namespace sideobs
