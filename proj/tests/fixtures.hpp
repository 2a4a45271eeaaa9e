#pragma once

#include <vector>

#include "sideobs/sideobs.hpp"

namespace fx {

using sideobs::Graph;
using sideobs::Instance;
using sideobs::Matrix;
using sideobs::Vector;

inline Matrix axis_contexts() {
  Matrix m(2, 2);
  m << 1.0, 0.0, 0.0, 1.0;
  return m;
}

inline Vector theta_a() {
  Vector t(2);
  t << 1.0, 0.1;
  return t;
}

inline Instance on_graph(const Graph& g, double sigma = 0.0) {
  return Instance(g, axis_contexts(), std::vector<Vector>(g.size(), theta_a()), sigma);
}

// single node
inline Instance inst_a(double sigma = 0.0) { return on_graph(Graph(1), sigma); }
// two connected nodes
inline Instance inst_b(double sigma = 0.0) { return on_graph(Graph::complete(2), sigma); }
// two isolated nodes
inline Instance inst_c(double sigma = 0.0) { return on_graph(Graph(2), sigma); }

inline sideobs::PolicyOptions learner(double sigma) {
  sideobs::PolicyOptions o;
  o.sigma = sigma;
  return o;
}

inline Graph path3() {
  std::vector<Graph::Edge> e{{0, 1}, {1, 2}};
  return Graph(3, e);
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

}  // namespace fx
