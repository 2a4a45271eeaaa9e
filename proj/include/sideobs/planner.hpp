#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "sideobs/errors.hpp"
#include "sideobs/graph.hpp"
#include "sideobs/instance.hpp"
#include "sideobs/linalg.hpp"
#include "sideobs/spanner.hpp"

namespace sideobs {

struct SolverOptions {
  double beta_cap = 1e6;          // fixed budget of every zero-cost arm
  double feas_tol = 1e-6;         // absolute slack tolerance
  double gap_tol = 1e-5;          // stop once the duality gap is this fraction of the objective
  int max_outer = 60;
  double barrier_decrease = 0.2;  // barrier weight multiplier per outer iteration
  int max_inner = 500;            // Newton steps per outer iteration
};

/// min sum_a beta_a gap_a  s.t.  scale * ||u_a||^2_{H_{i_a}(beta)^{-1}} <= gap_a^2 / 2
/// for every arm with positive gap, beta >= 0, where
/// H_i(beta) = sum_{j in N_i} sum_{a at j} beta_a u_a u_a^T.
/// Arms with zero gap carry no cost and no constraint.
class AllocationProgram {
 public:
  AllocationProgram(Graph graph, Matrix contexts, std::vector<double> gaps, double scale)
      : graph_(std::move(graph)), contexts_(std::move(contexts)), gaps_(std::move(gaps)), scale_(scale) {
    if (contexts_.rows() < 1 || contexts_.cols() < 1) throw std::invalid_argument("empty context catalog");
    if (gaps_.size() != n_arms()) throw std::invalid_argument("need one gap per arm");
    for (double g : gaps_)
      if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("gaps must be finite and nonnegative");
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw std::invalid_argument("constraint scale must be positive");
  }

  /// True gaps, unit scale: the lower-bound program.
  static AllocationProgram lower_bound(const Instance& inst) {
    return AllocationProgram(inst.graph(), inst.contexts(), sideobs::gaps(inst).gap, 1.0);
  }

  const Graph& graph() const { return graph_; }
  const Matrix& contexts() const { return contexts_; }
  const std::vector<double>& gaps() const { return gaps_; }
  double scale() const { return scale_; }

  std::size_t n_nodes() const { return graph_.size(); }
  std::size_t n_contexts() const { return static_cast<std::size_t>(contexts_.rows()); }
  std::size_t n_arms() const { return n_nodes() * n_contexts(); }
  NodeId node_of(ArmId a) const { return a / n_contexts(); }
  std::size_t context_of(ArmId a) const { return a % n_contexts(); }
  Vector context(ArmId a) const { return contexts_.row(static_cast<Eigen::Index>(context_of(a))).transpose(); }

  bool constrained(ArmId a) const { return gaps_.at(a) > 0.0; }
  bool zero_cost(ArmId a) const { return gaps_.at(a) == 0.0; }

  std::vector<ArmId> constrained_arms() const {
    std::vector<ArmId> out;
    for (ArmId a = 0; a < n_arms(); ++a)
      if (constrained(a)) out.push_back(a);
    return out;
  }

  double min_positive_gap() const {
    double m = std::numeric_limits<double>::infinity();
    for (double g : gaps_)
      if (g > 0.0) m = std::min(m, g);
    return m;
  }
  double max_gap() const { return *std::max_element(gaps_.begin(), gaps_.end()); }

  /// Cost of a plan: constrained arms only.
  double objective(std::span<const double> beta) const {
    double s = 0.0;
    for (ArmId a = 0; a < n_arms(); ++a)
      if (constrained(a)) s += beta[a] * gaps_[a];
    return s;
  }

 private:
  Graph graph_;
  Matrix contexts_;
  std::vector<double> gaps_;
  double scale_;
};

struct AllocationPlan {
  std::vector<double> beta;  // indexed by arm id
  double objective = 0.0;
  double max_constraint_violation = 0.0;
  int solver_iterations = 0;
  bool optimal = true;  // false when an iteration cap stopped the solver

  /// Total budget of constrained arms.
  double constrained_mass(const AllocationProgram& p) const {
    double s = 0.0;
    for (ArmId a = 0; a < p.n_arms(); ++a)
      if (p.constrained(a)) s += beta[a];
    return s;
  }
};

/// H_i(beta) = sum over arms a at neighbors of i of beta_a u_a u_a^T.
inline Matrix neighborhood_design(const AllocationProgram& p, std::span<const double> beta, NodeId i) {
  if (beta.size() != p.n_arms()) throw std::invalid_argument("need one budget per arm");
  const std::size_t k = p.n_contexts();
  Vector w = Vector::Zero(static_cast<Eigen::Index>(k));
  for (NodeId j : p.graph().neighbors(i))
    for (std::size_t c = 0; c < k; ++c) w(static_cast<Eigen::Index>(c)) += beta[j * k + c];
  return p.contexts().transpose() * w.asDiagonal() * p.contexts();
}

/// gap_a^2 / 2 - scale * u_a^T H^{-1} u_a; -infinity when u_a is outside the
/// column space of H.
inline double constraint_slack(const AllocationProgram& p, std::span<const double> beta, ArmId a) {
  const Matrix h = neighborhood_design(p, beta, p.node_of(a));
  const Vector u = p.context(a);
  const double g = p.gaps()[a];
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() == Eigen::Success) {
    const Vector y = llt.solve(u);
    if (y.allFinite()) return 0.5 * g * g - p.scale() * u.dot(y);
  }
  // singular design: pseudo-inverse on the range, -inf off it
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Vector& lam = es.eigenvalues();
  const double lmax = std::max(lam.cwiseAbs().maxCoeff(), 0.0);
  double q = 0.0;
  Vector proj = Vector::Zero(u.size());
  if (lmax > 0.0) {
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      if (lam(k) <= detail::kRankTol * lmax) continue;
      const Vector v = es.eigenvectors().col(k);
      const double c = v.dot(u);
      q += c * c / lam(k);
      proj += c * v;
    }
  }
  if ((u - proj).norm() > 1e-9 * std::max(1.0, u.norm())) return -std::numeric_limits<double>::infinity();
  return 0.5 * g * g - p.scale() * q;
}

/// d/d beta_b of u_a^T H_{i_a}(beta)^{-1} u_a for every arm b.
inline std::vector<double> constraint_gradient(const AllocationProgram& p, std::span<const double> beta, ArmId a) {
  const NodeId i = p.node_of(a);
  const Matrix h = neighborhood_design(p, beta, i);
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw singular_gram_error("neighborhood design is singular");
  const Vector y = llt.solve(p.context(a));
  const Vector proj = p.contexts() * y;  // u_c^T H^{-1} u_a per context
  std::vector<double> grad(p.n_arms(), 0.0);
  const std::size_t k = p.n_contexts();
  for (NodeId j : p.graph().neighbors(i))
    for (std::size_t c = 0; c < k; ++c) grad[j * k + c] = -proj(static_cast<Eigen::Index>(c)) * proj(static_cast<Eigen::Index>(c));
  return grad;
}

/// Constructive feasible plan: kappa = 2 r C^2 scale / gap^2 on every
/// spanner context at every node of a dominating set, zero elsewhere.
inline AllocationPlan dominating_spanner_plan(const AllocationProgram& p, double gap_for_kappa, double C = 1.0) {
  if (!(gap_for_kappa > 0.0)) throw std::invalid_argument("kappa needs a positive gap");
  const Spanner sp = barycentric_spanner(p.contexts(), C);
  const double r = static_cast<double>(sp.size());
  const double kappa = 2.0 * r * C * C * p.scale() / (gap_for_kappa * gap_for_kappa);
  AllocationPlan plan;
  plan.beta.assign(p.n_arms(), 0.0);
  for (NodeId s : dominating_set(p.graph()))
    for (std::size_t c : sp.basis) plan.beta[s * p.n_contexts() + c] = kappa;
  plan.objective = p.objective(plan.beta);
  for (ArmId a = 0; a < p.n_arms(); ++a) {
    if (!p.constrained(a)) continue;
    plan.max_constraint_violation = std::max(plan.max_constraint_violation, -constraint_slack(p, plan.beta, a));
  }
  return plan;
}

inline AllocationPlan dominating_spanner_plan(const Instance& inst, double scale) {
  const GapTable gt = gaps(inst);
  AllocationProgram p(inst.graph(), inst.contexts(), gt.gap, scale);
  if (!gt.min) {
    AllocationPlan plan;
    plan.beta.assign(p.n_arms(), 0.0);
    return plan;
  }
  return dominating_spanner_plan(p, *gt.min);
}

namespace detail {

// Log-barrier Newton solver. Variables are the budgets of constrained arms;
// zero-cost arms sit at beta_cap, which is optimal for them because the
// constraints only tighten as H shrinks. Contexts are shared by all nodes, so
// H_i depends on beta only through pooled per-context weights
// w_{i,c} = sum_{j in N_i} beta_{j,c}.
class BarrierSolver {
 public:
  BarrierSolver(const AllocationProgram& p, const SolverOptions& opt) : p_(p), opt_(opt) {
    const ContextSpan span = context_span(p.contexts());
    u_ = span.project(p.contexts());  // K x r
    k_ = p.n_contexts();
    for (ArmId a = 0; a < p.n_arms(); ++a) {
      if (p.constrained(a)) {
        var_of_arm_.push_back(static_cast<long>(vars_.size()));
        vars_.push_back(a);
      } else {
        var_of_arm_.push_back(-1);
      }
    }
    cons_at_.resize(p.n_nodes());
    for (ArmId a : vars_) cons_at_[p.node_of(a)].push_back(a);
  }

  std::size_t n_vars() const { return vars_.size(); }
  const std::vector<ArmId>& vars() const { return vars_; }

  std::vector<double> to_beta(const Vector& x) const {
    std::vector<double> beta(p_.n_arms(), opt_.beta_cap);
    for (std::size_t v = 0; v < vars_.size(); ++v) beta[vars_[v]] = x(static_cast<Eigen::Index>(v));
    return beta;
  }

  Vector from_beta(std::span<const double> beta) const {
    Vector x(static_cast<Eigen::Index>(vars_.size()));
    for (std::size_t v = 0; v < vars_.size(); ++v) x(static_cast<Eigen::Index>(v)) = beta[vars_[v]];
    return x;
  }

  // Pooled weight of context c seen from node i.
  Vector pooled(const Vector& x, NodeId i) const {
    Vector w = Vector::Zero(static_cast<Eigen::Index>(k_));
    for (NodeId j : p_.graph().neighbors(i)) {
      for (std::size_t c = 0; c < k_; ++c) {
        const long v = var_of_arm_[j * k_ + c];
        w(static_cast<Eigen::Index>(c)) += v >= 0 ? x(v) : opt_.beta_cap;
      }
    }
    return w;
  }

  // P_i = U H_i^{-1} U^T; false when H_i is not positive definite.
  bool projector(const Vector& x, NodeId i, Matrix& out) const {
    const Vector w = pooled(x, i);
    const Matrix h = u_.transpose() * w.asDiagonal() * u_;
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) return false;
    const Matrix z = llt.matrixL().solve(u_.transpose());  // r x K
    out = z.transpose() * z;
    return out.allFinite();
  }

  double slack(const Matrix& proj, ArmId a) const {
    const double g = p_.gaps()[a];
    const auto c = static_cast<Eigen::Index>(p_.context_of(a));
    return 0.5 * g * g - p_.scale() * proj(c, c);
  }

  bool strictly_feasible(const Vector& x) const {
    if ((x.array() <= 0.0).any()) return false;
    Matrix proj;
    for (NodeId i = 0; i < p_.n_nodes(); ++i) {
      if (cons_at_[i].empty()) continue;
      if (!projector(x, i, proj)) return false;
      for (ArmId a : cons_at_[i])
        if (!(slack(proj, a) > 0.0)) return false;
    }
    return true;
  }

  // t * cost - sum log slack - sum log x; +inf outside the domain.
  double value(const Vector& x, double t) const {
    if ((x.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    double f = 0.0;
    for (std::size_t v = 0; v < vars_.size(); ++v) f += t * p_.gaps()[vars_[v]] * x(static_cast<Eigen::Index>(v));
    f -= x.array().log().sum();
    Matrix proj;
    for (NodeId i = 0; i < p_.n_nodes(); ++i) {
      if (cons_at_[i].empty()) continue;
      if (!projector(x, i, proj)) return std::numeric_limits<double>::infinity();
      for (ArmId a : cons_at_[i]) {
        const double s = slack(proj, a);
        if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
        f -= std::log(s);
      }
    }
    return f;
  }

  void derivatives(const Vector& x, double t, Vector& grad, Matrix& hess) const {
    const auto n = static_cast<Eigen::Index>(vars_.size());
    grad = Vector::Zero(n);
    hess = Matrix::Zero(n, n);
    for (Eigen::Index v = 0; v < n; ++v) {
      grad(v) = t * p_.gaps()[vars_[static_cast<std::size_t>(v)]] - 1.0 / x(v);
      hess(v, v) = 1.0 / (x(v) * x(v));
    }
    const auto kk = static_cast<Eigen::Index>(k_);
    const double sc = p_.scale();
    Matrix proj;
    for (NodeId i = 0; i < p_.n_nodes(); ++i) {
      if (cons_at_[i].empty()) continue;
      projector(x, i, proj);
      // Context-level gradient and Hessian of -sum_a log s_a in w_i.
      Vector gc = Vector::Zero(kk);
      Matrix hc = Matrix::Zero(kk, kk);
      for (ArmId a : cons_at_[i]) {
        const auto ca = static_cast<Eigen::Index>(p_.context_of(a));
        const double s = slack(proj, a);
        const Vector pa = proj.col(ca);
        const Vector dq = -pa.cwiseProduct(pa);  // d q_a / d w_c
        gc += (sc / s) * dq;
        hc.noalias() += (2.0 * sc / s) * (pa.asDiagonal() * proj * pa.asDiagonal());
        hc.noalias() += (sc * sc / (s * s)) * (dq * dq.transpose());
      }
      const auto& nb = p_.graph().neighbors(i);
      for (NodeId j : nb) {
        for (std::size_t c = 0; c < k_; ++c) {
          const long v = var_of_arm_[j * k_ + c];
          if (v < 0) continue;
          grad(v) += gc(static_cast<Eigen::Index>(c));
          for (NodeId j2 : nb) {
            for (std::size_t c2 = 0; c2 < k_; ++c2) {
              const long v2 = var_of_arm_[j2 * k_ + c2];
              if (v2 < 0) continue;
              hess(v, v2) += hc(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c2));
            }
          }
        }
      }
    }
  }

  // Newton centering at barrier parameter t. Returns steps taken and whether
  // the Newton decrement reached tolerance.
  std::pair<int, bool> center(Vector& x, double t) const {
    Vector grad;
    Matrix hess;
    double fx = value(x, t);
    for (int it = 0; it < opt_.max_inner; ++it) {
      derivatives(x, t, grad, hess);
      Eigen::LDLT<Matrix> ldlt(hess);
      Vector dx = ldlt.solve(-grad);
      double dec = -grad.dot(dx);
      if (ldlt.info() != Eigen::Success || !dx.allFinite() || dec < 0.0) {
        dx = -grad.cwiseQuotient(hess.diagonal());
        dec = -grad.dot(dx);
      }
      if (dec / 2.0 <= 1e-10) return {it, true};
      double step = 1.0;
      double fn = value(x + step * dx, t);
      while (!(fn <= fx - 0.25 * step * dec) && step > 1e-14) {
        step *= 0.5;
        fn = value(x + step * dx, t);
      }
      if (step <= 1e-14) return {it + 1, true};  // no further progress at double precision
      x += step * dx;
      fx = fn;
    }
    return {opt_.max_inner, false};
  }

 private:
  const AllocationProgram& p_;
  SolverOptions opt_;
  Matrix u_;
  std::size_t k_ = 0;
  std::vector<ArmId> vars_;
  std::vector<long> var_of_arm_;
  std::vector<std::vector<ArmId>> cons_at_;
};

}  // namespace detail

/// Minimizes the allocation program by a log-barrier method with Newton
/// centering, started from the dominating-set spanner plan.
inline AllocationPlan solve_allocation(const AllocationProgram& p, const SolverOptions& opt = {}) {
  detail::BarrierSolver solver(p, opt);
  AllocationPlan plan;
  if (solver.n_vars() == 0) {
    plan.beta.assign(p.n_arms(), opt.beta_cap);
    return plan;
  }

  // Strictly feasible start: doubled constructive plan plus a small budget
  // on every variable so that log x is finite.
  const AllocationPlan start = dominating_spanner_plan(p, p.min_positive_gap());
  Vector x = solver.from_beta(start.beta);
  const double kappa = x.maxCoeff();
  x = 2.0 * x + Vector::Constant(x.size(), 1e-3 * std::max(kappa, 1.0));
  int doublings = 0;
  while (!solver.strictly_feasible(x)) {
    if (++doublings > 60) throw infeasible_program_error("no strictly feasible allocation found");
    x *= 2.0;
  }

  const double m = static_cast<double>(solver.n_vars() + p.constrained_arms().size());
  double cost0 = 0.0;
  for (std::size_t v = 0; v < solver.n_vars(); ++v) cost0 += p.gaps()[solver.vars()[v]] * x(static_cast<Eigen::Index>(v));
  double t = m / std::max(cost0, 1e-300);

  bool converged = true;
  bool gap_closed = false;
  for (int outer = 0; outer < opt.max_outer && !gap_closed; ++outer) {
    auto [steps, ok] = solver.center(x, t);
    plan.solver_iterations += steps;
    converged = converged && ok;
    double cost = 0.0;
    for (std::size_t v = 0; v < solver.n_vars(); ++v) cost += p.gaps()[solver.vars()[v]] * x(static_cast<Eigen::Index>(v));
    gap_closed = m / t <= opt.gap_tol * cost;
    t /= opt.barrier_decrease;
  }
  converged = converged && gap_closed;

  plan.beta = solver.to_beta(x);
  plan.objective = p.objective(plan.beta);
  plan.optimal = converged;
  for (ArmId a : solver.vars())
    plan.max_constraint_violation = std::max(plan.max_constraint_violation, -constraint_slack(p, plan.beta, a));
  if (plan.max_constraint_violation > opt.feas_tol) plan.optimal = false;
  return plan;
}

/// Optimal value of the lower-bound program for the true instance.
inline double lower_bound_constant(const Instance& inst, const SolverOptions& opt = {}) {
  return solve_allocation(AllocationProgram::lower_bound(inst), opt).objective;
}

}  // namespace sideobs
