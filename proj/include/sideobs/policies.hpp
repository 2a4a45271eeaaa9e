#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sideobs/estimator.hpp"
#include "sideobs/graph.hpp"
#include "sideobs/instance.hpp"
#include "sideobs/linalg.hpp"
#include "sideobs/planner.hpp"
#include "sideobs/spanner.hpp"

namespace sideobs {

struct PolicyOptions {
  double sigma = 1.0;     // noise scale assumed by the learner
  double c_const = 2.0;   // constant inside f and g
  double spanner_C = 1.0;
  SolverOptions solver;
  std::optional<double> detector_threshold;  // replaces 2 * eps_T when set
};

/// Round indices are 1-based; absent marks mean the phase never happened.
struct PhaseMarks {
  std::optional<std::size_t> warmup_end;
  std::optional<std::size_t> success_end;
  std::optional<std::size_t> recovery_start;
  std::optional<std::size_t> tau;
};

/// What the success phase planned with.
struct PlanDiagnostics {
  double scale = 0.0;
  double gap_min = 0.0;  // smallest positive estimated gap
  double gap_max = 0.0;
  std::size_t dim = 0;
  double constrained_mass = 0.0;
  double objective = 0.0;
  bool optimal = true;
};

struct RegretTrace {
  std::string algo;
  std::uint64_t seed = 0;
  std::vector<double> cumulative_regret;  // entry t-1 is R(t)
  PhaseMarks marks;
  std::vector<std::size_t> play_counts;   // by arm id
  std::vector<ArmId> committed;           // stopping-time commitments, one per node
  std::vector<double> budgets;            // success-phase budgets by arm id
  std::vector<std::size_t> success_plays; // success-phase plays by arm id
  std::optional<PlanDiagnostics> plan;
  bool solver_failed = false;

  double final_regret() const { return cumulative_regret.empty() ? 0.0 : cumulative_regret.back(); }
};

/// Intervals [mu_hat - alpha, mu_hat + alpha] per arm, ordered per node by
/// decreasing estimate (ties by context index).
struct ConfidenceBallSet {
  struct Ball {
    std::size_t context;
    double mean;
  };
  double half_width = 0.0;
  std::vector<std::vector<Ball>> ordered;  // per node

  double lower(NodeId i, std::size_t m) const { return ordered[i][m].mean - half_width; }
  double upper(NodeId i, std::size_t m) const { return ordered[i][m].mean + half_width; }
};

inline ConfidenceBallSet make_balls(const GramState& s, const Matrix& features, double alpha) {
  ConfidenceBallSet b;
  b.half_width = alpha;
  b.ordered.resize(s.n_nodes());
  for (NodeId i = 0; i < s.n_nodes(); ++i) {
    const Vector mu = node_mean_estimates(s, features, i);
    auto& o = b.ordered[i];
    for (Eigen::Index c = 0; c < mu.size(); ++c) o.push_back({static_cast<std::size_t>(c), mu(c)});
    std::stable_sort(o.begin(), o.end(), [](const auto& x, const auto& y) { return x.mean > y.mean; });
  }
  return b;
}

/// True when the top ball at the node is disjoint from every other ball.
inline bool stopping_check(const ConfidenceBallSet& balls, NodeId i) {
  const auto& o = balls.ordered.at(i);
  for (std::size_t m = 1; m < o.size(); ++m)
    if (!(o[0].mean - o[m].mean > 2.0 * balls.half_width)) return false;
  return true;
}

namespace detail {

// Drives the online protocol against the true instance and does regret
// bookkeeping; policies decide what to play.
class Simulation {
 public:
  Simulation(const Instance& inst, std::size_t horizon, Rng& rng, RegretTrace& trace, double spanner_C)
      : inst_(inst), gaps_(gaps(inst)), rng_(rng), trace_(trace), horizon_(horizon) {
    const ContextSpan span = context_span(inst.contexts());
    if (span.rank == 0) throw degenerate_contexts_error("context set spans only the origin");
    features_ = span.project(inst.contexts());
    spanner_ = barycentric_spanner(inst.contexts(), spanner_C);
    trace_.cumulative_regret.reserve(horizon);
    trace_.play_counts.assign(inst.n_arms(), 0);
    played_features_.resize(inst.n_nodes());
  }

  const Instance& instance() const { return inst_; }
  const Matrix& features() const { return features_; }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
  const Spanner& spanner() const { return spanner_; }
  RegretTrace& trace() { return trace_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t round() const { return t_; }
  std::size_t remaining() const { return horizon_ - t_; }
  std::size_t plays(ArmId a) const { return trace_.play_counts[a]; }

  // Plays one round and pools the feedback into `state` along `est_graph`.
  void play(std::span<const ArmId> arms, GramState& state, const Graph& est_graph) {
    const RoundObservations obs = observe(inst_, arms, rng_);
    double inc = 0.0;
    for (NodeId i = 0; i < inst_.n_nodes(); ++i) {
      inc += gaps_.gap[arms[i]];
      ++trace_.play_counts[arms[i]];
      played_features_[i] = features_.row(static_cast<Eigen::Index>(arms[i] % inst_.n_contexts())).transpose();
    }
    state.ingest_round(est_graph, played_features_, obs);
    cum_ += inc;
    trace_.cumulative_regret.push_back(cum_);
    ++t_;
  }

  void play_spanner_slot(std::size_t slot, GramState& state, const Graph& est_graph) {
    std::vector<ArmId> arms(inst_.n_nodes());
    for (NodeId i = 0; i < arms.size(); ++i) arms[i] = inst_.arm_id(i, spanner_.basis[slot]);
    play(arms, state, est_graph);
  }

 private:
  const Instance& inst_;
  GapTable gaps_;
  Rng& rng_;
  RegretTrace& trace_;
  std::size_t horizon_;
  std::size_t t_ = 0;
  double cum_ = 0.0;
  Matrix features_;
  Spanner spanner_;
  std::vector<Vector> played_features_;
};

// Spanner episodes until every node's top ball separates, then commit.
// Runs for `budget` rounds starting from the simulation's current round.
inline void stopping_time_phase(Simulation& sim, const Graph& est_graph, std::size_t budget, double delta,
                                const PolicyOptions& opt) {
  const Instance& inst = sim.instance();
  const std::size_t n = inst.n_nodes(), r = sim.spanner().size();
  const std::size_t start = sim.round();
  GramState state(n, sim.dim());
  std::vector<bool> stopped(n, false);
  std::size_t n_stopped = 0, local = 0;

  while (local < budget && n_stopped < n) {
    sim.play_spanner_slot(local % r, state, est_graph);
    ++local;
    if (local % r != 0) continue;
    const double alpha = confidence_radius(static_cast<double>(local), static_cast<double>(budget), inst.n_arms(),
                                           delta, sim.dim(), opt.sigma);
    const ConfidenceBallSet balls = make_balls(state, sim.features(), alpha);
    for (NodeId i = 0; i < n; ++i) {
      if (!stopped[i] && stopping_check(balls, i)) {
        stopped[i] = true;
        ++n_stopped;
      }
    }
  }
  if (n_stopped < n) return;

  auto& trace = sim.trace();
  trace.marks.tau = start + local;
  trace.committed.resize(n);
  for (NodeId i = 0; i < n; ++i)
    trace.committed[i] = inst.arm_id(i, argmax_lowest(node_mean_estimates(state, sim.features(), i)));
  while (local < budget) {
    sim.play(trace.committed, state, est_graph);
    ++local;
  }
}

inline void recover(Simulation& sim, const Graph& est_graph, const PolicyOptions& opt) {
  auto& marks = sim.trace().marks;
  marks.success_end = sim.round();
  if (sim.remaining() == 0) return;
  marks.recovery_start = sim.round() + 1;
  const std::size_t rest = sim.remaining();
  stopping_time_phase(sim, est_graph, rest, 1.0 / static_cast<double>(sim.horizon()), opt);
}

// Warm-up on the spanner, plan budgets from estimated gaps, spend them round
// robin while watching the estimates, fall back to the stopping-time policy
// if they drift.
inline void warmup_plan_phase(Simulation& sim, const Graph& est_graph, const Graph& plan_graph,
                              const PolicyOptions& opt) {
  const Instance& inst = sim.instance();
  const std::size_t n = inst.n_nodes(), k = inst.n_contexts(), r = sim.spanner().size();
  const double horizon = static_cast<double>(sim.horizon());
  auto& trace = sim.trace();

  GramState state(n, sim.dim());
  const auto episodes = static_cast<std::size_t>(std::ceil(std::sqrt(std::log(horizon))));
  const std::size_t warm = std::min(episodes * r, sim.horizon());
  for (std::size_t l = 0; l < warm; ++l) sim.play_spanner_slot(l % r, state, est_graph);
  trace.marks.warmup_end = sim.round();
  if (sim.remaining() == 0) return;

  Matrix mu_snap(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  std::vector<ArmId> est_opt(n);
  for (NodeId i = 0; i < n; ++i) {
    const Vector mu = node_mean_estimates(state, sim.features(), i);
    mu_snap.row(static_cast<Eigen::Index>(i)) = mu.transpose();
    est_opt[i] = inst.arm_id(i, argmax_lowest(mu));
  }
  const std::vector<double> gap_hat = gap_estimates(state, sim.features());
  const double eps = epsilon_T(state, sim.features(), horizon, opt.c_const, sim.dim(), opt.sigma);
  const double threshold = opt.detector_threshold.value_or(2.0 * eps);

  const double scale = opt.sigma * opt.sigma * f_of(horizon, opt.c_const, sim.dim());
  try {
    const AllocationProgram program(plan_graph, sim.features(), gap_hat, scale);
    const AllocationPlan plan = solve_allocation(program, opt.solver);
    trace.budgets = plan.beta;
    PlanDiagnostics diag;
    diag.scale = scale;
    diag.gap_min = program.min_positive_gap();
    diag.gap_max = program.max_gap();
    diag.dim = sim.dim();
    diag.constrained_mass = plan.constrained_mass(program);
    diag.objective = plan.objective;
    diag.optimal = plan.optimal;
    trace.plan = diag;
  } catch (const std::exception&) {
    trace.solver_failed = true;
    recover(sim, est_graph, opt);
    return;
  }

  trace.success_plays.assign(inst.n_arms(), 0);
  std::vector<std::size_t> cursor(n, 0);
  std::vector<ArmId> arms(n);
  while (sim.remaining() > 0) {
    for (NodeId i = 0; i < n; ++i) {
      const Vector mu = node_mean_estimates(state, sim.features(), i);
      if (((mu.transpose() - mu_snap.row(static_cast<Eigen::Index>(i))).cwiseAbs().array() > threshold).any()) {
        recover(sim, est_graph, opt);
        return;
      }
    }
    for (NodeId i = 0; i < n; ++i) {
      arms[i] = est_opt[i];
      for (std::size_t step = 0; step < k; ++step) {
        const std::size_t c = (cursor[i] + step) % k;
        const ArmId a = inst.arm_id(i, c);
        if (static_cast<double>(sim.plays(a) + 1) <= trace.budgets[a]) {
          arms[i] = a;
          cursor[i] = c + 1;
          break;
        }
      }
      ++trace.success_plays[arms[i]];
    }
    sim.play(arms, state, est_graph);
  }
  trace.marks.success_end = sim.round();
}

}  // namespace detail

/// Explore-then-commit on the barycentric spanner with confidence-ball
/// stopping.
inline RegretTrace run_algorithm1(const Instance& inst, std::size_t horizon, double delta, Rng& rng,
                                  const PolicyOptions& opt = {}) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  RegretTrace trace;
  trace.algo = "algorithm1";
  detail::Simulation sim(inst, horizon, rng, trace, opt.spanner_C);
  detail::stopping_time_phase(sim, inst.graph(), horizon, delta, opt);
  return trace;
}

/// Warm-up, budgeted success phase from the estimated allocation program,
/// recovery by the stopping-time policy.
inline RegretTrace run_algorithm2(const Instance& inst, std::size_t horizon, Rng& rng, const PolicyOptions& opt = {}) {
  if (horizon < 3) throw std::invalid_argument("horizon must be at least 3");
  RegretTrace trace;
  trace.algo = "algorithm2";
  detail::Simulation sim(inst, horizon, rng, trace, opt.spanner_C);
  detail::warmup_plan_phase(sim, inst.graph(), inst.graph(), opt);
  return trace;
}

enum class Baseline { lattimore, lattimore_n };

inline const char* to_string(Baseline b) { return b == Baseline::lattimore ? "lattimore" : "lattimore_n"; }

/// lattimore ignores side-observations entirely; lattimore_n pools them in
/// estimation but plans budgets as if every node were isolated.
inline RegretTrace run_baseline(const Instance& inst, std::size_t horizon, Baseline variant, Rng& rng,
                                const PolicyOptions& opt = {}) {
  if (horizon < 3) throw std::invalid_argument("horizon must be at least 3");
  RegretTrace trace;
  trace.algo = to_string(variant);
  const Graph isolated = inst.graph().without_side_observations();
  if (variant == Baseline::lattimore) {
    const Instance solo = inst.with_graph(isolated);
    detail::Simulation sim(solo, horizon, rng, trace, opt.spanner_C);
    detail::warmup_plan_phase(sim, isolated, isolated, opt);
  } else {
    detail::Simulation sim(inst, horizon, rng, trace, opt.spanner_C);
    detail::warmup_plan_phase(sim, inst.graph(), isolated, opt);
  }
  return trace;
}

}  // namespace sideobs
