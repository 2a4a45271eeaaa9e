#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sideobs/errors.hpp"
#include "sideobs/instance.hpp"
#include "sideobs/planner.hpp"
#include "sideobs/policies.hpp"

namespace sideobs {

enum class Algo { algorithm1, algorithm2, lattimore, lattimore_n };

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::algorithm1: return "algorithm1";
    case Algo::algorithm2: return "algorithm2";
    case Algo::lattimore: return "lattimore";
    case Algo::lattimore_n: return "lattimore_n";
  }
  return "?";
}

inline Algo parse_algo(const std::string& s) {
  if (s == "algorithm1") return Algo::algorithm1;
  if (s == "algorithm2") return Algo::algorithm2;
  if (s == "lattimore") return Algo::lattimore;
  if (s == "lattimore_n") return Algo::lattimore_n;
  throw config_error("unknown algorithm '" + s + "'");
}

/// Defaults reproduce the d=4, N=4, K=10, p=0.5 synthetic setting.
struct ExperimentConfig {
  std::size_t d = 4;
  std::size_t n_users = 4;
  std::size_t k_contexts = 10;
  double edge_prob = 0.5;
  double noise_sigma = 0.1;
  double delta = 0.1;
  std::size_t horizon = 10000;
  std::size_t runs = 100;
  std::uint64_t master_seed = 1;
  std::vector<Algo> algos{Algo::algorithm1, Algo::algorithm2, Algo::lattimore, Algo::lattimore_n};
  double c_const = 2.0;
  SolverOptions solver;
  std::string out_dir = "out";

  void validate() const {
    if (d < 1 || n_users < 1 || k_contexts < 1) throw config_error("d, n_users and k_contexts must be >= 1");
    if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) throw config_error("edge_prob must lie in [0,1]");
    if (!(noise_sigma >= 0.0)) throw config_error("noise_sigma must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw config_error("delta must lie in (0,1)");
    if (runs < 1) throw config_error("runs must be >= 1");
    if (horizon < d) throw config_error("horizon must be >= d");
    if (horizon < 3) throw config_error("horizon must be >= 3");
    if (algos.empty()) throw config_error("algos must be nonempty");
    if (!(c_const > 0.0)) throw config_error("c_const must be positive");
  }

  std::uint64_t instance_seed(std::size_t run) const { return master_seed + run; }
  std::uint64_t noise_seed(std::size_t run) const { return master_seed + 1000000u + run; }

  PolicyOptions policy_options() const {
    PolicyOptions o;
    o.sigma = noise_sigma;
    o.c_const = c_const;
    o.solver = solver;
    return o;
  }
};

/// Reads the snake_case keys of ExperimentConfig; missing keys keep defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (!j.is_object()) throw config_error("config must be a JSON object");
  static const char* known[] = {"d",       "n_users", "k_contexts", "edge_prob", "noise_sigma", "delta", "horizon",
                                "runs",    "master_seed", "algos",  "c_const",   "solver",      "out_dir"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw config_error("unknown config key '" + key + "'");
  }
  try {
    c.d = j.value("d", c.d);
    c.n_users = j.value("n_users", c.n_users);
    c.k_contexts = j.value("k_contexts", c.k_contexts);
    c.edge_prob = j.value("edge_prob", c.edge_prob);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.delta = j.value("delta", c.delta);
    c.horizon = j.value("horizon", c.horizon);
    c.runs = j.value("runs", c.runs);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.c_const = j.value("c_const", c.c_const);
    c.out_dir = j.value("out_dir", c.out_dir);
    if (j.contains("algos")) {
      c.algos.clear();
      for (const auto& a : j.at("algos")) c.algos.push_back(parse_algo(a.get<std::string>()));
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      if (!s.is_object()) throw config_error("solver must be a JSON object");
      static const char* solver_keys[] = {"beta_cap", "feas_tol", "gap_tol", "max_outer", "barrier_decrease", "max_inner"};
      for (const auto& [key, _] : s.items()) {
        if (std::find(std::begin(solver_keys), std::end(solver_keys), key) == std::end(solver_keys))
          throw config_error("unknown solver key '" + key + "'");
      }
      c.solver.beta_cap = s.value("beta_cap", c.solver.beta_cap);
      c.solver.feas_tol = s.value("feas_tol", c.solver.feas_tol);
      c.solver.gap_tol = s.value("gap_tol", c.solver.gap_tol);
      c.solver.max_outer = s.value("max_outer", c.solver.max_outer);
      c.solver.barrier_decrease = s.value("barrier_decrease", c.solver.barrier_decrease);
      c.solver.max_inner = s.value("max_inner", c.solver.max_inner);
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad config value: ") + e.what());
  }
  return c;
}

inline std::vector<Algo> parse_algo_list(const std::string& csv) {
  std::vector<Algo> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(parse_algo(tok));
  return out;
}

/// Exploration-phase regret bound of the stopping-time policy on an
/// instance, with sub-Gaussian radii scaled by sigma^2, plus the
/// delta * T * sum_i Delta_max,i failure term.
inline double stopping_time_regret_bound(const Instance& inst, std::size_t horizon, double delta, double sigma) {
  const GapTable gt = gaps(inst);
  if (!gt.min) return 0.0;
  const double dmax_sum = gt.sum_node_max();
  const double d = static_cast<double>(context_span(inst.contexts()).rank);
  const double l = std::log(static_cast<double>(horizon) * static_cast<double>(inst.n_arms()) / delta);
  const double half = *gt.min / 2.0;
  return dmax_sum * sigma * sigma * 2.0 * l * d / (half * half) + delta * static_cast<double>(horizon) * dmax_sum;
}

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t instance_seed = 0;
  std::uint64_t noise_seed = 0;
  std::vector<RegretTrace> traces;  // config.algos order
  double lower_bound_c = 0.0;
  std::size_t dom_set_size = 0;
  double theorem2_bound = 0.0;
};

struct SummaryRow {
  std::string algo;
  std::size_t round = 0;
  double mean_cum_regret = 0.0;
  double std_error = 0.0;
};

/// Per-round mean and standard error (sample std / sqrt(n)) for each
/// algorithm label, labels in first-appearance order.
inline std::vector<SummaryRow> summarize(std::span<const RegretTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("nothing to summarize");
  const std::size_t horizon = traces.front().cumulative_regret.size();
  std::vector<std::string> labels;
  for (const auto& t : traces) {
    if (t.cumulative_regret.size() != horizon) throw std::invalid_argument("traces must share a horizon");
    if (std::find(labels.begin(), labels.end(), t.algo) == labels.end()) labels.push_back(t.algo);
  }
  std::vector<SummaryRow> rows;
  rows.reserve(labels.size() * horizon);
  for (const auto& label : labels) {
    std::vector<const RegretTrace*> group;
    for (const auto& t : traces)
      if (t.algo == label) group.push_back(&t);
    const double n = static_cast<double>(group.size());
    for (std::size_t r = 0; r < horizon; ++r) {
      double mean = 0.0;
      for (const auto* t : group) mean += t->cumulative_regret[r];
      mean /= n;
      double ss = 0.0;
      for (const auto* t : group) ss += (t->cumulative_regret[r] - mean) * (t->cumulative_regret[r] - mean);
      const double se = group.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
      rows.push_back({label, r + 1, mean, se});
    }
  }
  return rows;
}

inline RegretTrace run_algo(Algo algo, const Instance& inst, const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const PolicyOptions opt = cfg.policy_options();
  RegretTrace t;
  switch (algo) {
    case Algo::algorithm1: t = run_algorithm1(inst, cfg.horizon, cfg.delta, rng, opt); break;
    case Algo::algorithm2: t = run_algorithm2(inst, cfg.horizon, rng, opt); break;
    case Algo::lattimore: t = run_baseline(inst, cfg.horizon, Baseline::lattimore, rng, opt); break;
    case Algo::lattimore_n: t = run_baseline(inst, cfg.horizon, Baseline::lattimore_n, rng, opt); break;
  }
  t.seed = seed;
  return t;
}

inline Instance experiment_instance(const ExperimentConfig& cfg, std::size_t run) {
  Rng rng(cfg.instance_seed(run));
  return sample_instance(cfg.d, cfg.n_users, cfg.k_contexts, cfg.edge_prob, cfg.noise_sigma, rng);
}

/// One run: a fresh instance, every requested algorithm on the same noise
/// seed, and the instance's bound quantities.
inline RunRecord run_single(const ExperimentConfig& cfg, std::size_t run) {
  RunRecord rec;
  rec.run = run;
  rec.instance_seed = cfg.instance_seed(run);
  rec.noise_seed = cfg.noise_seed(run);
  const Instance inst = experiment_instance(cfg, run);
  for (Algo a : cfg.algos) rec.traces.push_back(run_algo(a, inst, cfg, rec.noise_seed));
  rec.lower_bound_c = lower_bound_constant(inst, cfg.solver);
  rec.dom_set_size = dominating_set(inst.graph()).size();
  rec.theorem2_bound = stopping_time_regret_bound(inst, cfg.horizon, cfg.delta, cfg.noise_sigma);
  return rec;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunRecord> runs;

  std::vector<RegretTrace> traces_of(Algo a) const {
    std::vector<RegretTrace> out;
    const auto label = to_string(a);
    for (const auto& r : runs)
      for (const auto& t : r.traces)
        if (t.algo == label) out.push_back(t);
    return out;
  }
};

/// Runs are distributed over `jobs` worker threads; results are stored by
/// run index so the output does not depend on the worker count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;
  res.runs.resize(cfg.runs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.runs; r = next++) {
      try {
        res.runs[r] = run_single(cfg, r);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = cfg.runs;
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cfg.runs));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return res;
}

namespace detail {

inline std::string fmt_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + p.string());
  return out;
}

}  // namespace detail

/// Creates the directory and checks every output file can be opened.
inline void prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw io_error("cannot create output directory " + dir.string());
  for (const char* name : {"traces.csv", "summary.csv", "bounds.csv"}) detail::open_for_write(dir / name);
}

inline void write_outputs(const ExperimentResult& res, const std::filesystem::path& dir) {
  {
    auto out = detail::open_for_write(dir / "traces.csv");
    out << "algo,run,seed,round,cum_regret\n";
    for (const auto& r : res.runs)
      for (const auto& t : r.traces)
        for (std::size_t k = 0; k < t.cumulative_regret.size(); ++k)
          out << t.algo << ',' << r.run << ',' << t.seed << ',' << (k + 1) << ','
              << detail::fmt_real(t.cumulative_regret[k]) << '\n';
  }
  {
    std::vector<RegretTrace> all;
    for (Algo a : res.config.algos) {
      auto ts = res.traces_of(a);
      all.insert(all.end(), std::make_move_iterator(ts.begin()), std::make_move_iterator(ts.end()));
    }
    auto out = detail::open_for_write(dir / "summary.csv");
    out << "algo,round,mean_cum_regret,std_error\n";
    for (const auto& row : summarize(all))
      out << row.algo << ',' << row.round << ',' << detail::fmt_real(row.mean_cum_regret) << ','
          << detail::fmt_real(row.std_error) << '\n';
  }
  {
    auto out = detail::open_for_write(dir / "bounds.csv");
    out << "run,lower_bound_c,dom_set_size,theorem2_bound\n";
    for (const auto& r : res.runs)
      out << r.run << ',' << detail::fmt_real(r.lower_bound_c) << ',' << r.dom_set_size << ','
          << detail::fmt_real(r.theorem2_bound) << '\n';
  }
}

}  // namespace sideobs
