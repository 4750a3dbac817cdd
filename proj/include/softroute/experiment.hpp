#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "softroute/bernoulli_split.hpp"
#include "softroute/index_policy.hpp"
#include "softroute/mdp.hpp"
#include "softroute/model.hpp"
#include "softroute/numeric.hpp"
#include "softroute/simulator.hpp"

namespace softroute {

enum class ExperimentKind {
  LoadSweep,
  RejectionCostSweep,
  SpeedHeterogeneity,
  PoolHeterogeneity,
  DeadlineMagnitude,
  AchievableRegion,
  PolicyStructure,
};

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  static const std::map<std::string, ExperimentKind> names = {
      {"load", ExperimentKind::LoadSweep},
      {"rejection_cost", ExperimentKind::RejectionCostSweep},
      {"speed", ExperimentKind::SpeedHeterogeneity},
      {"pool", ExperimentKind::PoolHeterogeneity},
      {"deadline_magnitude", ExperimentKind::DeadlineMagnitude},
      {"region", ExperimentKind::AchievableRegion},
      {"structure", ExperimentKind::PolicyStructure},
  };
  const auto it = names.find(s);
  if (it == names.end()) throw std::invalid_argument("unknown experiment kind: " + s);
  return it->second;
}

struct ExperimentSpec {
  std::string name = "experiment";
  ExperimentKind kind = ExperimentKind::LoadSweep;
  std::vector<ClusterConfig> clusters;
  std::string deadline = "const:1";
  std::vector<double> rho_grid;
  std::vector<double> R_grid;
  std::vector<std::vector<double>> mu_grid;  // speed sweep: per-cluster rates
  std::vector<std::vector<int>> m_grid;      // pool sweep: per-cluster server counts
  std::vector<double> theta_grid;            // deadline sweep: constant deadline 1/theta
  std::vector<std::string> policies = {"BS", "IO", "PI", "RB"};
  bool oracle = true;
  int buffer = kDefaultBuffer;
  double tol = 1e-9;
  long index_states = kDefaultMaxState;
  bool simulate = false;
  long sim_horizon = 1'000'000;
  int sim_replications = 1;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  std::string output;
};

// ---------------------------------------------------------------- spec files

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_number(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "Inf") return kInfiniteRejectionCost;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("not a number: " + s);
  return v;
}

inline std::vector<double> parse_numbers(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_number(item));
  return out;
}

inline bool parse_switch(const std::string& s) {
  if (s == "on" || s == "true" || s == "yes" || s == "1") return true;
  if (s == "off" || s == "false" || s == "no" || s == "0") return false;
  throw std::invalid_argument("expected on/off, got " + s);
}

inline void apply_key(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  if (key == "kind") {
    spec.kind = parse_experiment_kind(value);
  } else if (key == "clusters") {
    spec.clusters = parse_clusters(value);
  } else if (key == "deadline") {
    DeadlineDistribution::parse(value);  // validate now
    spec.deadline = value;
  } else if (key == "rho" || key == "rho_grid") {
    spec.rho_grid = parse_numbers(value);
  } else if (key == "lambda_grid") {
    throw std::invalid_argument("lambda_grid is not supported; give loads with rho_grid");
  } else if (key == "R" || key == "R_grid") {
    spec.R_grid = parse_numbers(value);
  } else if (key == "mu_grid") {
    spec.mu_grid.clear();
    for (const auto& combo : split(value, '|')) spec.mu_grid.push_back(parse_numbers(combo));
  } else if (key == "m_grid") {
    spec.m_grid.clear();
    for (const auto& combo : split(value, '|')) {
      std::vector<int> ms;
      for (double v : parse_numbers(combo)) ms.push_back(static_cast<int>(v));
      spec.m_grid.push_back(ms);
    }
  } else if (key == "theta_grid") {
    spec.theta_grid = parse_numbers(value);
  } else if (key == "policies") {
    spec.policies = split(value, ',');
  } else if (key == "oracle") {
    spec.oracle = parse_switch(value);
  } else if (key == "buffer") {
    spec.buffer = static_cast<int>(parse_number(value));
  } else if (key == "tol") {
    spec.tol = parse_number(value);
  } else if (key == "index_states") {
    spec.index_states = static_cast<long>(parse_number(value));
  } else if (key == "simulate") {
    spec.simulate = parse_switch(value);
  } else if (key == "sim_horizon") {
    spec.sim_horizon = static_cast<long>(parse_number(value));
  } else if (key == "sim_replications") {
    spec.sim_replications = static_cast<int>(parse_number(value));
  } else if (key == "seed") {
    spec.seed = std::stoull(value);
  } else if (key == "threads") {
    spec.threads = static_cast<unsigned>(parse_number(value));
  } else if (key == "output") {
    spec.output = value;
  } else {
    throw std::invalid_argument("unknown key: " + key);
  }
}

}  // namespace detail

/// Parses the flat key = value format, one experiment per [section]. Keys
/// before the first section act as defaults for every section.
inline std::vector<ExperimentSpec> parse_experiment_specs(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> defaults;
  std::vector<ExperimentSpec> specs;
  std::string line;
  int lineno = 0;
  bool in_section = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw std::invalid_argument("unterminated section header");
        ExperimentSpec spec;
        spec.name = detail::trim(line.substr(1, line.size() - 2));
        for (const auto& [k, v] : defaults) detail::apply_key(spec, k, v);
        specs.push_back(spec);
        in_section = true;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("expected key = value");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (in_section) {
        detail::apply_key(specs.back(), key, value);
      } else {
        ExperimentSpec probe;
        detail::apply_key(probe, key, value);
        defaults.emplace_back(key, value);
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return specs;
}

inline std::vector<ExperimentSpec> load_experiment_specs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_experiment_specs(in);
}

// ---------------------------------------------------------------- grid expansion

/// One (configuration, rejection cost) cell of an experiment.
struct GridPoint {
  double grid_value;
  double rho;
  double R;
  std::vector<ClusterConfig> clusters;
  std::string deadline;
};

inline std::vector<GridPoint> expand_grid(const ExperimentSpec& spec) {
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(spec.name + ": " + what);
  };
  need(!spec.clusters.empty() || !spec.m_grid.empty() || !spec.mu_grid.empty(), "no clusters given");
  need(!spec.rho_grid.empty(), "rho grid is empty");
  need(!spec.R_grid.empty(), "R grid is empty");
  for (double rho : spec.rho_grid) need(rho > 0.0 && rho < 1.0, "every load must lie in (0, 1)");

  std::vector<GridPoint> points;
  auto add = [&](double value, double rho, double R, std::vector<ClusterConfig> cl, std::string d) {
    points.push_back({value, rho, R, std::move(cl), std::move(d)});
  };
  switch (spec.kind) {
    case ExperimentKind::LoadSweep:
      for (double R : spec.R_grid)
        for (double rho : spec.rho_grid) add(rho, rho, R, spec.clusters, spec.deadline);
      break;
    case ExperimentKind::RejectionCostSweep:
    case ExperimentKind::AchievableRegion:
      for (double rho : spec.rho_grid)
        for (double R : spec.R_grid) add(R, rho, R, spec.clusters, spec.deadline);
      break;
    case ExperimentKind::SpeedHeterogeneity:
      need(!spec.mu_grid.empty(), "mu_grid is empty");
      for (double R : spec.R_grid)
        for (double rho : spec.rho_grid)
          for (std::size_t i = 0; i < spec.mu_grid.size(); ++i) {
            const auto& mus = spec.mu_grid[i];
            need(mus.size() == spec.clusters.size(), "mu_grid entry size differs from clusters");
            std::vector<ClusterConfig> cl;
            for (std::size_t k = 0; k < mus.size(); ++k) cl.emplace_back(spec.clusters[k].servers, mus[k]);
            add(static_cast<double>(i + 1), rho, R, cl, spec.deadline);
          }
      break;
    case ExperimentKind::PoolHeterogeneity:
      need(!spec.m_grid.empty(), "m_grid is empty");
      for (double R : spec.R_grid)
        for (double rho : spec.rho_grid)
          for (std::size_t i = 0; i < spec.m_grid.size(); ++i) {
            const auto& ms = spec.m_grid[i];
            need(ms.size() == spec.clusters.size(), "m_grid entry size differs from clusters");
            std::vector<ClusterConfig> cl;
            for (std::size_t k = 0; k < ms.size(); ++k) cl.emplace_back(ms[k], spec.clusters[k].rate);
            add(static_cast<double>(i + 1), rho, R, cl, spec.deadline);
          }
      break;
    case ExperimentKind::DeadlineMagnitude:
      need(!spec.theta_grid.empty(), "theta_grid is empty");
      for (double R : spec.R_grid)
        for (double rho : spec.rho_grid)
          for (double theta : spec.theta_grid) {
            need(theta > 0.0, "theta must be positive");
            std::ostringstream d;
            d.precision(17);
            d << "const:" << 1.0 / theta;
            add(theta, rho, R, spec.clusters, d.str());
          }
      break;
    case ExperimentKind::PolicyStructure:
      need(spec.clusters.size() == 2, "policy structure dumps need exactly two clusters");
      add(spec.rho_grid.front(), spec.rho_grid.front(), spec.R_grid.front(), spec.clusters, spec.deadline);
      break;
  }
  return points;
}

// ---------------------------------------------------------------- running

struct ExperimentRow {
  std::string experiment;
  double grid_value = 0.0;
  double rho = 0.0;
  double R = 0.0;
  std::string policy;
  double cost_per_job = NAN;
  double p = NAN;
  double q = NAN;
  double turned_away = NAN;  // arrivals finding every truncated queue full
  double optimality_gap = NAN;  // cost / optimal cost - 1
  double sim_cost_per_job = NAN;
  double sim_se = NAN;
  std::string status = "ok";
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::size_t failures = 0;
};

namespace detail {

inline std::string clean_message(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

inline std::shared_ptr<const Policy> make_named_policy(const std::string& name, const SystemConfig& config,
                                                       const BernoulliSplit& split, long index_states) {
  if (name == "BS") return std::make_shared<BernoulliSplitPolicy>(split);
  if (name == "IO") return std::make_shared<IndexPolicy>(make_index_policy(config, IndexKind::IO, index_states));
  if (name == "PI") return std::make_shared<IndexPolicy>(make_index_policy(config, IndexKind::PI, index_states, split));
  if (name == "RB") return std::make_shared<IndexPolicy>(make_index_policy(config, IndexKind::RB, index_states));
  throw std::invalid_argument("unknown policy: " + name);
}

inline std::vector<ExperimentRow> run_point(const ExperimentSpec& spec, const GridPoint& pt, std::size_t ordinal) {
  std::vector<ExperimentRow> rows;
  auto row = [&](const std::string& policy) {
    ExperimentRow r;
    r.experiment = spec.name;
    r.grid_value = pt.grid_value;
    r.rho = pt.rho;
    r.R = pt.R;
    r.policy = policy;
    return r;
  };
  const bool want_oracle = spec.oracle || spec.kind == ExperimentKind::AchievableRegion;
  try {
    const auto config =
        SystemConfig::at_load(pt.rho, pt.R, pt.clusters, DeadlineDistribution::parse(pt.deadline));
    const TruncatedMdp mdp(config, spec.buffer);
    const auto split = solve_optimal_bs(config).split;
    std::optional<MdpSolution> opt;
    if (want_oracle && config.size() <= 2) opt = solve_optimal(mdp, SolveOptions{spec.tol});

    std::vector<std::pair<std::string, std::shared_ptr<const Policy>>> todo;
    if (opt) todo.emplace_back("OPT", std::make_shared<TabularPolicy>(opt->policy(mdp.lattice())));
    for (const auto& name : spec.policies) {
      try {
        todo.emplace_back(name, make_named_policy(name, config, split, spec.index_states));
      } catch (const std::exception& e) {
        auto r = row(name);
        r.status = "error: " + clean_message(e.what());
        rows.push_back(r);
      }
    }
    for (std::size_t i = 0; i < todo.size(); ++i) {
      const auto& [name, policy] = todo[i];
      auto r = row(name);
      try {
        const auto ev = evaluate_policy(mdp, *policy);
        r.cost_per_job = ev.cost_per_job;
        r.p = ev.rejection_ratio;
        r.q = ev.miss_ratio;
        r.turned_away = ev.turned_away_ratio;
        if (opt) r.optimality_gap = name == "OPT" ? 0.0 : ev.cost_rate / opt->cost_rate - 1.0;
        if (spec.simulate) {
          SimConfig sim{config, policy};
          sim.horizon = spec.sim_horizon;
          sim.replications = spec.sim_replications;
          sim.seed = spec.seed + 7919 * ordinal + i;
          sim.parallel = false;
          const auto res = softroute::simulate(sim);
          r.sim_cost_per_job = res.cost_per_job.mean;
          r.sim_se = res.cost_per_job.se;
        }
      } catch (const std::exception& e) {
        r.status = "error: " + clean_message(e.what());
      }
      rows.push_back(r);
    }
  } catch (const std::exception& e) {
    auto r = row("*");
    r.status = "error: " + clean_message(e.what());
    rows.push_back(r);
  }
  return rows;
}

inline unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

}  // namespace detail

/// Runs every grid point (in parallel), merging rows in grid order. Failed
/// points become rows with an error status.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.kind == ExperimentKind::PolicyStructure) {
    throw std::invalid_argument("policy-structure experiments produce lattice dumps; use emit_policy_structure");
  }
  const auto points = expand_grid(spec);
  ExperimentResult result;
  if (spec.policies.empty() && !(spec.oracle || spec.kind == ExperimentKind::AchievableRegion)) return result;

  std::vector<std::vector<ExperimentRow>> per_point(points.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) per_point[i] = detail::run_point(spec, points[i], i);
  };
  const unsigned workers = detail::worker_count(spec.threads, points.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& rows : per_point) {
    for (auto& r : rows) {
      if (r.status != "ok") ++result.failures;
      result.rows.push_back(std::move(r));
    }
  }
  return result;
}

inline void write_experiment_csv(std::ostream& out, const std::vector<ExperimentRow>& rows) {
  out << "experiment,grid_value,rho,R,policy,cost_per_job,p,q,turned_away,optimality_gap,sim_cost_per_job,sim_se,status\n";
  auto num = [](double v) { return std::isnan(v) ? std::string() : numeric::format(v); };
  for (const auto& r : rows) {
    out << r.experiment << ',' << num(r.grid_value) << ',' << num(r.rho) << ',' << num(r.R) << ',' << r.policy << ','
        << num(r.cost_per_job) << ',' << num(r.p) << ',' << num(r.q) << ',' << num(r.turned_away) << ',' << num(r.optimality_gap) << ','
        << num(r.sim_cost_per_job) << ',' << num(r.sim_se) << ',' << r.status << '\n';
  }
}

struct StructureDump {
  std::string policy;
  std::size_t rejection_cells = 0;
};

/// Lattice dump (policy,x1,x2,action) over {0..B}^2 for the optimal policy
/// (when the oracle is on) and each listed heuristic.
inline std::vector<StructureDump> emit_policy_structure(const ExperimentSpec& spec, std::ostream& out) {
  if (spec.clusters.size() != 2) throw std::invalid_argument("policy structure needs n = 2");
  const auto pt = expand_grid(spec).front();
  const auto config = SystemConfig::at_load(pt.rho, pt.R, pt.clusters, DeadlineDistribution::parse(pt.deadline));
  const TruncatedMdp mdp(config, spec.buffer);
  const auto split = solve_optimal_bs(config).split;
  std::vector<std::pair<std::string, std::shared_ptr<const Policy>>> todo;
  if (spec.oracle) {
    todo.emplace_back("OPT", std::make_shared<TabularPolicy>(solve_optimal(mdp, SolveOptions{spec.tol}).policy(mdp.lattice())));
  }
  for (const auto& name : spec.policies) {
    todo.emplace_back(name, detail::make_named_policy(name, config, split, spec.index_states));
  }
  out << "policy,x1,x2,action\n";
  std::vector<StructureDump> dumps;
  for (const auto& [name, policy] : todo) {
    std::ostringstream body;
    write_policy_csv(body, mdp.lattice(), *policy, false);
    std::istringstream lines(body.str());
    std::string line;
    while (std::getline(lines, line)) out << name << ',' << line << '\n';
    dumps.push_back({name, rejection_cells(mdp.lattice(), *policy)});
  }
  return dumps;
}

}  // namespace softroute
