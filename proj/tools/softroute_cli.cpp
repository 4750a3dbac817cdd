#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "softroute/softroute.hpp"

namespace sr = softroute;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string out;
  int buffer = sr::kDefaultBuffer;
  double tol = 1e-9;
};

struct SystemArgs {
  std::string clusters = "4:5,8:3";
  std::string deadline = "const:1";
  std::optional<double> rho;
  std::optional<double> lambda;
  std::string R = "5";

  void attach(CLI::App* cmd) {
    cmd->add_option("--clusters", clusters, "servers:rate pairs, e.g. 4:5,8:3")->capture_default_str();
    cmd->add_option("--deadline", deadline, "const:t | unif:t1:t2 | exp:theta")->capture_default_str();
    auto* r = cmd->add_option("--rho", rho, "system load in (0, 1)");
    cmd->add_option("--lambda", lambda, "arrival rate")->excludes(r);
    cmd->add_option("--R", R, "rejection cost (inf disables rejection)")->capture_default_str();
  }

  sr::SystemConfig build() const {
    auto cl = sr::parse_clusters(clusters);
    const auto d = sr::DeadlineDistribution::parse(deadline);
    const double cost = sr::parse_rejection_cost(R);
    if (lambda) return sr::SystemConfig(*lambda, cost, std::move(cl), d);
    return sr::SystemConfig::at_load(rho.value_or(0.9), cost, std::move(cl), d);
  }
};

// Writes to --out when given, else stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write " + path);
    }
  }
  std::ostream& get() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::shared_ptr<const sr::Policy> named_policy(const std::string& name, const sr::SystemConfig& config,
                                               const Globals& g, long states) {
  if (name == "OPT") {
    const sr::TruncatedMdp mdp(config, g.buffer);
    return std::make_shared<sr::TabularPolicy>(sr::solve_optimal(mdp, {g.tol}).policy(mdp.lattice()));
  }
  const auto split = sr::solve_optimal_bs(config).split;
  return sr::detail::make_named_policy(name, config, split, states);
}

sr::IndexKind parse_kind(const std::string& s) {
  if (s == "IO") return sr::IndexKind::IO;
  if (s == "PI") return sr::IndexKind::PI;
  if (s == "RB") return sr::IndexKind::RB;
  throw std::invalid_argument("index kind must be IO, PI or RB");
}

std::string fmt(double v) { return sr::numeric::format(v); }

int run_experiments(const std::string& path, const std::string& only, const Globals& g, bool seed_given,
                    bool buffer_given, bool tol_given) {
  auto specs = sr::load_experiment_specs(path);
  bool partial = false;
  bool ran = false;
  for (auto& spec : specs) {
    if (!only.empty() && spec.name != only) continue;
    ran = true;
    if (seed_given) spec.seed = g.seed;
    if (buffer_given) spec.buffer = g.buffer;
    if (tol_given) spec.tol = g.tol;
    std::string target = spec.output.empty() ? spec.name + ".csv" : spec.output;
    if (!g.out.empty()) target = (std::filesystem::path(g.out) / std::filesystem::path(target).filename()).string();
    if (const auto dir = std::filesystem::path(target).parent_path(); !dir.empty()) {
      std::filesystem::create_directories(dir);
    }
    std::ofstream file(target);
    if (!file) throw std::runtime_error("cannot write " + target);
    if (spec.kind == sr::ExperimentKind::PolicyStructure) {
      for (const auto& d : sr::emit_policy_structure(spec, file)) {
        std::cerr << spec.name << ": " << d.policy << " rejects in " << d.rejection_cells << " cells\n";
      }
    } else {
      const auto result = sr::run_experiment(spec);
      sr::write_experiment_csv(file, result.rows);
      if (result.failures) {
        partial = true;
        std::cerr << spec.name << ": " << result.failures << " failed rows\n";
      }
    }
    std::cerr << spec.name << " -> " << target << '\n';
  }
  if (!ran) throw std::invalid_argument(only.empty() ? "no experiments in " + path : "no experiment named " + only);
  return partial ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Admission control and routing for multicluster soft real-time systems"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out", g.out, "output file (experiment: output directory)");
  auto* buffer_opt = app.add_option("--buffer", g.buffer, "per-queue truncation B")->capture_default_str();
  auto* tol_opt = app.add_option("--tol", g.tol, "relative tolerance of the DP solver")->capture_default_str();

  SystemArgs sys;
  long states = sr::kDefaultMaxState;
  std::string policy_name = "PI";

  auto* indices = app.add_subcommand("indices", "dump IO/PI/RB index tables as CSV");
  sys.attach(indices);
  std::string kind = "PI";
  indices->add_option("--kind", kind, "IO, PI or RB")->capture_default_str();
  indices->add_option("--states", states, "largest tabulated state")->capture_default_str();

  auto* bs = app.add_subcommand("bs", "optimal Bernoulli split with its KKT certificate");
  SystemArgs bs_sys;
  bs_sys.attach(bs);

  auto* solve = app.add_subcommand("solve", "optimal policy by relative value iteration");
  SystemArgs solve_sys;
  solve_sys.attach(solve);
  std::string policy_out;
  solve->add_option("--policy-out", policy_out, "write the optimal action table here");

  auto* evaluate = app.add_subcommand("evaluate", "exact evaluation of a policy on the truncated model");
  SystemArgs eval_sys;
  eval_sys.attach(evaluate);
  evaluate->add_option("--policy", policy_name, "BS, IO, PI, RB or OPT")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "discrete-event simulation of a policy");
  SystemArgs sim_sys;
  sim_sys.attach(simulate);
  long horizon = 1'000'000;
  int replications = 1;
  simulate->add_option("--policy", policy_name, "BS, IO, PI, RB or OPT")->capture_default_str();
  simulate->add_option("--horizon", horizon, "jobs per replication")->capture_default_str();
  simulate->add_option("--replications", replications)->capture_default_str();

  auto* experiment = app.add_subcommand("experiment", "run the experiments of a spec file");
  std::string spec_path, only;
  experiment->add_option("spec", spec_path, "experiment spec file")->required()->check(CLI::ExistingFile);
  experiment->add_option("--only", only, "run only this section");

  auto* region = app.add_subcommand("region", "(p, q) trade-off of optimal policies over rejection costs");
  SystemArgs region_sys;
  region_sys.attach(region);
  std::vector<double> weights = {1, 2, 5, 10, 20, 50};
  region->add_option("--weights", weights, "effective rejection costs")->delimiter(',');

  auto* structure = app.add_subcommand("structure", "action tables of OPT and index policies (n = 2)");
  SystemArgs st_sys;
  st_sys.attach(structure);
  std::vector<std::string> st_policies = {"PI", "RB", "IO"};
  structure->add_option("--policies", st_policies)->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    Sink sink(experiment->parsed() ? std::string() : g.out);
    auto& out = sink.get();
    if (indices->parsed()) {
      const auto k = parse_kind(kind);
      if (k == sr::IndexKind::PI) {
        sr::build_index_table(sys.build(), k, states).write_csv(out);
      } else {
        // IO and RB need no stable system, so overloaded queues are allowed here.
        const auto cl = sr::parse_clusters(sys.clusters);
        const auto d = sr::DeadlineDistribution::parse(sys.deadline);
        double lambda = sys.lambda.value_or(0.0);
        if (!sys.lambda) {
          for (const auto& c : cl) lambda += c.servers * c.rate;
          lambda *= sys.rho.value_or(0.9);
        }
        std::vector<sr::IndexColumn> cols;
        for (const auto& c : cl) {
          cols.push_back(k == sr::IndexKind::IO ? sr::io_index(c, d, states) : sr::rb_index(c, lambda, d, states));
        }
        sr::IndexTable(k, std::move(cols)).write_csv(out);
      }
    } else if (bs->parsed()) {
      const auto config = bs_sys.build();
      const auto sol = sr::solve_optimal_bs(config);
      const auto& c = sol.certificate;
      out << "rejected," << fmt(sol.split.rejected) << '\n';
      for (std::size_t k = 0; k < sol.split.routed.size(); ++k) {
        out << "routed_" << k + 1 << ',' << fmt(sol.split.routed[k]) << ','
            << sr::to_string(c.status[k]) << '\n';
      }
      out << "multiplier," << fmt(c.multiplier) << '\n'
          << "load_case," << sr::to_string(c.load_case) << '\n'
          << "kkt_residual," << fmt(c.max_residual()) << '\n'
          << "cost_per_job," << fmt(sr::bs_objective(config, sol.split) / config.arrival_rate()) << '\n';
    } else if (solve->parsed()) {
      const sr::TruncatedMdp mdp(solve_sys.build(), g.buffer);
      const auto sol = sr::solve_optimal(mdp, {g.tol});
      out << "cost_rate," << fmt(sol.cost_rate) << '\n'
          << "cost_per_job," << fmt(sol.cost_per_job) << '\n'
          << "lower_bound," << fmt(sol.lower_bound) << '\n'
          << "upper_bound," << fmt(sol.upper_bound) << '\n'
          << "iterations," << sol.iterations << '\n';
      if (!policy_out.empty()) {
        std::ofstream f(policy_out);
        if (!f) throw std::runtime_error("cannot write " + policy_out);
        sr::write_policy_csv(f, mdp.lattice(), sol.policy(mdp.lattice()));
      }
    } else if (evaluate->parsed()) {
      const auto config = eval_sys.build();
      const sr::TruncatedMdp mdp(config, g.buffer);
      const auto ev = sr::evaluate_policy(mdp, *named_policy(policy_name, config, g, states));
      out << "cost_rate," << fmt(ev.cost_rate) << '\n'
          << "cost_per_job," << fmt(ev.cost_per_job) << '\n'
          << "p," << fmt(ev.rejection_ratio) << '\n'
          << "q," << fmt(ev.miss_ratio) << '\n'
          << "blocked," << fmt(ev.blocked_ratio) << '\n'
          << "turned_away," << fmt(ev.turned_away_ratio) << '\n';
    } else if (simulate->parsed()) {
      sr::SimConfig sim{sim_sys.build(), nullptr};
      sim.policy = named_policy(policy_name, sim.config, g, states);
      sim.horizon = horizon;
      sim.replications = replications;
      sim.seed = g.seed;
      sr::write_sim_csv(out, "cli", policy_name, sr::simulate(sim));
    } else if (experiment->parsed()) {
      return run_experiments(spec_path, only, g, seed_opt->count() > 0, buffer_opt->count() > 0,
                             tol_opt->count() > 0);
    } else if (region->parsed()) {
      out << "R,p,q,cost_per_job\n";
      for (const auto& pt : sr::achievable_region_sample(region_sys.build(), g.buffer, weights, {g.tol})) {
        out << fmt(pt.rejection_cost) << ',' << fmt(pt.rejection_ratio) << ',' << fmt(pt.miss_ratio) << ','
            << fmt(pt.cost_per_job) << '\n';
      }
    } else if (structure->parsed()) {
      sr::ExperimentSpec spec;
      spec.kind = sr::ExperimentKind::PolicyStructure;
      const auto config = st_sys.build();
      spec.clusters = config.clusters();
      spec.deadline = st_sys.deadline;
      spec.rho_grid = {config.load()};
      spec.R_grid = {config.rejection_cost()};
      spec.policies = st_policies;
      spec.buffer = g.buffer;
      spec.tol = g.tol;
      for (const auto& d : sr::emit_policy_structure(spec, out)) {
        std::cerr << d.policy << " rejects in " << d.rejection_cells << " cells\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
