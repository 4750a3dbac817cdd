// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "softroute/softroute.hpp"

using namespace softroute;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(b), 1e-300); }

SystemConfig base_instance(double rho, double R, const std::string& deadline = "const:1") {
  return SystemConfig::at_load(rho, R, {ClusterConfig(4, 5.0), ClusterConfig(8, 3.0)},
                               DeadlineDistribution::parse(deadline));
}

// ---------------------------------------------------------------- 1

void rb_limit() {
  const double closed = (5.0 * std::exp(8.0) - 1.0) / 4.0;
  const ClusterConfig c(1, 1.0);
  const auto d = DeadlineDistribution::constant(2.0);
  auto col = rb_index(c, 5.0, d, 200);  // warm-up
  double best_ms = INFINITY;
  for (int rep = 0; rep < 25; ++rep) {
    const auto t0 = Clock::now();
    col = rb_index(c, 5.0, d, 200);
    best_ms = std::min(best_ms, 1e3 * seconds_since(t0));
  }
  const double at200 = col(200);
  const bool ok = rel_close(at200, closed, 1e-3) && std::abs(col.limit - 3725.95) < 0.005 &&
                  rel_close(rb_limit_m1(1.0, 5.0, 2.0), closed, 1e-12) && best_ms < 1.0;
  report(1, "RB limit", ok,
         fmt("nu(200)=%.6f limit=%.6f closed=%.6f rel=%.2e, %.3f ms", at200, col.limit, closed,
             std::abs(at200 - closed) / closed, best_ms));
}

// ---------------------------------------------------------------- 2

void closed_forms() {
  const auto t0 = Clock::now();
  double worst_a = 0.0, worst_b = 0.0, worst_c = 0.0;
  long compared_b = 0;

  for (double rho : {0.5, 1.0, 2.0, 5.0}) {
    for (double t : {0.5, 1.0, 2.0}) {
      const double mu = 1.3;
      const auto col = rb_index(ClusterConfig(1, mu), rho * mu, DeadlineDistribution::constant(t), 50);
      for (long x = 0; x <= 50; ++x) {
        const double closed = rb_index_closed_form_m1(mu, rho * mu, t, x);
        worst_a = std::max(worst_a, std::abs(col(x) - closed) / std::abs(closed));
      }
    }
  }

  for (const char* dl : {"const:1", "unif:0.3:1.7", "exp:1"}) {
    for (double rho : {0.5, 0.7, 0.9}) {
      for (double R : {1.0, 5.0, 20.0}) {
        const auto config = base_instance(rho, R, dl);
        const auto bs = solve_optimal_bs(config);
        for (std::size_t k = 0; k < config.size(); ++k) {
          if (bs.certificate.status[k] != QueueStatus::Interior) continue;
          const auto& c = config.cluster(k);
          const double lam = bs.split.routed[k];
          // both forms carry a rho^-x factor; stay where it amplifies roundoff by < 1e6
          const long top = std::min(40L, static_cast<long>(std::log(1e6) / -std::log(lam / c.capacity())));
          const auto fwd = pi_index_forward(c, lam, config.deadline(), top);
          const auto closed = pi_index_closed_form(c, lam, config.deadline(), top);
          for (std::size_t x = 0; x < fwd.size(); ++x) {
            worst_b = std::max(worst_b, std::abs(fwd[x] - closed[x]) / std::abs(closed[x]));
            ++compared_b;
          }
        }
      }
    }
  }

  for (int m : {1, 4, 8, 20}) {
    for (double mu : {0.5, 3.0, 5.0}) {
      for (double t : {0.1, 1.0, 4.0}) {
        const auto table = erlang_survival_table(m, mu, 200, t);
        for (long j = 1; j <= 200; ++j) {
          worst_c = std::max(worst_c, std::abs(table[static_cast<std::size_t>(j)] - erlang_survival(m, mu, j, t)));
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_a < 1e-6 && worst_b < 1e-8 && compared_b > 0 && worst_c < 1e-12 && secs < 1.0;
  report(2, "closed form vs recursion", ok,
         fmt("RB rel %.2e, PI rel %.2e over %ld points, Q abs %.2e, %.3f s", worst_a, worst_b, compared_b, worst_c,
             secs));
}

// ---------------------------------------------------------------- 3

void oracle_consistency() {
  double worst_eval = 0.0, worst_equiv = 0.0, slowest = 0.0;
  bool all_hold = true;
  for (double rho : {0.5, 0.9}) {
    for (double R : {1.0, 5.0, 20.0}) {
      const auto config = base_instance(rho, R);
      const TruncatedMdp mdp(config, 60);
      const auto t0 = Clock::now();
      const auto sol = solve_optimal(mdp, {1e-11});
      slowest = std::max(slowest, seconds_since(t0));
      const auto ev = evaluate_policy(mdp, sol.policy(mdp.lattice()));
      worst_eval = std::max(worst_eval, std::abs(ev.cost_rate - sol.cost_rate) / sol.cost_rate);
      const auto t1 = Clock::now();
      const auto rep = verify_equivalence(config, 60, 1e-7, {1e-11});
      slowest = std::max(slowest, seconds_since(t1) / 2);
      worst_equiv = std::max(worst_equiv, rep.relative_gap);
      all_hold = all_hold && rep.holds;
    }
  }
  const bool ok = worst_eval < 1e-7 && worst_equiv < 1e-7 && all_hold && slowest < 60.0;
  report(3, "oracle consistency", ok,
         fmt("evaluation rel %.2e, equivalence rel %.2e, slowest solve %.2f s", worst_eval, worst_equiv, slowest));
}

// ---------------------------------------------------------------- 4

struct PointRows {
  GridPoint point;
  double lambda;
  std::map<std::string, ExperimentRow> by_policy;
};

std::vector<PointRows> run_grid(ExperimentSpec spec) {
  spec.policies = {"BS", "IO", "PI", "RB"};
  spec.oracle = true;
  spec.simulate = false;
  const auto points = expand_grid(spec);
  const auto result = run_experiment(spec);
  std::vector<PointRows> out;
  std::size_t next = 0;
  for (const auto& pt : points) {
    double capacity = 0.0;
    for (const auto& c : pt.clusters) capacity += c.capacity();
    PointRows pr{pt, pt.rho * capacity, {}};
    for (std::size_t i = 0; i < 1 + spec.policies.size(); ++i, ++next) {
      const auto& row = result.rows.at(next);
      pr.by_policy[row.policy] = row;
    }
    out.push_back(std::move(pr));
  }
  if (next != result.rows.size() || result.failures) throw std::runtime_error(spec.name + ": unexpected rows");
  return out;
}

void optimality_ordering() {
  const auto t0 = Clock::now();
  std::vector<ExperimentSpec> specs;
  for (const char* file : {"load.cfg", "rejection_cost.cfg", "speed.cfg", "pool.cfg", "deadline_magnitude.cfg"}) {
    for (auto& s : load_experiment_specs(std::string(SOFTROUTE_CONFIG_DIR) + "/" + file)) specs.push_back(s);
  }
  long points = 0, violations = 0;
  double worst = 0.0;
  bool pi_best = true;
  std::string pi_detail;
  for (const auto& spec : specs) {
    for (const auto& pr : run_grid(spec)) {
      ++points;
      const auto& opt = pr.by_policy.at("OPT");
      const double g_opt = opt.cost_per_job * pr.lambda;
      for (const char* name : {"BS", "IO", "PI", "RB"}) {
        const double g = pr.by_policy.at(name).cost_per_job * pr.lambda;
        worst = std::min(worst, g - g_opt);
        if (g_opt > g + 1e-6) ++violations;
      }
      if (spec.name == "load_const" && std::abs(pr.point.rho - 0.9) < 1e-12) {
        const double pi = pr.by_policy.at("PI").optimality_gap;
        bool best = true;
        for (const char* name : {"BS", "IO", "RB"}) best = best && pi <= pr.by_policy.at(name).optimality_gap;
        pi_best = pi_best && best;
        pi_detail += fmt(" R=%g:%.3g%%%s", pr.point.R, 100 * pi, best ? "" : "(not best)");
      }
    }
  }
  const bool ok = violations == 0 && pi_best && points > 0;
  report(4, "optimality ordering", ok,
         fmt("%ld grid points, %ld violations, min g-g* %.2e; PI gap at rho=0.9%s; %.0f s", points, violations, worst,
             pi_detail.c_str(), seconds_since(t0)));
}

// ---------------------------------------------------------------- 5

void qualitative() {
  auto eval = [](const SystemConfig& config, IndexKind kind) {
    const TruncatedMdp mdp(config, 60);
    const auto split = solve_optimal_bs(config).split;
    return evaluate_policy(mdp, make_index_policy(config, kind, kDefaultMaxState, split));
  };
  const auto hi = base_instance(0.9, 20.0);
  const double rb20 = eval(hi, IndexKind::RB).cost_rate, pi20 = eval(hi, IndexKind::PI).cost_rate;
  const auto lo = base_instance(0.9, 1.0);
  const auto io1 = eval(lo, IndexKind::IO);
  const double pi1 = eval(lo, IndexKind::PI).cost_rate;

  ExperimentSpec s;
  s.kind = ExperimentKind::PolicyStructure;
  s.clusters = {ClusterConfig(4, 5.0), ClusterConfig(8, 3.0)};
  s.rho_grid = {0.9};
  s.R_grid = {4.0};
  s.policies = {"RB"};
  std::ostringstream sink;
  const auto dumps = emit_policy_structure(s, sink);
  const std::size_t opt_cells = dumps.at(0).rejection_cells, rb_cells = dumps.at(1).rejection_cells;

  const bool ok = rb20 > pi20 && io1.cost_rate > pi1 && io1.rejection_ratio == 0.0 && rb_cells > opt_cells;
  report(5, "qualitative behaviours", ok,
         fmt("R=20: g(RB)=%.6f g(PI)=%.6f; R=1: g(IO)=%.6f g(PI)=%.6f p(IO)=%g; reject cells RB %zu OPT %zu", rb20,
             pi20, io1.cost_rate, pi1, io1.rejection_ratio, rb_cells, opt_cells));
}

// ---------------------------------------------------------------- 6

void pure_routing() {
  bool ok = true;
  std::string detail;
  for (double rho : {0.7, 0.9}) {
    ExperimentSpec s;
    s.name = "pure";
    s.clusters = {ClusterConfig(4, 5.0), ClusterConfig(8, 3.0)};
    s.rho_grid = {rho};
    s.R_grid = {kInfiniteRejectionCost};
    const auto pr = run_grid(s).at(0);
    auto gap = [&](const char* n) { return pr.by_policy.at(n).optimality_gap; };
    const bool here = std::max(gap("PI"), gap("RB")) < std::min(gap("IO"), gap("BS"));
    ok = ok && here;
    detail += fmt("%srho=%.1f gaps PI %.3g%% RB %.3g%% IO %.3g%% BS %.3g%%", detail.empty() ? "" : "; ", rho,
                  100 * gap("PI"), 100 * gap("RB"), 100 * gap("IO"), 100 * gap("BS"));
  }
  report(6, "pure routing", ok, detail);
}

// ---------------------------------------------------------------- 7

double grid_search(const SystemConfig& config) {
  const double lambda = config.arrival_rate();
  const auto& c1 = config.cluster(0);
  const auto& c2 = config.cluster(1);
  const auto& d = config.deadline();
  const double cap1 = c1.capacity() * (1 - 1e-9), cap2 = c2.capacity() * (1 - 1e-9);
  auto cost = [&](double l1, double l2) {
    return config.rejection_cost() * (lambda - l1 - l2) + miss_rate(c1, l1, d) + miss_rate(c2, l2, d);
  };
  const int N = 1000;
  double lo1 = 0.0, hi1 = std::min(cap1, lambda);
  double best = INFINITY, best1 = 0.0;
  for (int stage = 0; stage < 2; ++stage) {
    const double h = (hi1 - lo1) / (N - 1);
    for (int i = 0; i < N; ++i) {
      const double l1 = lo1 + i * h;
      const double top = std::min(cap2, lambda - l1);
      if (top < 0) continue;
      for (int k = 0; k < N; ++k) {
        const double v = cost(l1, top * k / (N - 1));
        if (v < best) {
          best = v;
          best1 = l1;
        }
      }
    }
    lo1 = std::max(0.0, best1 - 2 * h);
    hi1 = std::min(std::min(cap1, lambda), best1 + 2 * h);
  }
  return best;
}

void bs_optimizer() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pools(1, 10), count(2, 4);
  std::uniform_real_distribution<double> rate(0.3, 6.0), load(0.1, 0.98), cost(1.0, 30.0), tdist(0.2, 3.0);
  double worst_kkt = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClusterConfig> cl;
    for (int k = count(rng); k > 0; --k) cl.emplace_back(pools(rng), rate(rng));
    DeadlineDistribution d = DeadlineDistribution::constant(tdist(rng));
    if (trial % 3 == 1) {
      const double a = tdist(rng);
      d = DeadlineDistribution::uniform(0.1 * a, 1.9 * a);
    } else if (trial % 3 == 2) {
      d = DeadlineDistribution::exponential(1.0 / tdist(rng));
    }
    const double R = trial % 5 == 4 ? kInfiniteRejectionCost : cost(rng);
    worst_kkt = std::max(worst_kkt, solve_optimal_bs(SystemConfig::at_load(load(rng), R, cl, d)).certificate.max_residual());
  }

  double worst_grid = 0.0;
  const std::vector<ClusterConfig> pair = {ClusterConfig(2, 1.0), ClusterConfig(1, 1.5)};
  for (const char* dl : {"const:1", "unif:0.3:1.7", "exp:1"}) {
    for (double R : {1.2, 3.0}) {
      const SystemConfig config(2.8, R, pair, DeadlineDistribution::parse(dl));
      const double opt = bs_objective(config, solve_optimal_bs(config).split);
      worst_grid = std::max(worst_grid, std::abs(opt - grid_search(config)));
    }
  }

  const auto unit = solve_optimal_bs(base_instance(0.9, 1.0));
  bool interior = true;
  for (std::size_t k = 0; k < 2; ++k) {
    interior = interior && unit.certificate.status[k] == QueueStatus::Interior && unit.split.routed[k] > 0.0 &&
               unit.split.routed[k] < 4.0 * 5.0 + 8.0 * 3.0;
  }
  const bool ok = worst_kkt < 1e-8 && worst_grid < 1e-5 && interior;
  report(7, "BS optimizer", ok,
         fmt("max KKT residual %.2e over 20 instances, grid search diff %.2e, R=1 split (%.4f, %.4f)", worst_kkt,
             worst_grid, unit.split.routed[0], unit.split.routed[1]));
}

// ---------------------------------------------------------------- 8

void simulator() {
  struct Pair {
    double rho, R;
    const char* deadline;
    const char* policy;
  };
  const Pair pairs[] = {
      {0.9, 5.0, "const:1", "PI"},        {0.9, 5.0, "const:1", "RB"},       {0.7, kInfiniteRejectionCost, "const:1", "IO"},
      {0.5, 1.0, "const:1", "BS"},        {0.8, 20.0, "unif:0.3:1.7", "PI"}, {0.9, 1.0, "exp:1", "RB"},
  };
  bool ok = true;
  double worst_z = 0.0, slowest = 0.0;
  std::uint64_t seed = 1;
  for (const auto& p : pairs) {
    const auto config = base_instance(p.rho, p.R, p.deadline);
    const auto split = solve_optimal_bs(config).split;
    const auto policy = detail::make_named_policy(p.policy, config, split, kDefaultMaxState);
    const double exact = evaluate_policy(TruncatedMdp(config, 60), *policy).cost_per_job;
    SimConfig sim{config, policy};
    sim.horizon = 1'000'000;
    sim.replications = 16;
    sim.seed = seed++;
    const auto t0 = Clock::now();
    const auto r = simulate(sim);
    slowest = std::max(slowest, seconds_since(t0));
    const double z = std::abs(r.cost_per_job.mean - exact) / r.cost_per_job.se;
    worst_z = std::max(worst_z, z);
    ok = ok && z <= 3.0;
  }
  ok = ok && slowest < 30.0;
  report(8, "simulator cross-validation", ok,
         fmt("6 pairs, 16 x 1e6 jobs each, worst |sim-exact|/se %.2f, slowest pair %.2f s", worst_z, slowest));
}

// ---------------------------------------------------------------- 9

void deadline_ordering() {
  double g[3];
  const char* laws[] = {"const:1", "unif:0.3:1.7", "exp:1"};
  for (int i = 0; i < 3; ++i) g[i] = solve_optimal(TruncatedMdp(base_instance(0.9, 5.0, laws[i]), 60)).cost_per_job;
  report(9, "deadline variability ordering", g[0] <= g[1] && g[1] <= g[2],
         fmt("const %.6f, uniform %.6f, exponential %.6f", g[0], g[1], g[2]));
}

}  // namespace

int main() {
  const std::pair<int, void (*)()> criteria[] = {
      {1, rb_limit},          {2, closed_forms}, {3, oracle_consistency}, {4, optimality_ordering}, {5, qualitative},
      {6, pure_routing},      {7, bs_optimizer}, {8, simulator},          {9, deadline_ordering},
  };
  for (const auto& [id, run] : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      report(id, "criterion", false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of 9 criteria failed\n", failures);
  return failures ? 1 : 0;
}
