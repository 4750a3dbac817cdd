#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "softroute/bernoulli_split.hpp"
#include "softroute/miss_probability.hpp"
#include "softroute/model.hpp"
#include "softroute/numeric.hpp"
#include "softroute/policy.hpp"

namespace softroute {

/// ActionDependent charges lambda P_k(x_k) when routing to k; HoldingCost
/// charges h_k(x_k) continuously instead. Both charge lambda R on rejection.
enum class CostFormulation { ActionDependent, HoldingCost };

inline constexpr int kDefaultBuffer = 60;

/// The joint queue process on {0..B}^n, uniformized at
/// Lambda = lambda + sum_k m_k mu_k.
///
/// Truncation: a full queue (x_k = B) accepts no arrivals. An arrival that
/// finds every queue full is turned away at cost R, or at the cost of one
/// deadline miss when R = infinity; evaluations report such arrivals apart
/// from rejections and misses. With R = infinity the reject action is
/// otherwise unavailable.
class TruncatedMdp {
 public:
  TruncatedMdp(SystemConfig config, int buffer = kDefaultBuffer,
               CostFormulation formulation = CostFormulation::HoldingCost)
      : config_(std::move(config)), lattice_(config_.size(), buffer), formulation_(formulation) {
    int largest_pool = 0;
    for (const auto& c : config_.clusters()) largest_pool = std::max(largest_pool, c.servers);
    if (buffer < largest_pool) throw std::invalid_argument("buffer must be at least the largest server pool");
    if (config_.size() > 3) throw std::invalid_argument("exact solves are limited to n <= 3 clusters");
    uniformization_ = config_.arrival_rate() + config_.total_capacity();
    for (const auto& c : config_.clusters()) miss_.emplace_back(c, config_.deadline(), buffer);

    const std::size_t n = config_.size();
    coords_.resize(lattice_.size() * n);
    holding_.assign(lattice_.size(), 0.0);
    departures_.assign(lattice_.size(), 0.0);
    std::vector<int> x(n);
    for (std::size_t s = 0; s < lattice_.size(); ++s) {
      lattice_.decode(s, x);
      for (std::size_t k = 0; k < n; ++k) {
        coords_[s * n + k] = x[k];
        departures_[s] += config_.cluster(k).service_rate(x[k]);
        holding_[s] += holding_cost(miss_[k], x[k]);
      }
    }
  }

  const SystemConfig& config() const { return config_; }
  const StateLattice& lattice() const { return lattice_; }
  std::size_t states() const { return lattice_.size(); }
  std::size_t clusters() const { return config_.size(); }
  int buffer() const { return lattice_.buffer(); }
  CostFormulation formulation() const { return formulation_; }
  double uniformization() const { return uniformization_; }
  const MissProbTable& miss(std::size_t k) const { return miss_[k]; }

  bool reject_allowed() const { return !config_.pure_routing(); }
  bool full(std::size_t s, std::size_t k) const { return coordinate(s, k) == buffer(); }
  /// Every queue full: the arrival cannot join any of them.
  bool blocked(std::size_t s) const {
    for (std::size_t k = 0; k < clusters(); ++k) {
      if (!full(s, k)) return false;
    }
    return true;
  }
  /// Cost of an arrival that finds every queue full.
  double blocked_cost() const { return reject_allowed() ? config_.rejection_cost() : 1.0; }
  int coordinate(std::size_t s, std::size_t k) const { return coords_[s * config_.size() + k]; }
  /// Total departure rate sum_k mubar_k(x_k).
  double departure_rate(std::size_t s) const { return departures_[s]; }

  /// Cost per unit time accrued in state s regardless of the action.
  double state_cost(std::size_t s) const {
    return formulation_ == CostFormulation::HoldingCost ? holding_[s] : 0.0;
  }

  /// Cost per arrival routed to k (not full) from state s.
  double route_cost(std::size_t s, std::size_t k) const {
    return formulation_ == CostFormulation::ActionDependent ? miss_[k][coordinate(s, k)] : 0.0;
  }

  /// Deadline-miss probability of an arrival routed to k from s.
  double miss_cost(std::size_t s, std::size_t k) const { return miss_[k][coordinate(s, k)]; }

  /// Destination of an arrival routed to k (not full) from s.
  std::size_t route_target(std::size_t s, std::size_t k) const { return s + lattice_.stride(k); }

  /// Where an arrival meant for a full queue goes instead: the open queue
  /// with the smallest miss probability (lowest id on ties), or none.
  std::optional<std::size_t> fallback(std::size_t s) const {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < clusters(); ++k) {
      if (full(s, k)) continue;
      if (!best || miss_cost(s, k) < miss_cost(s, *best)) best = k;
    }
    return best;
  }

  /// Queue with the smallest P_k(B); the nominal action of a blocked state
  /// under pure routing.
  std::size_t cheapest_full_queue() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < clusters(); ++k) {
      if (miss_[k][buffer()] < miss_[best][buffer()]) best = k;
    }
    return best;
  }

  TruncatedMdp with_formulation(CostFormulation f) const { return TruncatedMdp(config_, buffer(), f); }

 private:
  SystemConfig config_;
  StateLattice lattice_;
  CostFormulation formulation_;
  double uniformization_ = 0.0;
  std::vector<MissProbTable> miss_;
  std::vector<int> coords_;
  std::vector<double> holding_;
  std::vector<double> departures_;
};

struct SolveOptions {
  double tol = 1e-9;  // relative accuracy of the average cost (or the roundoff floor, if coarser)
  long max_iterations = 1'000'000;
};

struct MdpSolution {
  double cost_rate = 0.0;  // v*, per unit time
  double cost_per_job = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  std::vector<double> relative_values;  // anchored at the empty state
  std::vector<Action> actions;
  long iterations = 0;

  TabularPolicy policy(const StateLattice& lattice, std::string name = "OPT") const {
    return TabularPolicy(lattice, actions, std::move(name));
  }
};

namespace detail {

/// One Bellman backup at s: returns the minimizing action and the value
/// lambda * (best arrival cost + continuation).
inline std::pair<Action, double> best_arrival(const TruncatedMdp& mdp, const std::vector<double>& v, std::size_t s) {
  const double lambda = mdp.config().arrival_rate();
  if (mdp.blocked(s)) {
    const Action a = mdp.reject_allowed() ? Action::reject() : Action::route_to(static_cast<int>(mdp.cheapest_full_queue()));
    return {a, lambda * (mdp.blocked_cost() + v[s])};
  }
  Action best = Action::reject();
  double value = std::numeric_limits<double>::infinity();
  if (mdp.reject_allowed()) value = mdp.config().rejection_cost() + v[s];
  for (std::size_t k = 0; k < mdp.clusters(); ++k) {
    if (mdp.full(s, k)) continue;
    const double q = mdp.route_cost(s, k) + v[mdp.route_target(s, k)];
    // strict improvement beyond roundoff; ties keep rejection, then the lowest k
    if (std::isinf(value) ? q < value : q < value - 1e-13 * std::max(1.0, std::abs(value))) {
      value = q;
      best = Action::route_to(static_cast<int>(k));
    }
  }
  return {best, lambda * value};
}

}  // namespace detail

/// Average-cost optimum by relative value iteration on the uniformized chain.
/// The reported cost rate is the midpoint of the standard bounds
/// Lambda min(TV - V) <= v* <= Lambda max(TV - V), stopped when their gap is
/// below tol times v*.
inline MdpSolution solve_optimal(const TruncatedMdp& mdp, const SolveOptions& options = {}) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const std::size_t N = mdp.states();
  const std::size_t n = mdp.clusters();
  const double L = mdp.uniformization();
  const double lambda = mdp.config().arrival_rate();
  const auto& lattice = mdp.lattice();

  std::vector<double> v(N, 0.0), next(N, 0.0);
  MdpSolution sol;
  for (long it = 1; it <= options.max_iterations; ++it) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t s = 0; s < N; ++s) {
      double total = mdp.state_cost(s) + detail::best_arrival(mdp, v, s).second;
      double stay = L - lambda;
      for (std::size_t k = 0; k < n; ++k) {
        const int xk = mdp.coordinate(s, k);
        if (xk == 0) continue;
        const double rate = mdp.config().cluster(k).service_rate(xk);
        total += rate * v[s - lattice.stride(k)];
        stay -= rate;
      }
      total += stay * v[s];
      next[s] = total / L;
      const double diff = next[s] - v[s];
      lo = std::min(lo, diff);
      hi = std::max(hi, diff);
    }
    const double anchor = next[0];
    double vmax = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
      v[s] = next[s] - anchor;
      vmax = std::max(vmax, std::abs(v[s]));
    }
    sol.iterations = it;
    sol.lower_bound = L * lo;
    sol.upper_bound = L * hi;
    const double g = 0.5 * (sol.lower_bound + sol.upper_bound);
    // tiny costs (long deadlines) can sit below the roundoff of the sweep itself
    const double floor = 16 * std::numeric_limits<double>::epsilon() * L * vmax;
    if (sol.upper_bound - sol.lower_bound <= std::max(options.tol * std::abs(g), floor)) break;
    if (it == options.max_iterations) {
      std::ostringstream msg;
      msg << "relative value iteration did not converge in " << it << " sweeps (bounds " << sol.lower_bound << ", "
          << sol.upper_bound << ")";
      throw convergence_error(msg.str());
    }
  }
  sol.cost_rate = 0.5 * (sol.lower_bound + sol.upper_bound);
  sol.cost_per_job = sol.cost_rate / lambda;
  sol.actions.resize(N);
  for (std::size_t s = 0; s < N; ++s) sol.actions[s] = detail::best_arrival(mdp, v, s).first;
  sol.relative_values = std::move(v);
  return sol;
}

// ---------------------------------------------------------------- policy evaluation

struct PolicyEvaluation {
  double cost_rate = 0.0;     // g, under the model's cost formulation
  double cost_per_job = 0.0;  // g / lambda
  double rejection_ratio = 0.0;  // rejected by the policy
  double miss_ratio = 0.0;
  double blocked_ratio = 0.0;      // sent to a full queue (rerouted or turned away)
  double turned_away_ratio = 0.0;  // arrived with every queue full; charged the blocked cost
  double identity_residual = 0.0;  // |g - lambda (R p + q + c t)| / g
  std::vector<double> stationary;
  std::vector<double> relative_values;  // anchored at the empty state
};

namespace detail {

struct PolicyChain {
  Eigen::SparseMatrix<double> generator;
  std::vector<double> reject_rate;   // lambda * P(reject | x)
  std::vector<double> miss_rate;     // lambda * sum_k P(route k | x) P_k(x_k)
  std::vector<double> blocked_rate;
  std::vector<double> turned_away_rate;
  std::vector<double> model_cost;    // model cost rate excluding rejections
};

inline PolicyChain build_chain(const TruncatedMdp& mdp, const Policy& policy) {
  if (policy.clusters() != mdp.clusters()) throw std::invalid_argument("policy and model disagree on cluster count");
  const std::size_t N = mdp.states();
  const std::size_t n = mdp.clusters();
  const double lambda = mdp.config().arrival_rate();
  PolicyChain chain;
  chain.reject_rate.assign(N, 0.0);
  chain.miss_rate.assign(N, 0.0);
  chain.blocked_rate.assign(N, 0.0);
  chain.turned_away_rate.assign(N, 0.0);
  chain.model_cost.assign(N, 0.0);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(N * (2 * n + 1));
  std::vector<int> x(n);
  std::vector<double> probs(n + 1);
  for (std::size_t s = 0; s < N; ++s) {
    mdp.lattice().decode(s, x);
    policy.distribution(x, probs);
    double out = 0.0;
    chain.model_cost[s] = mdp.state_cost(s);
    const auto fallback = mdp.fallback(s);
    auto turn_away = [&](double rate) {
      chain.turned_away_rate[s] += rate;
      chain.model_cost[s] += rate * mdp.blocked_cost();
    };
    if (probs[0] > 0.0) chain.reject_rate[s] += lambda * probs[0];
    for (std::size_t k = 0; k < n; ++k) {
      const double rate = lambda * probs[k + 1];
      if (rate <= 0.0) continue;
      std::size_t j = k;
      if (mdp.full(s, k)) {
        chain.blocked_rate[s] += rate;
        if (!fallback) {
          turn_away(rate);
          continue;
        }
        j = *fallback;
      }
      chain.miss_rate[s] += rate * mdp.miss_cost(s, j);
      chain.model_cost[s] += rate * mdp.route_cost(s, j);
      entries.emplace_back(static_cast<int>(s), static_cast<int>(mdp.route_target(s, j)), rate);
      out += rate;
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (x[k] == 0) continue;
      const double rate = mdp.config().cluster(k).service_rate(x[k]);
      entries.emplace_back(static_cast<int>(s), static_cast<int>(s - mdp.lattice().stride(k)), rate);
      out += rate;
    }
    entries.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
  }
  chain.generator.resize(static_cast<int>(N), static_cast<int>(N));
  chain.generator.setFromTriplets(entries.begin(), entries.end());
  chain.generator.makeCompressed();
  return chain;
}

inline Eigen::VectorXd solve_sparse(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& rhs, const char* what) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw convergence_error(std::string(what) + ": factorization failed");
  Eigen::VectorXd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw convergence_error(std::string(what) + ": solve failed");
  return sol;
}

}  // namespace detail

/// Exact evaluation of a stationary (possibly randomized) policy on the
/// truncated model: stationary distribution, average cost, rejection and
/// miss ratios, and relative costs from the Poisson equation with b(0) = 0.
/// Arrivals the policy sends to a full queue go to the open queue with the
/// smallest miss probability instead.
inline PolicyEvaluation evaluate_policy(const TruncatedMdp& mdp, const Policy& policy) {
  const auto chain = detail::build_chain(mdp, policy);
  const int N = static_cast<int>(mdp.states());
  const double lambda = mdp.config().arrival_rate();
  const double R = mdp.config().rejection_cost();

  // pi Q = 0 with the first balance equation replaced by normalization.
  Eigen::SparseMatrix<double> At = chain.generator.transpose();
  {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(At.nonZeros()) + static_cast<std::size_t>(N));
    for (int col = 0; col < At.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(At, col); it; ++it) {
        if (it.row() != 0) entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      }
    }
    for (int j = 0; j < N; ++j) entries.emplace_back(0, j, 1.0);
    At.setFromTriplets(entries.begin(), entries.end());
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
  rhs[0] = 1.0;
  Eigen::VectorXd pi = detail::solve_sparse(At, rhs, "stationary distribution");
  for (int s = 0; s < N; ++s) pi[s] = std::max(pi[s], 0.0);
  pi /= pi.sum();

  PolicyEvaluation ev;
  ev.stationary.assign(pi.data(), pi.data() + N);
  double rejected = 0.0, missed = 0.0, blocked = 0.0, turned = 0.0, other = 0.0;
  for (int s = 0; s < N; ++s) {
    rejected += pi[s] * chain.reject_rate[static_cast<std::size_t>(s)];
    missed += pi[s] * chain.miss_rate[static_cast<std::size_t>(s)];
    blocked += pi[s] * chain.blocked_rate[static_cast<std::size_t>(s)];
    turned += pi[s] * chain.turned_away_rate[static_cast<std::size_t>(s)];
    other += pi[s] * chain.model_cost[static_cast<std::size_t>(s)];
  }
  ev.rejection_ratio = std::clamp(rejected / lambda, 0.0, 1.0);
  ev.miss_ratio = std::clamp(missed / lambda, 0.0, 1.0);
  ev.blocked_ratio = blocked / lambda;
  ev.turned_away_ratio = turned / lambda;

  const bool infinite = std::isinf(R) && rejected > 0.0;
  if (infinite) {
    ev.cost_rate = std::numeric_limits<double>::infinity();
    ev.cost_per_job = ev.cost_rate;
    return ev;
  }
  // Rejections are charged only where they happen; with R infinite and no
  // stationary rejections, transient rejecting states carry no cost.
  const double charge = std::isinf(R) ? 0.0 : R;
  std::vector<double> cost(static_cast<std::size_t>(N));
  for (int s = 0; s < N; ++s) {
    cost[static_cast<std::size_t>(s)] =
        chain.model_cost[static_cast<std::size_t>(s)] + charge * chain.reject_rate[static_cast<std::size_t>(s)];
  }
  ev.cost_rate = other + charge * rejected;
  ev.cost_per_job = ev.cost_rate / lambda;
  const double identity = lambda * ((charge > 0.0 ? charge * ev.rejection_ratio : 0.0) + ev.miss_ratio +
                                    mdp.blocked_cost() * ev.turned_away_ratio);
  ev.identity_residual = std::abs(ev.cost_rate - identity) / std::max(std::abs(ev.cost_rate), 1e-300);

  // Poisson equation Q b = g - c with b(0) = 0: drop state 0.
  if (N > 1) {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(chain.generator.nonZeros()));
    for (int col = 0; col < chain.generator.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(chain.generator, col); it; ++it) {
        if (it.row() > 0 && it.col() > 0) {
          entries.emplace_back(static_cast<int>(it.row()) - 1, static_cast<int>(it.col()) - 1, it.value());
        }
      }
    }
    Eigen::SparseMatrix<double> Q(N - 1, N - 1);
    Q.setFromTriplets(entries.begin(), entries.end());
    Eigen::VectorXd b(N - 1);
    for (int s = 1; s < N; ++s) b[s - 1] = ev.cost_rate - cost[static_cast<std::size_t>(s)];
    const Eigen::VectorXd sol = detail::solve_sparse(Q, b, "Poisson equation");
    ev.relative_values.assign(static_cast<std::size_t>(N), 0.0);
    for (int s = 1; s < N; ++s) ev.relative_values[static_cast<std::size_t>(s)] = sol[s - 1];
  } else {
    ev.relative_values.assign(1, 0.0);
  }
  return ev;
}

/// Cost rate of a Bernoulli split with every queue an independent M/M/m
/// system (no truncation).
inline PolicyEvaluation evaluate_split_exact(const SystemConfig& config, const BernoulliSplit& split) {
  const auto perf = evaluate_split(config, split);
  PolicyEvaluation ev;
  ev.cost_rate = perf.cost_rate;
  ev.cost_per_job = perf.cost_rate / config.arrival_rate();
  ev.rejection_ratio = perf.rejection_ratio;
  ev.miss_ratio = perf.miss_ratio;
  const double identity =
      config.arrival_rate() * ((split.rejected > 0.0 ? config.rejection_cost() * perf.rejection_ratio : 0.0) +
                               perf.miss_ratio);
  ev.identity_residual = std::abs(ev.cost_rate - identity) / std::max(std::abs(ev.cost_rate), 1e-300);
  return ev;
}

// ---------------------------------------------------------------- equivalence of the two formulations

/// C~_k(x) = sum_{y < x} P_k(y).
inline double cumulative_miss(const MissProbTable& table, long x) {
  double sum = 0.0;
  for (long y = 0; y < x; ++y) sum += table.at(y);
  return sum;
}

struct EquivalenceReport {
  double action_dependent_cost = 0.0;  // v*
  double holding_cost = 0.0;           // v~*
  double relative_gap = 0.0;
  double potential_spread = 0.0;  // max - min over states of b - b~ + sum_k C~_k(x_k)
  bool same_policy = false;
  bool holds = false;
};

/// Solves both cost formulations on the same truncation and checks that they
/// share the optimal cost, and that relative costs differ by the potential
/// sum_k C~_k(x_k) up to a constant (using exact evaluations of the optimal
/// holding-cost policy under both formulations).
inline EquivalenceReport verify_equivalence(const SystemConfig& config, int buffer, double tol = 1e-7,
                                            const SolveOptions& options = {}) {
  const TruncatedMdp direct(config, buffer, CostFormulation::ActionDependent);
  const TruncatedMdp holding(config, buffer, CostFormulation::HoldingCost);
  const auto a = solve_optimal(direct, options);
  const auto h = solve_optimal(holding, options);
  EquivalenceReport rep;
  rep.action_dependent_cost = a.cost_rate;
  rep.holding_cost = h.cost_rate;
  rep.relative_gap = std::abs(a.cost_rate - h.cost_rate) / std::max(std::abs(h.cost_rate), 1e-300);
  rep.same_policy = a.actions == h.actions;

  const auto policy = h.policy(holding.lattice());
  const auto ea = evaluate_policy(direct, policy);
  const auto eh = evaluate_policy(holding, policy);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t s = 0; s < holding.states(); ++s) {
    double potential = 0.0;
    for (std::size_t k = 0; k < holding.clusters(); ++k) {
      potential += cumulative_miss(holding.miss(k), holding.coordinate(s, k));
    }
    const double d = ea.relative_values[s] - eh.relative_values[s] + potential;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  rep.potential_spread = hi - lo;
  rep.holds = rep.relative_gap <= tol && rep.potential_spread <= tol * std::max(1.0, std::abs(hi));
  return rep;
}

// ---------------------------------------------------------------- achievable region and policy dumps

struct RegionPoint {
  double rejection_cost;
  double rejection_ratio;
  double miss_ratio;
  double cost_per_job;
};

/// Lower boundary of the achievable (p, q) region traced by solving the
/// R-weighted problem over a grid of effective rejection costs.
inline std::vector<RegionPoint> achievable_region_sample(const SystemConfig& config, int buffer,
                                                         const std::vector<double>& weights,
                                                         const SolveOptions& options = {}) {
  std::vector<RegionPoint> out;
  for (double R : weights) {
    const TruncatedMdp mdp(config.with_rejection_cost(R), buffer);
    const auto sol = solve_optimal(mdp, options);
    const auto ev = evaluate_policy(mdp, sol.policy(mdp.lattice()));
    out.push_back({R, ev.rejection_ratio, ev.miss_ratio, ev.cost_per_job});
  }
  return out;
}

/// CSV rows x1,..,xn,action over the lattice; action 0 rejects, k routes to
/// cluster k (1-based). Randomized policies report their most likely action.
inline void write_policy_csv(std::ostream& out, const StateLattice& lattice, const Policy& policy, bool header = true) {
  const std::size_t n = lattice.dimensions();
  if (header) {
    for (std::size_t k = 0; k < n; ++k) out << 'x' << k + 1 << ',';
    out << "action\n";
  }
  std::vector<int> x(n);
  std::vector<double> probs(n + 1);
  for (std::size_t s = 0; s < lattice.size(); ++s) {
    lattice.decode(s, x);
    policy.distribution(x, probs);
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    for (std::size_t k = 0; k < n; ++k) out << x[k] << ',';
    out << best << '\n';
  }
}

/// Number of lattice states at which the policy rejects.
inline std::size_t rejection_cells(const StateLattice& lattice, const Policy& policy) {
  std::vector<int> x(lattice.dimensions());
  std::vector<double> probs(lattice.dimensions() + 1);
  std::size_t count = 0;
  for (std::size_t s = 0; s < lattice.size(); ++s) {
    lattice.decode(s, x);
    policy.distribution(x, probs);
    if (probs[0] > 0.5) ++count;
  }
  return count;
}

}  // namespace softroute
