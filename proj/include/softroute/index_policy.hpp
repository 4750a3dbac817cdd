#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "softroute/bernoulli_split.hpp"
#include "softroute/miss_probability.hpp"
#include "softroute/model.hpp"
#include "softroute/policy.hpp"

namespace softroute {

enum class IndexKind { IO, PI, RB };

inline const char* to_string(IndexKind k) {
  switch (k) {
    case IndexKind::IO: return "IO";
    case IndexKind::PI: return "PI";
    case IndexKind::RB: return "RB";
  }
  return "?";
}

/// Index values of one cluster on 0..X_max, the limit as x grows, and the
/// value used for states past X_max.
struct IndexColumn {
  std::vector<double> values;
  double limit = 1.0;
  double beyond = 1.0;
  bool frozen = false;  // recursion stopped early; remaining entries repeat the last value

  long max_state() const { return static_cast<long>(values.size()) - 1; }
  double operator()(long x) const {
    return x <= max_state() ? values[static_cast<std::size_t>(x)] : beyond;
  }
};

// ---------------------------------------------------------------- IO

/// The individually optimal index is the miss probability itself. Past the
/// table it is reported as the largest double below one, so that an IO policy
/// never rejects when R >= 1.
inline IndexColumn io_index(const MissProbTable& table) {
  IndexColumn col;
  col.values = table.values();
  col.limit = 1.0;
  col.beyond = std::nextafter(1.0, 0.0);
  return col;
}

inline IndexColumn io_index(const ClusterConfig& c, const DeadlineDistribution& d, long max_state = kDefaultMaxState) {
  return io_index(MissProbTable(c, d, max_state));
}

// ---------------------------------------------------------------- PI

namespace detail {

inline bool saturated_rate(const ClusterConfig& c, double lambda_star) {
  return lambda_star >= (1.0 - 1e-12) * c.capacity();
}

inline bool unused_rate(const ClusterConfig& c, double lambda_star) {
  return lambda_star <= 1e-12 * c.capacity();
}

struct PiInputs {
  double lambda;    // lambda*
  double mean_miss; // stationary miss probability at lambda*
  double rate;      // f* = lambda* times mean_miss
  double limit;
  bool saturated;
};

inline PiInputs pi_inputs(const ClusterConfig& c, double lambda_star, const DeadlineDistribution& d) {
  PiInputs in{};
  in.saturated = saturated_rate(c, lambda_star);
  in.lambda = in.saturated ? c.capacity() : lambda_star;
  in.mean_miss = in.saturated ? 1.0 : stationary_miss_prob(c, in.lambda, d);
  in.rate = in.lambda * in.mean_miss;
  if (in.saturated) {
    in.limit = marginal_ceiling(c, d);
  } else {
    const double rho = in.lambda / c.capacity();
    in.limit = (1.0 - rho * in.mean_miss) / (1.0 - rho);
  }
  return in;
}

}  // namespace detail

/// Unguarded forward recursion from the per-queue Poisson equations,
/// nu(0) = f*/lambda*, nu(x) = (f* + mubar(x)(nu(x-1) - P(x-1))) / lambda*.
inline std::vector<double> pi_index_forward(const ClusterConfig& c, double lambda_star, const DeadlineDistribution& d,
                                            long max_state) {
  detail::check_rate(c, lambda_star);
  if (detail::unused_rate(c, lambda_star)) throw std::domain_error("forward PI recursion needs lambda* > 0");
  const auto in = detail::pi_inputs(c, lambda_star, d);
  const MissProbTable p(c, d, max_state);
  std::vector<double> out(static_cast<std::size_t>(max_state) + 1);
  long double nu = static_cast<long double>(in.rate) / in.lambda;
  out[0] = static_cast<double>(nu);
  for (long x = 1; x <= max_state; ++x) {
    nu = (in.rate + static_cast<long double>(c.service_rate(x)) * (nu - p[x - 1])) / in.lambda;
    out[static_cast<std::size_t>(x)] = static_cast<double>(nu);
  }
  return out;
}

/// Closed forms of the PI index: for 0 < lambda* < m mu,
///   nu(x) = rho^{-x} [rho^{m-1} nu(m-1) + sum_{j=m-1}^{x-1} rho^j (rho Pbar* - P(j))],
/// and for a saturated queue the partial sums
///   nu(x) = nu(m-1) + sum_{j=m-1}^{x-1} (1 - P(j)),
/// both for x >= m.
inline std::vector<double> pi_index_closed_form(const ClusterConfig& c, double lambda_star,
                                                const DeadlineDistribution& d, long max_state) {
  detail::check_rate(c, lambda_star);
  if (detail::unused_rate(c, lambda_star)) throw std::domain_error("PI closed form needs lambda* > 0");
  const auto in = detail::pi_inputs(c, lambda_star, d);
  const MissProbTable p(c, d, max_state);
  const int m = c.servers;
  std::vector<double> out(static_cast<std::size_t>(max_state) + 1);
  // nu(0..m-1) from the recursion itself; the closed form takes over at m.
  std::vector<long double> head(static_cast<std::size_t>(std::min<long>(max_state, m - 1)) + 1);
  head[0] = in.mean_miss;
  for (std::size_t x = 1; x < head.size(); ++x) {
    head[x] = (in.rate + static_cast<long double>(c.service_rate(static_cast<long>(x))) * (head[x - 1] - p[x - 1])) /
              in.lambda;
  }
  for (std::size_t x = 0; x < head.size(); ++x) out[x] = static_cast<double>(head[x]);
  if (max_state < m) return out;
  const long double base = head.back();
  if (in.saturated) {
    long double sum = 0.0L;
    for (long x = m; x <= max_state; ++x) {
      sum += 1.0L - p[x - 1];
      out[static_cast<std::size_t>(x)] = static_cast<double>(base + sum);
    }
    return out;
  }
  const long double rho = static_cast<long double>(in.lambda) / c.capacity();
  long double sum = 0.0L;
  const long double lead = std::pow(rho, static_cast<long double>(m - 1));
  long double rho_j = lead;
  for (long x = m; x <= max_state; ++x) {
    sum += rho_j * (rho * in.mean_miss - p[x - 1]);
    rho_j *= rho;
    out[static_cast<std::size_t>(x)] =
        static_cast<double>((lead * base + sum) / std::pow(rho, static_cast<long double>(x)));
  }
  return out;
}

/// PI index with the divergence guard. The forward recursion amplifies
/// rounding by prod mubar(i)/lambda*; where that product makes the forward
/// value unreliable the values come from the backward recursion
/// nu(y-1) = P(y-1) + (lambda* nu(y) - f*) / mubar(y), started from the limit
/// far beyond the table, which contracts by the same factor.
inline IndexColumn pi_index(const ClusterConfig& c, double lambda_star, const DeadlineDistribution& d,
                            long max_state = kDefaultMaxState) {
  detail::check_rate(c, lambda_star);
  if (detail::unused_rate(c, lambda_star)) return io_index(c, d, max_state);
  const auto in = detail::pi_inputs(c, lambda_star, d);

  long pad = 0;
  if (!in.saturated) {
    const double rho = in.lambda / c.capacity();
    pad = static_cast<long>(std::ceil(40.0 / -std::log(rho))) + c.servers;
    pad = std::min<long>(pad, 200000);
  }
  const long end = max_state + pad;
  const MissProbTable p(c, d, end);

  IndexColumn col;
  col.limit = in.limit;
  col.beyond = in.limit;
  col.values.resize(static_cast<std::size_t>(max_state) + 1);

  // backward sweep (unused for saturated queues, where nothing amplifies)
  std::vector<long double> back;
  if (!in.saturated) {
    back.resize(static_cast<std::size_t>(max_state) + 1);
    long double nu = in.limit;
    for (long y = end; y >= 1; --y) {
      nu = p[y - 1] + (static_cast<long double>(in.lambda) * nu - in.rate) / c.service_rate(y);
      if (y - 1 <= max_state) back[static_cast<std::size_t>(y - 1)] = nu;
    }
  }

  constexpr long double kTrust = 1e-13L / LDBL_EPSILON;
  long double nu = static_cast<long double>(in.rate) / in.lambda;
  long double gain = 1.0L;
  bool clamped = false;
  for (long x = 0; x <= max_state; ++x) {
    if (x > 0) {
      nu = (in.rate + static_cast<long double>(c.service_rate(x)) * (nu - p[x - 1])) / in.lambda;
      gain *= c.service_rate(x) / in.lambda;
    }
    long double v = (in.saturated || gain <= kTrust) ? nu : back[static_cast<std::size_t>(x)];
    if (clamped || v > in.limit) {
      clamped = true;
      v = in.limit;
    }
    col.values[static_cast<std::size_t>(x)] = static_cast<double>(v);
  }
  col.frozen = clamped;
  return col;
}

// ---------------------------------------------------------------- RB

/// Single-server RB index under a constant deadline, in closed form.
inline double rb_index_closed_form_m1(double mu, double lambda, double t, long x) {
  if (!(mu > 0.0) || !(lambda > 0.0) || !(t > 0.0) || x < 0) {
    throw std::domain_error("rb_index_closed_form_m1 needs mu, lambda, t > 0 and x >= 0");
  }
  const double rho = lambda / mu;
  long double arrive = 1.0L;   // (lambda t)^j / j!
  long double serve = 1.0L;    // (mu t)^j / j!
  long double sum = 0.0L;
  const bool balanced = std::abs(rho - 1.0) < 1e-14;
  for (long j = 0; j <= x; ++j) {
    if (j > 0) {
      arrive *= static_cast<long double>(lambda) * t / j;
      serve *= static_cast<long double>(mu) * t / j;
    }
    sum += balanced ? (j + 1) * serve : rho * arrive - serve;
  }
  const long double scale = std::exp(-static_cast<long double>(mu) * t);
  return static_cast<double>(balanced ? scale * sum : scale * sum / (rho - 1.0));
}

inline double rb_index_closed_form_m1(const ClusterConfig& c, double lambda, double t, long x) {
  if (c.servers != 1) throw std::domain_error("closed-form RB index requires a single server");
  return rb_index_closed_form_m1(c.rate, lambda, t, x);
}

/// Limit of the single-server constant-deadline RB index.
inline double rb_limit_m1(double mu, double lambda, double t) {
  const double rho = lambda / mu;
  if (std::abs(rho - 1.0) < 1e-14) return 1.0 + mu * t;
  return (rho * std::exp((lambda - mu) * t) - 1.0) / (rho - 1.0);
}

/// Marginal rejection measures w(0..X-1) from the z/w recursions, in
/// extended precision.
inline std::vector<long double> rb_marginal_measures(const ClusterConfig& c, double lambda, long count) {
  const long double lam = lambda;
  auto mubar = [&](long x) -> long double { return c.service_rate(x); };
  auto dmubar = [&](long x) -> long double { return (x >= 1 && x <= c.servers) ? c.rate : 0.0; };
  std::vector<long double> w(static_cast<std::size_t>(std::max<long>(count, 1)));
  w[0] = lam * c.rate / (lam + c.rate);
  long double z = 1.0L;  // z(1)
  for (long x = 2; x <= count; ++x) {
    z = 1.0L - lam * mubar(x - 1) / ((lam + mubar(x - 1)) * (lam + mubar(x)) * z);
    w[static_cast<std::size_t>(x - 1)] =
        (lam * dmubar(x) + w[static_cast<std::size_t>(x - 2)] * mubar(x - 1)) / ((lam + mubar(x)) * z);
  }
  return w;
}

/// Restless-bandit index of one cluster fed with the full arrival rate.
inline IndexColumn rb_index(const MissProbTable& table, double lambda) {
  if (!(lambda > 0.0)) throw std::domain_error("rb_index requires lambda > 0");
  const auto& c = table.cluster();
  const long max_state = table.max_state();
  const auto w = rb_marginal_measures(c, lambda, max_state);
  IndexColumn col;
  col.values.assign(static_cast<std::size_t>(max_state) + 1, table[0]);
  long double nu = table[0];
  for (long x = c.servers; x <= max_state; ++x) {
    if (!col.frozen) {
      const long double wx = w[static_cast<std::size_t>(x - 1)];
      const long double step = lambda * static_cast<long double>(table.increment(x)) / wx;
      if (wx < 1e-300L || !std::isfinite(static_cast<double>(step)) ||
          !std::isfinite(static_cast<double>(nu + step))) {
        col.frozen = true;
      } else {
        nu += step;
      }
    }
    col.values[static_cast<std::size_t>(x)] = static_cast<double>(nu);
  }
  col.limit = col.values.back();
  if (const auto* k = std::get_if<ConstantDeadline>(&table.deadline().variant()); k && c.servers == 1) {
    const double closed = rb_limit_m1(c.rate, lambda, k->t);
    if (std::isfinite(closed)) col.limit = closed;
  }
  col.beyond = col.limit;
  return col;
}

inline IndexColumn rb_index(const ClusterConfig& c, double lambda, const DeadlineDistribution& d,
                            long max_state = kDefaultMaxState) {
  return rb_index(MissProbTable(c, d, max_state), lambda);
}

// ---------------------------------------------------------------- tables and policy

class IndexTable {
 public:
  IndexTable(IndexKind kind, std::vector<IndexColumn> columns) : kind_(kind), columns_(std::move(columns)) {}

  IndexKind kind() const { return kind_; }
  std::size_t size() const { return columns_.size(); }
  const IndexColumn& column(std::size_t k) const { return columns_.at(k); }
  double value(std::size_t k, long x) const { return columns_[k](x); }
  double limit(std::size_t k) const { return columns_[k].limit; }

  /// CSV with columns cluster,x,value (cluster 1-based); the limit is written
  /// as x = inf.
  void write_csv(std::ostream& out, bool header = true) const {
    if (header) out << "cluster,x,value\n";
    for (std::size_t k = 0; k < columns_.size(); ++k) {
      const auto& col = columns_[k];
      for (std::size_t x = 0; x < col.values.size(); ++x) {
        out << k + 1 << ',' << x << ',' << numeric::format(col.values[x], 17) << '\n';
      }
      out << k + 1 << ",inf," << numeric::format(col.limit, 17) << '\n';
    }
  }

 private:
  IndexKind kind_;
  std::vector<IndexColumn> columns_;
};

/// Builds the IO, PI or RB table of every cluster. PI uses the optimal
/// Bernoulli split, computed here unless supplied.
inline IndexTable build_index_table(const SystemConfig& config, IndexKind kind, long max_state = kDefaultMaxState,
                                    const std::optional<BernoulliSplit>& split = std::nullopt) {
  std::vector<IndexColumn> cols;
  std::optional<BernoulliSplit> bs = split;
  if (kind == IndexKind::PI && !bs) bs = solve_optimal_bs(config).split;
  for (std::size_t k = 0; k < config.size(); ++k) {
    const auto& c = config.cluster(k);
    switch (kind) {
      case IndexKind::IO: cols.push_back(io_index(c, config.deadline(), max_state)); break;
      case IndexKind::PI: cols.push_back(pi_index(c, bs->routed.at(k), config.deadline(), max_state)); break;
      case IndexKind::RB: cols.push_back(rb_index(c, config.arrival_rate(), config.deadline(), max_state)); break;
    }
  }
  return IndexTable(kind, std::move(cols));
}

/// Admit iff gamma(x) = min_k nu_k(x_k) < R and route to the minimizing
/// cluster, lowest id on ties.
class IndexPolicy final : public Policy {
 public:
  IndexPolicy(IndexTable table, double rejection_cost, std::string name = {})
      : table_(std::move(table)), rejection_cost_(rejection_cost),
        name_(name.empty() ? to_string(table_.kind()) : std::move(name)) {}

  Action decide(std::span<const int> x) const {
    std::size_t best = 0;
    double gamma = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < table_.size(); ++k) {
      const double v = table_.value(k, x[k]);
      if (v < gamma) {
        gamma = v;
        best = k;
      }
    }
    if (!std::isinf(rejection_cost_) && gamma >= rejection_cost_) return Action::reject();
    return Action::route_to(static_cast<int>(best));
  }

  std::string name() const override { return name_; }
  std::size_t clusters() const override { return table_.size(); }
  void distribution(std::span<const int> x, std::span<double> probs) const override {
    std::fill(probs.begin(), probs.end(), 0.0);
    probs[static_cast<std::size_t>(decide(x).target + 1)] = 1.0;
  }
  Action sample(std::span<const int> x, double) const override { return decide(x); }

  const IndexTable& table() const { return table_; }
  double rejection_cost() const { return rejection_cost_; }

 private:
  IndexTable table_;
  double rejection_cost_;
  std::string name_;
};

inline Action decide(const IndexPolicy& policy, std::span<const int> x) { return policy.decide(x); }

inline IndexPolicy make_index_policy(const SystemConfig& config, IndexKind kind, long max_state = kDefaultMaxState,
                                     const std::optional<BernoulliSplit>& split = std::nullopt) {
  return IndexPolicy(build_index_table(config, kind, max_state, split), config.rejection_cost());
}

}  // namespace softroute
