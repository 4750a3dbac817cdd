#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <type_traits>
#include <variant>
#include <vector>

#include "softroute/deadline.hpp"
#include "softroute/erlang.hpp"
#include "softroute/model.hpp"

namespace softroute {

inline constexpr long kDefaultMaxState = 500;

namespace detail {

/// Clamps a computed probability into [0, 1]; anything further out than
/// roundoff is reported instead of hidden.
inline double checked_probability(double p, const char* what) {
  constexpr double slack = 1e-9;
  if (!(p >= -slack && p <= 1.0 + slack)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << " produced " << p << ", outside [0, 1]";
    throw std::logic_error(msg.str());
  }
  return std::clamp(p, 0.0, 1.0);
}

/// U(j) = P{A <= t < A + xi} for A ~ Erlang(j, m mu), xi ~ Exp(mu), written as
/// sum_{l >= j} e^{-r} r^j a^{l-j} / l! with r = m mu t and a = (m-1) mu t.
/// Each term is formed in log space.
inline double straddle_probability_direct(int m, double mu, long j, double t) {
  const double r = m * mu * t;
  const double a = (m - 1) * mu * t;
  if (r == 0.0) return j == 0 ? 1.0 : 0.0;
  const double log_r = std::log(r);
  if (a == 0.0) return std::exp(-r + j * log_r - std::lgamma(j + 1.0));
  const double log_a = std::log(a);
  double sum = 0.0;
  for (long l = j;; ++l) {
    const double term =
        std::exp(-r + j * log_r + (l - j) * log_a - std::lgamma(static_cast<double>(l) + 1.0));
    sum += term;
    if (l > j + 10 && static_cast<double>(l) > a && term <= 1e-18 * sum) break;
    if (l > j + 100000) break;
  }
  return sum;
}

/// Batch U(0..J): U(j) = pmf_r(j) T(j) with T(j) = sum_{l >= j} a^{l-j} j!/l!
/// obtained from the contracting backward recursion T(j) = 1 + a T(j+1)/(j+1).
inline std::vector<double> straddle_probability_table(int m, double mu, std::size_t max_stage, double t) {
  const double r = m * mu * t;
  const double a = (m - 1) * mu * t;
  const auto pmf = poisson_pmf_table(r, max_stage + 1);
  const std::size_t start = max_stage + 2 * static_cast<std::size_t>(std::ceil(a)) + 64;
  double tail = 1.0 / (1.0 - a / static_cast<double>(start + 1));
  std::vector<double> u(max_stage + 1, 0.0);
  for (std::size_t j = start; j-- > 0;) {
    tail = 1.0 + a * tail / static_cast<double>(j + 1);
    if (j <= max_stage) u[j] = pmf[j] * tail;
  }
  return u;
}

struct MissCurve {
  std::vector<double> value;      // P(0..X)
  std::vector<double> increment;  // P(x) - P(x-1), zero for x < m
};

inline MissCurve constant_curve(const ClusterConfig& c, long max_state, double t) {
  const int m = c.servers;
  const double mu = c.rate;
  MissCurve out{std::vector<double>(max_state + 1), std::vector<double>(max_state + 1, 0.0)};
  const double idle = std::exp(-mu * t);
  const long stages = std::max<long>(max_state - m + 1, 0);
  const auto q = erlang_survival_table(m, mu, stages, t);
  const auto u = straddle_probability_table(m, mu, stages, t);
  for (long x = 0; x <= max_state; ++x) {
    const long j = x - m + 1;
    if (j <= 0) {
      out.value[x] = idle;
    } else {
      out.value[x] = checked_probability(q[j] + u[j], "constant-deadline miss probability");
      out.increment[x] = u[j] / m;
    }
  }
  return out;
}

inline MissCurve uniform_curve(const ClusterConfig& c, long max_state, double t1, double t2) {
  const int m = c.servers;
  const double mu = c.rate;
  const double w = t2 - t1;
  MissCurve out{std::vector<double>(max_state + 1), std::vector<double>(max_state + 1, 0.0)};
  const double idle = std::exp(-mu * t1) * -std::expm1(-mu * w) / (mu * w);
  const long stages = std::max<long>(max_state - m + 1, 0);

  const auto lo = constant_curve(c, max_state, t1);
  const auto hi = constant_curve(c, max_state, t2);
  const auto q1 = erlang_survival_table(m, mu, stages + 1, t1);
  const auto q2 = erlang_survival_table(m, mu, stages + 1, t2);

  // S(j) = D(j+1) + (m-1)/m S(j+1), D(k) = L(k; t2) - L(k; t1) with L the
  // Poisson(m mu t) upper tail; summed backwards from where D is negligible.
  const double cm = (m - 1.0) / m;
  const std::size_t horizon =
      poisson_tail_horizon(m * mu * t2, static_cast<std::size_t>(stages) + 2) + 40 * static_cast<std::size_t>(m);
  const auto l1 = poisson_upper_tail_table(m * mu * t1, horizon + 2);
  const auto l2 = poisson_upper_tail_table(m * mu * t2, horizon + 2);
  std::vector<double> s(static_cast<std::size_t>(stages) + 1, 0.0);
  double acc = 0.0;
  for (std::size_t j = horizon; j-- > 0;) {
    acc = (l2[j + 1] - l1[j + 1]) + cm * acc;
    if (j <= static_cast<std::size_t>(stages)) s[j] = acc;
  }

  for (long x = 0; x <= max_state; ++x) {
    const long j = x - m + 1;
    if (j <= 0) {
      out.value[x] = idle;
      continue;
    }
    const double qstar = t2 * q2[j] - t1 * q1[j] + (j / (m * mu)) * (q1[j + 1] - q2[j + 1]);
    const double pstar = qstar + (lo.value[x] - hi.value[x]) / mu;
    out.value[x] = checked_probability(pstar / w, "uniform-deadline miss probability");
    out.increment[x] = s[j] / (static_cast<double>(m) * m * mu * w);
  }
  return out;
}

inline MissCurve exponential_curve(const ClusterConfig& c, long max_state, double theta) {
  const int m = c.servers;
  const double mu = c.rate;
  MissCurve out{std::vector<double>(max_state + 1), std::vector<double>(max_state + 1, 0.0)};
  const double head = mu / (mu + theta);
  const double q = m * mu / (m * mu + theta);
  const double step = theta / (m * mu + theta);  // 1 - q
  double survive = head;                         // 1 - P at j = 0
  for (long x = 0; x <= max_state; ++x) {
    const long j = x - m + 1;
    if (j > 0) {
      out.increment[x] = survive * step;
      survive *= q;
    }
    out.value[x] = 1.0 - survive;
  }
  return out;
}

}  // namespace detail

/// P^miss for a constant deadline t at an arrival that finds x jobs.
/// Evaluated pointwise from the finite Erlang sums, independently of the
/// batch table.
inline double miss_prob_constant(const ClusterConfig& c, long x, double t) {
  if (x < 0) throw std::domain_error("queue state must be nonnegative");
  if (!(t > 0.0)) throw std::domain_error("constant deadline requires t > 0");
  const long j = x - c.servers + 1;
  if (j <= 0) return std::exp(-c.rate * t);
  const double p = erlang_survival(c.servers, c.rate, j, t) +
                   detail::straddle_probability_direct(c.servers, c.rate, j, t);
  return detail::checked_probability(p, "miss_prob_constant");
}

inline double miss_prob_uniform(const ClusterConfig& c, long x, double t1, double t2) {
  if (x < 0) throw std::domain_error("queue state must be nonnegative");
  if (!(t1 >= 0.0) || !(t2 > t1)) throw std::domain_error("uniform deadline requires 0 <= t1 < t2");
  const int m = c.servers;
  const double mu = c.rate;
  const double w = t2 - t1;
  const long j = x - m + 1;
  if (j <= 0) return std::exp(-mu * t1) * -std::expm1(-mu * w) / (mu * w);
  auto q = [&](long stage, double t) { return t == 0.0 ? 1.0 : erlang_survival(m, mu, stage, t); };
  auto p = [&](double t) { return t == 0.0 ? 1.0 : miss_prob_constant(c, x, t); };
  const double qstar = t2 * q(j, t2) - t1 * q(j, t1) + (j / (m * mu)) * (q(j + 1, t1) - q(j + 1, t2));
  const double pstar = qstar + (p(t1) - p(t2)) / mu;
  return detail::checked_probability(pstar / w, "miss_prob_uniform");
}

inline double miss_prob_exponential(const ClusterConfig& c, long x, double theta) {
  if (x < 0) throw std::domain_error("queue state must be nonnegative");
  if (!(theta > 0.0)) throw std::domain_error("exponential deadline requires theta > 0");
  const int m = c.servers;
  const double mu = c.rate;
  const long j = std::max<long>(x - m + 1, 0);
  const double q = m * mu / (m * mu + theta);
  return detail::checked_probability(1.0 - mu / (mu + theta) * std::pow(q, static_cast<double>(j)),
                                     "miss_prob_exponential");
}

inline double miss_prob(const ClusterConfig& c, long x, const DeadlineDistribution& d) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConstantDeadline>) {
          return miss_prob_constant(c, x, v.t);
        } else if constexpr (std::is_same_v<T, UniformDeadline>) {
          return miss_prob_uniform(c, x, v.t1, v.t2);
        } else {
          return miss_prob_exponential(c, x, v.theta);
        }
      },
      d.variant());
}

/// P^miss(0..X_max) for one cluster, built in O(X_max) by recursion, together
/// with the increments P(x) - P(x-1) carried to full relative precision.
class MissProbTable {
 public:
  MissProbTable(const ClusterConfig& cluster, const DeadlineDistribution& deadline,
                long max_state = kDefaultMaxState)
      : cluster_(cluster), deadline_(deadline) {
    if (max_state < 0) throw std::domain_error("max_state must be nonnegative");
    auto curve = std::visit(
        [&](const auto& v) -> detail::MissCurve {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, ConstantDeadline>) {
            return detail::constant_curve(cluster, max_state, v.t);
          } else if constexpr (std::is_same_v<T, UniformDeadline>) {
            return detail::uniform_curve(cluster, max_state, v.t1, v.t2);
          } else {
            return detail::exponential_curve(cluster, max_state, v.theta);
          }
        },
        deadline.variant());
    values_ = std::move(curve.value);
    increments_ = std::move(curve.increment);
  }

  const ClusterConfig& cluster() const { return cluster_; }
  const DeadlineDistribution& deadline() const { return deadline_; }
  long max_state() const { return static_cast<long>(values_.size()) - 1; }

  double operator[](long x) const { return values_[static_cast<std::size_t>(x)]; }
  double at(long x) const {
    if (x < 0 || x > max_state()) throw std::out_of_range("state outside miss-probability table");
    return values_[static_cast<std::size_t>(x)];
  }
  double increment(long x) const { return increments_.at(static_cast<std::size_t>(x)); }

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& increments() const { return increments_; }

  /// Same table out to a larger state bound.
  MissProbTable extended(long max_state) const { return MissProbTable(cluster_, deadline_, max_state); }

 private:
  ClusterConfig cluster_;
  DeadlineDistribution deadline_;
  std::vector<double> values_;
  std::vector<double> increments_;
};

/// h(x) = min(x, m) mu P^miss(x-1), h(0) = 0.
inline double holding_cost(const ClusterConfig& c, long x, const DeadlineDistribution& d) {
  if (x < 0) throw std::domain_error("queue state must be nonnegative");
  if (x == 0) return 0.0;
  return c.service_rate(x) * miss_prob(c, x - 1, d);
}

inline double holding_cost(const MissProbTable& table, long x) {
  if (x == 0) return 0.0;
  return table.cluster().service_rate(x) * table.at(x - 1);
}

}  // namespace softroute
