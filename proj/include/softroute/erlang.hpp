#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace softroute {

namespace detail {

// exp(-a) underflows to a subnormal/zero past this point.
inline constexpr double kExpUnderflow = 700.0;

inline double log_poisson_pmf(double mean, std::size_t k) {
  if (mean == 0.0) return k == 0 ? 0.0 : -INFINITY;
  const double kk = static_cast<double>(k);
  return -mean + kk * std::log(mean) - std::lgamma(kk + 1.0);
}

/// Poisson(mean) probabilities for k = 0 .. count-1 by the first-order
/// recursion pmf(k) = pmf(k-1) mean / k, switching to log space when
/// exp(-mean) would underflow.
inline std::vector<double> poisson_pmf_table(double mean, std::size_t count) {
  std::vector<double> pmf(count, 0.0);
  if (count == 0) return pmf;
  if (mean < kExpUnderflow) {
    pmf[0] = std::exp(-mean);
    for (std::size_t k = 1; k < count; ++k) {
      pmf[k] = pmf[k - 1] * mean / static_cast<double>(k);
    }
  } else {
    for (std::size_t k = 0; k < count; ++k) pmf[k] = std::exp(log_poisson_pmf(mean, k));
  }
  return pmf;
}

/// Index past which the Poisson(mean) upper tail is negligible relative to
/// every tail value we are asked for below `count`.
inline std::size_t poisson_tail_horizon(double mean, std::size_t count) {
  const double spread = mean + 12.0 * std::sqrt(mean + 1.0) + 60.0;
  return std::max(count, static_cast<std::size_t>(spread)) + 64;
}

/// Upper tails P(N >= k) for k = 0 .. count-1, summed backwards so that each
/// entry carries full relative precision even when it is tiny.
inline std::vector<double> poisson_upper_tail_table(double mean, std::size_t count) {
  const std::size_t horizon = poisson_tail_horizon(mean, count);
  const auto pmf = poisson_pmf_table(mean, horizon);
  std::vector<double> tail(count, 0.0);
  double acc = 0.0;
  for (std::size_t k = horizon; k-- > 0;) {
    acc += pmf[k];
    if (k < count) tail[k] = acc;
  }
  return tail;
}

}  // namespace detail

/// Q_m(j; t) = P{Erlang(j, m mu) > t}, evaluated directly from the finite
/// Poisson sum with each term formed in log space.
inline double erlang_survival(int m, double mu, long j, double t) {
  if (j < 1) throw std::domain_error("erlang_survival requires j >= 1");
  if (!(t >= 0.0)) throw std::domain_error("erlang_survival requires t >= 0");
  if (m < 1 || !(mu > 0.0)) throw std::domain_error("erlang_survival requires m >= 1, mu > 0");
  const double mean = m * mu * t;
  if (mean == 0.0) return 1.0;
  double sum = 0.0;
  for (long l = 0; l < j; ++l) {
    sum += std::exp(detail::log_poisson_pmf(mean, static_cast<std::size_t>(l)));
  }
  return std::min(sum, 1.0);
}

/// Q_m(0..J; t) (entry 0 is Q_m(0; t) = 0) by the second-order recursion
/// Q(1) = e^{-m mu t}, dQ(2) = m mu t Q(1), dQ(j+1) = (m mu t / j) dQ(j).
inline std::vector<double> erlang_survival_table(int m, double mu, std::size_t max_stage, double t) {
  if (!(t >= 0.0)) throw std::domain_error("erlang_survival_table requires t >= 0");
  if (m < 1 || !(mu > 0.0)) throw std::domain_error("erlang_survival_table requires m >= 1, mu > 0");
  const double rate_t = m * mu * t;
  std::vector<double> q(max_stage + 1, 0.0);
  if (max_stage == 0) return q;
  if (rate_t < detail::kExpUnderflow) {
    double increment = std::exp(-rate_t);  // dQ(1) = Q(1)
    q[1] = increment;
    for (std::size_t j = 1; j < max_stage; ++j) {
      increment *= rate_t / static_cast<double>(j);
      q[j + 1] = q[j] + increment;
    }
  } else {
    for (std::size_t j = 1; j <= max_stage; ++j) {
      q[j] = q[j - 1] + std::exp(detail::log_poisson_pmf(rate_t, j - 1));
    }
  }
  for (auto& v : q) v = std::min(v, 1.0);
  return q;
}

namespace detail {

/// Erlang-B blocking probability by the standard stable recurrence over servers.
inline double erlang_b(int m, double r) {
  double b = 1.0;
  for (int k = 1; k <= m; ++k) b = r * b / (k + r * b);
  return b;
}

/// Erlang-C for 0 <= r <= m (equals 1 at r = m).
inline double erlang_c_unchecked(int m, double r) {
  if (r <= 0.0) return 0.0;
  const double b = erlang_b(m, r);
  return m * b / (m - r * (1.0 - b));
}

/// d/dr of the Erlang-C probability, valid on [0, m].
inline double erlang_c_derivative(int m, double r) {
  if (r <= 0.0) return m == 1 ? 1.0 : 0.0;
  const double b = erlang_b(m, r);
  const double db = b * (m / r - 1.0 + b);
  const double denom = m - r + r * b;
  return (m * db * denom - m * b * (-1.0 + b + r * db)) / (denom * denom);
}

}  // namespace detail

/// Probability that an arrival waits in an M/M/m queue with offered load r.
inline double erlang_c(int m, double r) {
  if (m < 1) throw std::domain_error("erlang_c requires m >= 1");
  if (!(r >= 0.0) || !(r < m)) throw std::domain_error("erlang_c requires 0 <= r < m");
  return detail::erlang_c_unchecked(m, r);
}

}  // namespace softroute
