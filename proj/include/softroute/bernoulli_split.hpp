#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "softroute/deadline.hpp"
#include "softroute/erlang.hpp"
#include "softroute/miss_probability.hpp"
#include "softroute/model.hpp"
#include "softroute/numeric.hpp"

namespace softroute {

namespace detail {

/// First and confluent second divided differences of the deadline transform,
/// phi[a, b] and phi[a, a, b], continuous across a = b.
struct DividedDifferences {
  double first;
  double second;
};

inline DividedDifferences constant_divided_differences(double t, double a, double b) {
  const double z = (b - a) * t;
  if (std::abs(z) < 0.5) {
    const double scale = std::exp(-b * t);
    return {-t * scale * numeric::relative_expm1(z), t * t * scale * numeric::second_expm1(z)};
  }
  const double first = (std::exp(-a * t) - std::exp(-b * t)) / (a - b);
  const double slope = -t * std::exp(-a * t);
  return {first, (slope - first) / (a - b)};
}

inline DividedDifferences divided_differences(const DeadlineDistribution& d, double a, double b) {
  return std::visit(
      [&](const auto& v) -> DividedDifferences {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConstantDeadline>) {
          return constant_divided_differences(v.t, a, b);
        } else if constexpr (std::is_same_v<T, ExponentialDeadline>) {
          const double ea = a + v.theta;
          const double eb = b + v.theta;
          return {-v.theta / (ea * eb), v.theta / (ea * ea * eb)};
        } else {
          // Average the constant-deadline differences over [t1, t2].
          const double w = v.t2 - v.t1;
          const double rate = std::max({a, b, 1e-300});
          const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(w * rate / 4.0)));
          const auto& rule = numeric::GaussLegendre16::instance();
          const double width = w / static_cast<double>(panels);
          DividedDifferences sum{0.0, 0.0};
          for (std::size_t p = 0; p < panels; ++p) {
            const double mid = v.t1 + width * (static_cast<double>(p) + 0.5);
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
              const auto dd = constant_divided_differences(mid + 0.5 * width * rule.nodes[i], a, b);
              sum.first += rule.weights[i] * dd.first;
              sum.second += rule.weights[i] * dd.second;
            }
          }
          const double scale = 0.5 * width / w;
          return {sum.first * scale, sum.second * scale};
        }
      },
      d.variant());
}

struct StationaryMiss {
  double value;       // stationary miss probability
  double derivative;  // d/d lambda of it
};

/// Stationary M/M/m sojourn-time miss probability written as
/// phi(mu) - mu C(r) phi[m mu - lambda, mu], which covers the repeated-rate
/// point lambda = (m-1) mu without a separate branch.
inline StationaryMiss stationary_miss(const ClusterConfig& c, double lambda, const DeadlineDistribution& d) {
  const int m = c.servers;
  const double mu = c.rate;
  const double r = lambda / mu;
  const double a = std::max(m * mu - lambda, 0.0);
  const double wait = erlang_c_unchecked(m, r);
  const double wait_slope = erlang_c_derivative(m, r);
  const auto dd = divided_differences(d, a, mu);
  const double value = d.laplace(mu) - mu * wait * dd.first;
  const double derivative = -wait_slope * dd.first + mu * wait * dd.second;
  return {value, derivative};
}

inline void check_rate(const ClusterConfig& c, double lambda) {
  if (!(lambda >= 0.0) || !(lambda <= c.capacity())) {
    std::ostringstream msg;
    msg << "arrival rate " << lambda << " outside [0, " << c.capacity() << "]";
    throw std::domain_error(msg.str());
  }
}

}  // namespace detail

/// Long-run fraction of jobs that miss their deadline in an M/M/m queue fed
/// at rate lambda. Equals one at lambda = m mu.
inline double stationary_miss_prob(const ClusterConfig& c, double lambda, const DeadlineDistribution& d) {
  detail::check_rate(c, lambda);
  if (lambda == c.capacity()) return 1.0;
  return detail::checked_probability(detail::stationary_miss(c, lambda, d).value, "stationary_miss_prob");
}

/// f'(lambda) for the miss rate f(lambda) = lambda * stationary_miss_prob.
/// One-sided at the endpoints.
inline double miss_rate_derivative(const ClusterConfig& c, double lambda, const DeadlineDistribution& d) {
  detail::check_rate(c, lambda);
  const auto s = detail::stationary_miss(c, lambda, d);
  const double value = lambda == c.capacity() ? 1.0 : s.value;
  return value + lambda * s.derivative;
}

/// Miss rate f(lambda), with f(m mu) = m mu.
inline double miss_rate(const ClusterConfig& c, double lambda, const DeadlineDistribution& d) {
  if (lambda == 0.0) return 0.0;
  return lambda * stationary_miss_prob(c, lambda, d);
}

inline double marginal_floor(const ClusterConfig& c, const DeadlineDistribution& d) {
  return d.laplace(c.rate);
}

inline double marginal_ceiling(const ClusterConfig& c, const DeadlineDistribution& d) {
  return miss_rate_derivative(c, c.capacity(), d);
}

/// Lambda*(alpha): the rate at which the marginal miss rate equals alpha,
/// clamped to [0, m mu] outside [alpha_k, beta_k].
inline double inverse_marginal(const ClusterConfig& c, double alpha, const DeadlineDistribution& d) {
  const double lo_alpha = marginal_floor(c, d);
  const double hi_alpha = marginal_ceiling(c, d);
  if (alpha <= lo_alpha) return 0.0;
  if (alpha >= hi_alpha) return c.capacity();
  const double cap = c.capacity();
  return numeric::bisect_increasing([&](double l) { return miss_rate_derivative(c, l, d) - alpha; }, 0.0,
                                    cap, 1e-15 * cap);
}

/// Rates (lambda_0, lambda_1, ..., lambda_n) of a Bernoulli split.
struct BernoulliSplit {
  double rejected = 0.0;
  std::vector<double> routed;

  double admitted() const { return std::accumulate(routed.begin(), routed.end(), 0.0); }
  double total() const { return rejected + admitted(); }
};

enum class LoadCase { Light, Medium, Heavy };
enum class QueueStatus { Zero, Interior, Saturated };

inline const char* to_string(LoadCase c) {
  switch (c) {
    case LoadCase::Light: return "light";
    case LoadCase::Medium: return "medium";
    case LoadCase::Heavy: return "heavy";
  }
  return "?";
}

inline const char* to_string(QueueStatus s) {
  switch (s) {
    case QueueStatus::Zero: return "zero";
    case QueueStatus::Interior: return "interior";
    case QueueStatus::Saturated: return "saturated";
  }
  return "?";
}

/// Evidence that a split satisfies the first-order optimality conditions.
struct KktCertificate {
  double multiplier = 0.0;       // alpha*
  double unconstrained = 0.0;    // alpha~, the root before capping at R
  LoadCase load_case = LoadCase::Light;
  std::vector<QueueStatus> status;
  std::vector<double> alpha;     // alpha_k = f'(0+)
  std::vector<double> beta;      // beta_k = f'((m mu)-)
  // Slack of each condition; all are >= 0 and zero when exactly satisfied.
  double rejection_residual = 0.0;
  double interior_residual = 0.0;
  double zero_residual = 0.0;
  double saturated_residual = 0.0;

  double max_residual() const {
    return std::max({rejection_residual, interior_residual, zero_residual, saturated_residual});
  }
  bool holds(double tol = 1e-8) const { return max_residual() <= tol; }
};

/// Classifies each queue and measures how far the split is from satisfying
/// the KKT conditions with multiplier `multiplier`.
inline KktCertificate certify_split(const SystemConfig& config, const BernoulliSplit& split, double multiplier) {
  constexpr double rel = 1e-12;
  KktCertificate cert;
  cert.multiplier = multiplier;
  cert.unconstrained = multiplier;
  const double R = config.rejection_cost();
  const double scale = std::max(1.0, std::abs(multiplier));
  if (split.rejected > rel * config.arrival_rate()) {
    cert.rejection_residual = std::abs(R - multiplier) / scale;
  } else {
    cert.rejection_residual = std::max(0.0, multiplier - R) / scale;
  }
  for (std::size_t k = 0; k < config.size(); ++k) {
    const auto& c = config.cluster(k);
    const double l = split.routed[k];
    const double a = marginal_floor(c, config.deadline());
    const double b = marginal_ceiling(c, config.deadline());
    cert.alpha.push_back(a);
    cert.beta.push_back(b);
    if (l <= rel * c.capacity()) {
      cert.status.push_back(QueueStatus::Zero);
      cert.zero_residual = std::max(cert.zero_residual, (multiplier - a) / scale);
    } else if (l >= (1.0 - rel) * c.capacity()) {
      cert.status.push_back(QueueStatus::Saturated);
      cert.saturated_residual = std::max(cert.saturated_residual, (b - multiplier) / scale);
    } else {
      cert.status.push_back(QueueStatus::Interior);
      const double gap = std::abs(miss_rate_derivative(c, l, config.deadline()) - multiplier);
      cert.interior_residual = std::max(cert.interior_residual, gap / scale);
    }
  }
  return cert;
}

struct BsSolution {
  BernoulliSplit split;
  KktCertificate certificate;
};

/// Optimal Bernoulli split by the breakpoint-ranking algorithm.
inline BsSolution solve_optimal_bs(const SystemConfig& config) {
  const auto& d = config.deadline();
  const std::size_t n = config.size();
  const double lambda = config.arrival_rate();
  const double R = config.rejection_cost();

  std::vector<double> alpha(n), beta(n);
  for (std::size_t k = 0; k < n; ++k) {
    alpha[k] = marginal_floor(config.cluster(k), d);
    beta[k] = marginal_ceiling(config.cluster(k), d);
  }
  auto total = [&](double a) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += inverse_marginal(config.cluster(k), a, d);
    return s;
  };

  // Sorted, de-duplicated breakpoints; sum Lambda*(.) is continuous and
  // nondecreasing between them, running from 0 up to the total capacity.
  std::vector<double> points(alpha);
  points.insert(points.end(), beta.begin(), beta.end());
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  double lo = points.front();
  double hi = points.back();
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (total(points[i]) < lambda && lambda <= total(points[i + 1])) {
      lo = points[i];
      hi = points[i + 1];
      break;
    }
  }

  double s_lo = total(lo);
  double s_hi = total(hi);
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double s = total(mid);
    if (s < lambda) {
      lo = mid;
      s_lo = s;
    } else {
      hi = mid;
      s_hi = s;
    }
  }
  const double root = 0.5 * (lo + hi);

  BsSolution out;
  out.split.routed.assign(n, 0.0);
  double multiplier = root;
  if (root > R) {
    multiplier = R;
    for (std::size_t k = 0; k < n; ++k) out.split.routed[k] = inverse_marginal(config.cluster(k), R, d);
    out.split.rejected = std::max(0.0, lambda - out.split.admitted());
  } else {
    // Interpolate between the two bracketing allocations so that the rates
    // add up to lambda to rounding.
    const double w = s_hi > s_lo ? std::clamp((lambda - s_lo) / (s_hi - s_lo), 0.0, 1.0) : 0.5;
    for (std::size_t k = 0; k < n; ++k) {
      const double a = inverse_marginal(config.cluster(k), lo, d);
      const double b = inverse_marginal(config.cluster(k), hi, d);
      out.split.routed[k] = (1.0 - w) * a + w * b;
    }
    out.split.rejected = 0.0;
  }

  out.certificate = certify_split(config, out.split, multiplier);
  out.certificate.unconstrained = root;
  const double top_alpha = *std::max_element(alpha.begin(), alpha.end());
  const double low_beta = *std::min_element(beta.begin(), beta.end());
  if (root <= top_alpha) {
    out.certificate.load_case = LoadCase::Light;
  } else if (root < low_beta) {
    out.certificate.load_case = LoadCase::Medium;
  } else {
    out.certificate.load_case = LoadCase::Heavy;
  }
  return out;
}

/// R lambda_0 + sum_k f_k(lambda_k).
inline double bs_objective(const SystemConfig& config, const BernoulliSplit& split) {
  double cost = 0.0;
  if (split.rejected > 0.0) cost += config.rejection_cost() * split.rejected;
  for (std::size_t k = 0; k < config.size(); ++k) {
    cost += miss_rate(config.cluster(k), split.routed.at(k), config.deadline());
  }
  return cost;
}

/// Cost rate, rejection ratio and miss ratio of a split, with each queue an
/// independent M/M/m system.
struct SplitPerformance {
  double cost_rate;
  double rejection_ratio;
  double miss_ratio;
};

inline SplitPerformance evaluate_split(const SystemConfig& config, const BernoulliSplit& split) {
  const double lambda = config.arrival_rate();
  double misses = 0.0;
  for (std::size_t k = 0; k < config.size(); ++k) {
    misses += miss_rate(config.cluster(k), split.routed.at(k), config.deadline());
  }
  const double p = split.rejected / lambda;
  return {bs_objective(config, split), p, misses / lambda};
}

/// Checks numerically that f' increases across (0, m mu). Stretches that are
/// flat to working precision (large pools at light load) are accepted. Returns
/// an empty string when it holds, else a description of the first violation.
inline std::string check_marginal_monotone(const ClusterConfig& c, const DeadlineDistribution& d,
                                           int points = 1000) {
  const double cap = c.capacity();
  double previous = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= points; ++i) {
    const double l = cap * i / (points + 1.0);
    const double v = miss_rate_derivative(c, l, d);
    if (!(v >= previous - 1e-12 * std::max(1.0, std::abs(previous)))) {
      std::ostringstream msg;
      msg << "marginal miss rate not increasing near lambda=" << l << " (" << previous << " -> " << v << ")";
      return msg.str();
    }
    previous = v;
  }
  return {};
}

}  // namespace softroute
