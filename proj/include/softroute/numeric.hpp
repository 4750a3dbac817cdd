#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace softroute {

/// Raised when an iterative procedure fails to reach its tolerance.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace numeric {

/// expm1(z) / z, continuous at z = 0.
inline double relative_expm1(double z) {
  if (z == 0.0) return 1.0;
  return std::expm1(z) / z;
}

/// (z e^z - expm1(z)) / z^2, continuous at z = 0 where it equals 1/2.
///
/// Shows up as the confluent divided difference of s -> e^{-ts}.
inline double second_expm1(double z) {
  if (std::abs(z) < 0.5) {
    // sum_{n>=1} n z^{n-1} / (n+1)!
    double term = 0.5;  // n = 1
    double sum = term;
    for (int n = 2; n < 40; ++n) {
      term *= z * n / ((n - 1.0) * (n + 1.0));
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return (z * std::exp(z) - std::expm1(z)) / (z * z);
}

/// (1 - e^{-z}(1 + z)) / z^2 = int_0^1 v e^{-zv} dv, continuous at z = 0.
inline double ramp_integral(double z) {
  if (std::abs(z) < 1.0) {
    double sum = 0.0;
    double power = 1.0;  // (-z)^n / n!
    for (int n = 0; n < 40; ++n) {
      const double term = power / (n + 2.0);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      power *= -z / (n + 1.0);
    }
    return sum;
  }
  return -(std::expm1(-z) + z * std::exp(-z)) / (z * z);
}

/// Nodes and weights of the 16-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre16 {
  std::array<double, 16> nodes{};
  std::array<double, 16> weights{};

  GaussLegendre16() {
    constexpr int n = 16;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  static const GaussLegendre16& instance() {
    static const GaussLegendre16 rule;
    return rule;
  }
};

/// Composite 16-point Gauss-Legendre quadrature of f over [a, b].
template <class F>
double integrate(F&& f, double a, double b, std::size_t panels) {
  const auto& rule = GaussLegendre16::instance();
  const double width = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + width * static_cast<double>(p);
    const double mid = lo + 0.5 * width;
    double panel = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      panel += rule.weights[i] * f(mid + 0.5 * width * rule.nodes[i]);
    }
    total += 0.5 * width * panel;
  }
  return total;
}

/// Bisection for the root of a nondecreasing function g on [lo, hi] with
/// g(lo) <= 0 <= g(hi). Stops when the bracket is below `width`.
template <class G>
double bisect_increasing(G&& g, double lo, double hi, double width,
                         int max_iterations = 400) {
  for (int i = 0; i < max_iterations && hi - lo > width; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// %.{digits}g text (C locale), with "inf"/"-inf"/"nan".
inline std::string format(double v, int digits = 10) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace numeric
}  // namespace softroute
