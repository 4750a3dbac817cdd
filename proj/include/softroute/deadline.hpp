#pragma once

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "softroute/numeric.hpp"

namespace softroute {

struct ConstantDeadline {
  double t;
};

/// Deadline drawn uniformly from [t1, t2].
struct UniformDeadline {
  double t1;
  double t2;
};

struct ExponentialDeadline {
  double theta;  ///< rate; the mean deadline is 1 / theta
};

/// Relative response-time deadline of a job, measured from its arrival.
///
/// Carries the CDF and the Laplace transform phi(s) = E[exp(-s tau)] of the
/// deadline, together with phi'(s). The transform is evaluated for s >= 0 so
/// that internal callers can reach the saturation endpoint s = 0; the public
/// `laplace_transform` free function rejects s <= 0.
class DeadlineDistribution {
 public:
  using Variant = std::variant<ConstantDeadline, UniformDeadline, ExponentialDeadline>;

  static DeadlineDistribution constant(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("constant deadline requires t > 0");
    }
    return DeadlineDistribution(ConstantDeadline{t});
  }

  static DeadlineDistribution uniform(double t1, double t2) {
    if (!(t1 >= 0.0) || !(t2 > t1) || !std::isfinite(t2)) {
      throw std::invalid_argument("uniform deadline requires 0 <= t1 < t2");
    }
    return DeadlineDistribution(UniformDeadline{t1, t2});
  }

  static DeadlineDistribution exponential(double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) {
      throw std::invalid_argument("exponential deadline requires theta > 0");
    }
    return DeadlineDistribution(ExponentialDeadline{theta});
  }

  /// Parses "const:t", "unif:t1:t2" or "exp:theta".
  static DeadlineDistribution parse(std::string_view text) {
    std::vector<double> args;
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
      throw std::invalid_argument("bad deadline spec: " + std::string(text));
    }
    const std::string_view family = text.substr(0, colon);
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto next = rest.find(':');
      const std::string field(rest.substr(0, next));
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != field.size()) {
        throw std::invalid_argument("bad deadline parameter: " + field);
      }
      args.push_back(value);
      rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next + 1);
    }
    if ((family == "const" || family == "constant") && args.size() == 1) {
      return constant(args[0]);
    }
    if ((family == "unif" || family == "uniform") && args.size() == 2) {
      return uniform(args[0], args[1]);
    }
    if ((family == "exp" || family == "exponential") && args.size() == 1) {
      return exponential(args[0]);
    }
    throw std::invalid_argument("bad deadline spec: " + std::string(text));
  }

  const Variant& variant() const { return variant_; }

  template <class T>
  bool is() const {
    return std::holds_alternative<T>(variant_);
  }

  double mean() const {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDeadline>) {
            return d.t;
          } else if constexpr (std::is_same_v<T, UniformDeadline>) {
            return 0.5 * (d.t1 + d.t2);
          } else {
            return 1.0 / d.theta;
          }
        },
        variant_);
  }

  double cdf(double t) const {
    return std::visit(
        [t](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDeadline>) {
            return t >= d.t ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<T, UniformDeadline>) {
            if (t <= d.t1) return 0.0;
            if (t >= d.t2) return 1.0;
            return (t - d.t1) / (d.t2 - d.t1);
          } else {
            return t <= 0.0 ? 0.0 : -std::expm1(-d.theta * t);
          }
        },
        variant_);
  }

  /// phi(s) for s >= 0.
  double laplace(double s) const {
    return std::visit(
        [s](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDeadline>) {
            return std::exp(-s * d.t);
          } else if constexpr (std::is_same_v<T, UniformDeadline>) {
            const double w = d.t2 - d.t1;
            return std::exp(-d.t1 * s) * numeric::relative_expm1(-w * s);
          } else {
            return d.theta / (s + d.theta);
          }
        },
        variant_);
  }

  /// phi'(s) for s >= 0.
  double laplace_derivative(double s) const {
    return std::visit(
        [s](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDeadline>) {
            return -d.t * std::exp(-s * d.t);
          } else if constexpr (std::is_same_v<T, UniformDeadline>) {
            // -(1/w) int_{t1}^{t2} t e^{-st} dt, split at t1 to stay stable near s = 0
            const double w = d.t2 - d.t1;
            const double head = d.t1 * w * numeric::relative_expm1(-w * s);
            const double ramp = w * w * numeric::ramp_integral(w * s);
            return -std::exp(-d.t1 * s) * (head + ramp) / w;
          } else {
            return -d.theta / ((s + d.theta) * (s + d.theta));
          }
        },
        variant_);
  }

  template <class Rng>
  double sample(Rng& rng) const {
    return std::visit(
        [&rng](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDeadline>) {
            return d.t;
          } else if constexpr (std::is_same_v<T, UniformDeadline>) {
            return std::uniform_real_distribution<double>(d.t1, d.t2)(rng);
          } else {
            return std::exponential_distribution<double>(d.theta)(rng);
          }
        },
        variant_);
  }

  std::string to_string() const {
    std::ostringstream out;
    out.precision(17);
    std::visit(
        [&out](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantDeadline>) {
            out << "const:" << d.t;
          } else if constexpr (std::is_same_v<T, UniformDeadline>) {
            out << "unif:" << d.t1 << ':' << d.t2;
          } else {
            out << "exp:" << d.theta;
          }
        },
        variant_);
    return out.str();
  }

 private:
  explicit DeadlineDistribution(Variant v) : variant_(v) {}

  Variant variant_;
};

/// Laplace transform of the deadline; domain error for s <= 0.
inline double laplace_transform(const DeadlineDistribution& deadline, double s) {
  if (!(s > 0.0)) throw std::domain_error("laplace_transform requires s > 0");
  return deadline.laplace(s);
}

}  // namespace softroute
