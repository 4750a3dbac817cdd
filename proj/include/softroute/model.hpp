#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "softroute/deadline.hpp"

namespace softroute {

/// A pool of `servers` identical exponential servers, each of rate `rate`,
/// fed by its own FCFS queue.
struct ClusterConfig {
  int servers = 1;
  double rate = 1.0;

  ClusterConfig() = default;
  ClusterConfig(int m, double mu) : servers(m), rate(mu) {
    if (m < 1) throw std::invalid_argument("cluster needs at least one server");
    if (!(mu > 0.0) || !std::isfinite(mu)) {
      throw std::invalid_argument("cluster service rate must be positive");
    }
  }

  double capacity() const { return servers * rate; }

  /// Total service rate when x jobs are present: min(x, m) mu.
  double service_rate(long x) const {
    return static_cast<double>(std::min<long>(x, servers)) * rate;
  }
};

inline constexpr double kInfiniteRejectionCost = std::numeric_limits<double>::infinity();

/// Arrival stream, rejection cost and cluster set. The deadline-miss cost is
/// normalised to one; `rejection_cost` may be +infinity for pure routing.
class SystemConfig {
 public:
  SystemConfig(double arrival_rate, double rejection_cost, std::vector<ClusterConfig> clusters,
               DeadlineDistribution deadline)
      : arrival_rate_(arrival_rate),
        rejection_cost_(rejection_cost),
        clusters_(std::move(clusters)),
        deadline_(deadline) {
    if (!(arrival_rate_ > 0.0) || !std::isfinite(arrival_rate_)) {
      throw std::invalid_argument("arrival rate must be positive");
    }
    if (!(rejection_cost_ >= 0.0)) {
      throw std::invalid_argument("rejection cost must be nonnegative");
    }
    if (clusters_.empty()) throw std::invalid_argument("at least one cluster is required");
    if (!(load() < 1.0)) {
      std::ostringstream msg;
      msg << "system load must be below one (got " << load() << ")";
      throw std::invalid_argument(msg.str());
    }
  }

  /// Builds a configuration at a target load rho = lambda / sum_k m_k mu_k.
  static SystemConfig at_load(double rho, double rejection_cost, std::vector<ClusterConfig> clusters,
                              DeadlineDistribution deadline) {
    double capacity = 0.0;
    for (const auto& c : clusters) capacity += c.capacity();
    return SystemConfig(rho * capacity, rejection_cost, std::move(clusters), deadline);
  }

  double arrival_rate() const { return arrival_rate_; }
  double rejection_cost() const { return rejection_cost_; }
  bool pure_routing() const { return std::isinf(rejection_cost_); }
  const std::vector<ClusterConfig>& clusters() const { return clusters_; }
  const ClusterConfig& cluster(std::size_t k) const { return clusters_.at(k); }
  std::size_t size() const { return clusters_.size(); }
  const DeadlineDistribution& deadline() const { return deadline_; }

  double total_capacity() const {
    double capacity = 0.0;
    for (const auto& c : clusters_) capacity += c.capacity();
    return capacity;
  }

  double load() const { return arrival_rate_ / total_capacity(); }

  SystemConfig with_rejection_cost(double r) const {
    return SystemConfig(arrival_rate_, r, clusters_, deadline_);
  }

  SystemConfig with_arrival_rate(double lambda) const {
    return SystemConfig(lambda, rejection_cost_, clusters_, deadline_);
  }

 private:
  double arrival_rate_;
  double rejection_cost_;
  std::vector<ClusterConfig> clusters_;
  DeadlineDistribution deadline_;
};

/// Parses "4:5,8:3" into clusters (servers:rate pairs).
inline std::vector<ClusterConfig> parse_clusters(std::string_view text) {
  std::vector<ClusterConfig> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    const auto end = item.find_last_not_of(" \t");
    if (begin == std::string::npos) continue;
    item = item.substr(begin, end - begin + 1);
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("cluster must be m:mu, got " + item);
    std::size_t used = 0;
    const int m = std::stoi(item.substr(0, colon), &used);
    const double mu = std::stod(item.substr(colon + 1));
    out.emplace_back(m, mu);
  }
  if (out.empty()) throw std::invalid_argument("no clusters given");
  return out;
}

/// Parses a rejection cost; accepts "inf".
inline double parse_rejection_cost(std::string_view text) {
  if (text == "inf" || text == "infinity" || text == "Inf") return kInfiniteRejectionCost;
  return std::stod(std::string(text));
}

}  // namespace softroute
