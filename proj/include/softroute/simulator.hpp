#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "softroute/model.hpp"
#include "softroute/numeric.hpp"
#include "softroute/policy.hpp"

namespace softroute {

struct SimConfig {
  SystemConfig config;
  std::shared_ptr<const Policy> policy;
  long horizon = 1'000'000;  // jobs per replication, warmup included
  long warmup = -1;          // jobs discarded first; negative means 10% of the horizon
  int replications = 1;
  std::uint64_t seed = 1;
  int batches = 20;
  long max_in_system = 100'000;
  bool sample_deadlines = true;    // off: no deadline draws (dynamics must not change)
  bool record_trajectory = false;  // keep the action taken at every arrival
  bool parallel = true;

  long effective_warmup() const { return warmup < 0 ? horizon / 10 : warmup; }
};

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

struct SimResult {
  Estimate cost_per_job;
  Estimate rejection;
  Estimate miss;
  std::vector<Estimate> utilization;
  std::vector<Estimate> response_time;     // admitted jobs, per cluster
  std::vector<Estimate> number_in_system;  // seen by arrivals, per cluster
  std::vector<Estimate> throughput;        // admitted jobs per unit time, per cluster
  long measured_jobs = 0;
  std::vector<std::vector<int>> trajectories;  // per replication: action+1 at each arrival
};

class simulation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

enum StreamId : std::uint64_t { kArrivalStream = 1, kDeadlineStream = 2, kPolicyStream = 3, kServiceStream = 16 };

inline std::mt19937_64 make_stream(std::uint64_t seed, int replication, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

// Per-batch sums for one replication.
struct BatchSums {
  double jobs = 0, rejected = 0, missed = 0, duration = 0;
  std::vector<double> busy, admitted, response, seen;
};

struct ReplicationOutput {
  std::vector<BatchSums> batches;
  std::vector<int> trajectory;
};

inline ReplicationOutput run_replication(const SimConfig& sim, int replication) {
  const auto& cfg = sim.config;
  const std::size_t n = cfg.size();
  const long warmup = sim.effective_warmup();
  const long measured = sim.horizon - warmup;
  const long per_batch = measured / sim.batches;

  auto arrivals = make_stream(sim.seed, replication, kArrivalStream);
  auto deadlines = make_stream(sim.seed, replication, kDeadlineStream);
  auto decisions = make_stream(sim.seed, replication, kPolicyStream);
  std::vector<std::mt19937_64> services;
  for (std::size_t k = 0; k < n; ++k) services.push_back(make_stream(sim.seed, replication, kServiceStream + k));

  std::exponential_distribution<double> interarrival(cfg.arrival_rate());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::exponential_distribution<double>> service;
  for (const auto& c : cfg.clusters()) service.emplace_back(c.rate);

  using MinHeap = std::priority_queue<double, std::vector<double>, std::greater<>>;
  std::vector<MinHeap> free_at(n), completions(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (int i = 0; i < cfg.cluster(k).servers; ++i) free_at[k].push(0.0);
  }

  ReplicationOutput out;
  out.batches.resize(static_cast<std::size_t>(sim.batches));
  for (auto& b : out.batches) {
    b.busy.assign(n, 0.0);
    b.admitted.assign(n, 0.0);
    b.response.assign(n, 0.0);
    b.seen.assign(n, 0.0);
  }
  if (sim.record_trajectory) out.trajectory.reserve(static_cast<std::size_t>(sim.horizon));

  std::vector<int> x(n, 0);
  double now = 0.0;
  double batch_start = 0.0;
  for (long job = 0; job < sim.horizon; ++job) {
    now += interarrival(arrivals);
    for (std::size_t k = 0; k < n; ++k) {
      while (!completions[k].empty() && completions[k].top() <= now) completions[k].pop();
      x[k] = static_cast<int>(completions[k].size());
    }
    const double u = unit(decisions);
    const Action a = sim.policy->sample(x, u);
    if (sim.record_trajectory) out.trajectory.push_back(a.target + 1);

    const long index = job - warmup;
    const bool counted = index >= 0 && index < per_batch * sim.batches;
    BatchSums* batch = counted ? &out.batches[static_cast<std::size_t>(index / per_batch)] : nullptr;
    if (counted && index % per_batch == 0) batch_start = now;
    if (batch) {
      batch->jobs += 1;
      for (std::size_t k = 0; k < n; ++k) batch->seen[k] += x[k];
    }

    if (a.is_reject()) {
      if (batch) batch->rejected += 1;
    } else {
      const auto k = static_cast<std::size_t>(a.target);
      if (k >= n) throw simulation_error("policy routed to a nonexistent cluster");
      const double s = service[k](services[k]);
      const double start = std::max(now, free_at[k].top());
      free_at[k].pop();
      const double done = start + s;
      free_at[k].push(done);
      completions[k].push(done);
      if (static_cast<long>(completions[k].size()) > sim.max_in_system) {
        throw simulation_error("more than " + std::to_string(sim.max_in_system) +
                               " jobs in a cluster; the policy does not keep the system stable");
      }
      bool missed = false;
      if (sim.sample_deadlines) missed = done - now > cfg.deadline().sample(deadlines);
      if (batch) {
        batch->admitted[k] += 1;
        batch->busy[k] += s;
        batch->response[k] += done - now;
        if (missed) batch->missed += 1;
      }
    }
    if (counted && (index + 1) % per_batch == 0) batch->duration = now - batch_start;
  }
  return out;
}

inline Estimate summarize(const std::vector<double>& values) {
  Estimate e;
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return e;
}

}  // namespace detail

/// Discrete-event simulation of the FCFS multicluster system. Batch means
/// (pooled over replications) give the standard errors.
inline SimResult simulate(const SimConfig& sim) {
  if (!sim.policy) throw std::invalid_argument("simulation needs a policy");
  if (sim.policy->clusters() != sim.config.size()) throw std::invalid_argument("policy and system disagree on clusters");
  if (sim.replications < 1) throw std::invalid_argument("need at least one replication");
  if (sim.batches < 1) throw std::invalid_argument("need at least one batch");
  if (!(sim.horizon > sim.effective_warmup()) || sim.effective_warmup() < 0) {
    throw std::invalid_argument("horizon must exceed warmup");
  }
  if ((sim.horizon - sim.effective_warmup()) / sim.batches < 1) throw std::invalid_argument("too few jobs per batch");

  std::vector<detail::ReplicationOutput> reps(static_cast<std::size_t>(sim.replications));
  if (sim.parallel && sim.replications > 1) {
    std::vector<std::future<detail::ReplicationOutput>> jobs;
    for (int r = 0; r < sim.replications; ++r) {
      jobs.push_back(std::async(std::launch::async, [&sim, r] { return detail::run_replication(sim, r); }));
    }
    for (int r = 0; r < sim.replications; ++r) reps[static_cast<std::size_t>(r)] = jobs[static_cast<std::size_t>(r)].get();
  } else {
    for (int r = 0; r < sim.replications; ++r) reps[static_cast<std::size_t>(r)] = detail::run_replication(sim, r);
  }

  const std::size_t n = sim.config.size();
  const double R = sim.config.rejection_cost();
  std::vector<double> rej, miss, cost;
  std::vector<std::vector<double>> util(n), resp(n), seen(n), thru(n);
  SimResult res;
  for (const auto& rep : reps) {
    for (const auto& b : rep.batches) {
      res.measured_jobs += static_cast<long>(b.jobs);
      const double p = b.rejected / b.jobs;
      const double q = b.missed / b.jobs;
      rej.push_back(p);
      miss.push_back(q);
      for (std::size_t k = 0; k < n; ++k) {
        util[k].push_back(b.busy[k] / (sim.config.cluster(k).servers * b.duration));
        if (b.admitted[k] > 0) resp[k].push_back(b.response[k] / b.admitted[k]);
        seen[k].push_back(b.seen[k] / b.jobs);
        thru[k].push_back(b.admitted[k] / b.duration);
      }
    }
    if (sim.record_trajectory) res.trajectories.push_back(rep.trajectory);
  }
  res.rejection = detail::summarize(rej);
  res.miss = detail::summarize(miss);
  if (std::isinf(R)) {
    res.cost_per_job = res.rejection.mean > 0.0 ? Estimate{std::numeric_limits<double>::infinity(), 0.0} : res.miss;
  } else {
    for (std::size_t i = 0; i < rej.size(); ++i) cost.push_back(R * rej[i] + miss[i]);
    res.cost_per_job = detail::summarize(cost);
  }
  for (std::size_t k = 0; k < n; ++k) {
    res.utilization.push_back(detail::summarize(util[k]));
    res.response_time.push_back(detail::summarize(resp[k]));
    res.number_in_system.push_back(detail::summarize(seen[k]));
    res.throughput.push_back(detail::summarize(thru[k]));
  }
  return res;
}

/// CSV rows instance,policy,metric,mean,se.
inline void write_sim_csv(std::ostream& out, const std::string& instance, const std::string& policy,
                          const SimResult& r, bool header = true) {
  if (header) out << "instance,policy,metric,mean,se\n";
  auto row = [&](const std::string& metric, const Estimate& e) {
    out << instance << ',' << policy << ',' << metric << ',' << numeric::format(e.mean) << ','
        << numeric::format(e.se) << '\n';
  };
  row("cost_per_job", r.cost_per_job);
  row("p", r.rejection);
  row("q", r.miss);
  for (std::size_t k = 0; k < r.utilization.size(); ++k) {
    const std::string c = std::to_string(k + 1);
    row("utilization_" + c, r.utilization[k]);
    row("response_time_" + c, r.response_time[k]);
    row("number_in_system_" + c, r.number_in_system[k]);
    row("throughput_" + c, r.throughput[k]);
  }
}

struct TradeoffPoint {
  double rejection_cost;
  Estimate rejection;
  Estimate miss;
};

/// Simulated (p, q) across a grid of rejection costs; `make_policy` builds the
/// policy for each configuration.
inline std::vector<TradeoffPoint> estimate_pq_tradeoff(
    const SimConfig& base, const std::vector<double>& grid,
    const std::function<std::shared_ptr<const Policy>(const SystemConfig&)>& make_policy) {
  std::vector<TradeoffPoint> out;
  for (double R : grid) {
    SimConfig sim = base;
    sim.config = base.config.with_rejection_cost(R);
    sim.policy = make_policy(sim.config);
    const auto r = simulate(sim);
    out.push_back({R, r.rejection, r.miss});
  }
  return out;
}

}  // namespace softroute
