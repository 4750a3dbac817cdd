#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "softroute/bernoulli_split.hpp"

namespace softroute {

/// Reject, or route to cluster k (0-based).
struct Action {
  int target = -1;

  static Action reject() { return Action{-1}; }
  static Action route_to(int k) { return Action{k}; }
  bool is_reject() const { return target < 0; }
  friend bool operator==(Action, Action) = default;
};

/// A stationary admission/routing rule acting on the joint queue state.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual std::size_t clusters() const = 0;

  /// Fills probs (size clusters()+1) with the action distribution at x:
  /// probs[0] is the rejection probability, probs[k+1] that of routing to k.
  virtual void distribution(std::span<const int> x, std::span<double> probs) const = 0;

  virtual bool deterministic() const { return true; }

  /// Draws an action with a uniform variate u in [0, 1).
  virtual Action sample(std::span<const int> x, double u) const {
    std::vector<double> probs(clusters() + 1);
    distribution(x, probs);
    double acc = 0.0;
    int last = -2;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last = static_cast<int>(i) - 1;
      if (u < acc) return Action{last};
    }
    if (last == -2) throw std::logic_error(name() + " returned an empty action distribution");
    return Action{last};
  }
};

class RejectAllPolicy final : public Policy {
 public:
  explicit RejectAllPolicy(std::size_t n) : n_(n) {}
  std::string name() const override { return "REJECT"; }
  std::size_t clusters() const override { return n_; }
  void distribution(std::span<const int>, std::span<double> probs) const override {
    std::fill(probs.begin(), probs.end(), 0.0);
    probs[0] = 1.0;
  }

 private:
  std::size_t n_;
};

/// State-independent randomized routing with probabilities lambda_k / lambda.
class BernoulliSplitPolicy final : public Policy {
 public:
  BernoulliSplitPolicy(BernoulliSplit split, std::string name = "BS") : name_(std::move(name)) {
    const double total = split.total();
    if (!(total > 0.0)) throw std::invalid_argument("split has no traffic");
    probs_.push_back(split.rejected / total);
    for (double l : split.routed) probs_.push_back(l / total);
    split_ = std::move(split);
  }

  std::string name() const override { return name_; }
  std::size_t clusters() const override { return probs_.size() - 1; }
  bool deterministic() const override { return false; }
  void distribution(std::span<const int>, std::span<double> probs) const override {
    std::copy(probs_.begin(), probs_.end(), probs.begin());
  }
  const BernoulliSplit& split() const { return split_; }

 private:
  BernoulliSplit split_;
  std::vector<double> probs_;
  std::string name_;
};

/// Lexicographic encoding of {0..B}^n, last coordinate fastest.
class StateLattice {
 public:
  StateLattice(std::size_t n, int buffer) : n_(n), buffer_(buffer) {
    if (n == 0) throw std::invalid_argument("lattice needs at least one dimension");
    if (buffer < 0) throw std::invalid_argument("buffer must be nonnegative");
    size_ = 1;
    stride_.assign(n, 1);
    for (std::size_t k = n; k-- > 0;) {
      stride_[k] = size_;
      size_ *= static_cast<std::size_t>(buffer + 1);
    }
  }

  std::size_t dimensions() const { return n_; }
  int buffer() const { return buffer_; }
  std::size_t size() const { return size_; }
  std::size_t stride(std::size_t k) const { return stride_[k]; }

  std::size_t encode(std::span<const int> x) const {
    std::size_t s = 0;
    for (std::size_t k = 0; k < n_; ++k) s += static_cast<std::size_t>(x[k]) * stride_[k];
    return s;
  }

  void decode(std::size_t s, std::span<int> x) const {
    for (std::size_t k = 0; k < n_; ++k) {
      x[k] = static_cast<int>(s / stride_[k]);
      s %= stride_[k];
    }
  }

 private:
  std::size_t n_;
  int buffer_;
  std::size_t size_;
  std::vector<std::size_t> stride_;
};

/// Deterministic policy stored as one action per lattice state; states past
/// the buffer are clamped onto it.
class TabularPolicy final : public Policy {
 public:
  TabularPolicy(StateLattice lattice, std::vector<Action> actions, std::string name = "OPT")
      : lattice_(std::move(lattice)), actions_(std::move(actions)), name_(std::move(name)) {
    if (actions_.size() != lattice_.size()) throw std::invalid_argument("action table size mismatch");
  }

  std::string name() const override { return name_; }
  std::size_t clusters() const override { return lattice_.dimensions(); }

  Action action(std::span<const int> x) const {
    std::size_t s = 0;
    for (std::size_t k = 0; k < lattice_.dimensions(); ++k) {
      s += static_cast<std::size_t>(std::min(x[k], lattice_.buffer())) * lattice_.stride(k);
    }
    return actions_[s];
  }

  void distribution(std::span<const int> x, std::span<double> probs) const override {
    std::fill(probs.begin(), probs.end(), 0.0);
    probs[static_cast<std::size_t>(action(x).target + 1)] = 1.0;
  }

  Action sample(std::span<const int> x, double) const override { return action(x); }

  const StateLattice& lattice() const { return lattice_; }
  const std::vector<Action>& actions() const { return actions_; }

 private:
  StateLattice lattice_;
  std::vector<Action> actions_;
  std::string name_;
};

}  // namespace softroute
