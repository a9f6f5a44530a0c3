#pragma once

// Stochastic samplers for the ring: Wolff single-cluster updates, Glauber
// heat-bath updates, exact stationary draws, and chain runners.
//
// RNG consumption order (part of the reproducibility contract):
//   Wolff step    one uniform_index(N) for the seed site, then one uniform01()
//                 per bond trial. Bonds are examined in stack (LIFO) order and,
//                 for each popped site, in direction order +1 then -1. A trial
//                 is drawn only when the bond has not been examined before, the
//                 neighbour is aligned with the cluster and not yet in it.
//   Glauber step  one uniform_index(N) for the site, then one uniform01().
//   Uniform init  one uniform_index(2) per site, site 1 first.
//   Stationary    N <= 20: one uniform01() (inverse CDF over state indices);
//                 N > 20: one uniform01() per site, site 1 first.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ising/configuration.hpp"
#include "ising/errors.hpp"
#include "ising/model.hpp"
#include "ising/rng.hpp"

namespace ising {

enum class Dynamics { wolff, glauber };

inline std::string_view to_string(Dynamics d) { return d == Dynamics::wolff ? "wolff" : "glauber"; }

inline Dynamics parse_dynamics(std::string_view s) {
  if (s == "wolff") return Dynamics::wolff;
  if (s == "glauber") return Dynamics::glauber;
  throw ArgumentError("unknown dynamics '" + std::string(s) + "' (use wolff or glauber)");
}

/// Wolff single-cluster update with reusable scratch space.
class WolffSampler {
 public:
  explicit WolffSampler(const ModelParams& p)
      : n_(p.n()),
        add_prob_(DerivedConstants::compute(p).kappa),
        in_cluster_(p.n(), 0),
        bond_seen_(p.n(), 0) {
    cluster_.reserve(p.n());
    stack_.reserve(p.n());
  }

  /// Grows one cluster from a uniformly chosen seed and flips it in place.
  /// Returns the cluster size (always >= 1).
  std::size_t step(Configuration& c, RngStream& rng) {
    if (c.n() != n_) throw ArgumentError("configuration size does not match model");
    cluster_.clear();
    const auto seed = static_cast<std::size_t>(rng.uniform_index(n_));
    const bool spin = c.is_plus(seed);
    in_cluster_[seed] = 1;
    cluster_.push_back(seed);
    stack_.push_back(seed);
    while (!stack_.empty()) {
      const std::size_t i = stack_.back();
      stack_.pop_back();
      // +1 neighbour through bond i, -1 neighbour through bond i-1.
      const std::size_t right = i + 1 == n_ ? 0 : i + 1;
      const std::size_t left = i == 0 ? n_ - 1 : i - 1;
      try_bond(c, rng, i, right, spin);
      try_bond(c, rng, left, left, spin);
    }
    for (std::size_t k : cluster_) {
      c.flip(k);
      in_cluster_[k] = 0;
      bond_seen_[k] = 0;
      bond_seen_[k == 0 ? n_ - 1 : k - 1] = 0;
    }
    return cluster_.size();
  }

  /// 0-based sites of the most recent cluster, in order of inclusion.
  const std::vector<std::size_t>& last_cluster() const { return cluster_; }

 private:
  // `bond` is the 0-based bond index; for the -1 direction it coincides with
  // the neighbour index.
  void try_bond(const Configuration& c, RngStream& rng, std::size_t bond, std::size_t j, bool spin) {
    if (bond_seen_[bond]) return;
    bond_seen_[bond] = 1;
    if (c.is_plus(j) != spin || in_cluster_[j]) return;
    if (rng.uniform01() < add_prob_) {
      in_cluster_[j] = 1;
      cluster_.push_back(j);
      stack_.push_back(j);
    }
  }

  std::size_t n_;
  double add_prob_;
  std::vector<std::uint8_t> in_cluster_;
  std::vector<std::uint8_t> bond_seen_;
  std::vector<std::size_t> cluster_;
  std::vector<std::size_t> stack_;
};

/// Heat-bath single-site update.
class GlauberSampler {
 public:
  explicit GlauberSampler(const ModelParams& p) : n_(p.n()) {
    if (p.j_hat().is_infinite()) throw DomainError("Glauber dynamics is degenerate at J = inf");
    const double j = p.j_hat().value();
    // Indexed by (s_i * (s_{i-1} + s_{i+1}) + 2) / 2.
    flip_prob_[0] = 1.0 / (1.0 + std::exp(-4.0 * j));
    flip_prob_[1] = 0.5;
    flip_prob_[2] = 1.0 / (std::exp(4.0 * j) + 1.0);
  }

  /// Closed-form flip probability given s_i * (s_{i-1} + s_{i+1}) in {-2, 0, 2}.
  double flip_probability(int local_field) const { return flip_prob_[(local_field + 2) / 2]; }

  /// Returns true if the chosen spin flipped.
  bool step(Configuration& c, RngStream& rng) {
    if (c.n() != n_) throw ArgumentError("configuration size does not match model");
    const auto i = static_cast<std::size_t>(rng.uniform_index(n_));
    const int field = c[i] * (c[i == 0 ? n_ - 1 : i - 1] + c[i + 1 == n_ ? 0 : i + 1]);
    if (rng.uniform01() < flip_probability(field)) {
      c.flip(i);
      return true;
    }
    return false;
  }

 private:
  std::size_t n_;
  double flip_prob_[3] = {0.5, 0.5, 0.5};
};

inline Configuration wolff_step(const Configuration& c, const ModelParams& p, RngStream& rng) {
  Configuration out = c;
  WolffSampler(p).step(out, rng);
  return out;
}

inline Configuration glauber_step(const Configuration& c, const ModelParams& p, RngStream& rng) {
  Configuration out = c;
  GlauberSampler(p).step(out, rng);
  return out;
}

/// Exact draws from the Gibbs measure.
///
/// For N <= 20 an inverse CDF over the 2^N exact probabilities is used. For
/// larger N, spins are drawn sequentially: s_1 is a fair sign, and s_{k+1}
/// given (s_k, s_1) has weight exp(J s_k b) * (T^m)(b, s_1), where m = N - k
/// bonds remain to close the ring and T^m(b, a) is proportional to
/// 1 + a b theta^m.
class StationarySampler {
 public:
  enum class Method { automatic, table, transfer };

  explicit StationarySampler(const ModelParams& p, Method method = Method::automatic) : params_(p) {
    if (p.j_hat().is_infinite()) throw DomainError("stationary law undefined at J = inf");
    if (method == Method::automatic) method = p.n() <= kMaxExactSites ? Method::table : Method::transfer;
    if (method == Method::table) {
      const GibbsMeasure mu(p);
      cdf_.resize(mu.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < mu.size(); ++i) {
        acc += mu[i];
        cdf_[i] = acc;
      }
    } else {
      const double theta = DerivedConstants::compute(p).theta;
      theta_pow_.resize(p.n() + 1);
      for (std::size_t m = 0; m <= p.n(); ++m) theta_pow_[m] = std::pow(theta, static_cast<double>(m));
      bias_ = std::exp(-2.0 * p.j_hat().value());
    }
  }

  bool uses_table() const { return !cdf_.empty(); }

  Configuration sample(RngStream& rng) const {
    const std::size_t n = params_.n();
    if (uses_table()) {
      const double u = rng.uniform01() * cdf_.back();
      auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
      std::size_t idx = static_cast<std::size_t>(it - cdf_.begin());
      if (idx >= cdf_.size()) idx = cdf_.size() - 1;
      return Configuration::from_index(n, idx);
    }
    Bits b(n);
    const bool first_plus = rng.uniform01() < 0.5;
    b[0] = first_plus;
    const double s1 = first_plus ? 1.0 : -1.0;
    int prev = first_plus ? 1 : -1;
    for (std::size_t k = 1; k < n; ++k) {
      const double tm = theta_pow_[n - k];
      // w(-1)/w(+1) = exp(-2 J s_prev) * (1 - s1 t) / (1 + s1 t)
      const double pair = prev == 1 ? bias_ : 1.0 / bias_;
      const double ratio = pair * (1.0 - s1 * tm) / (1.0 + s1 * tm);
      const bool plus = rng.uniform01() < 1.0 / (1.0 + ratio);
      b[k] = plus;
      prev = plus ? 1 : -1;
    }
    return Configuration(std::move(b));
  }

 private:
  ModelParams params_;
  std::vector<double> cdf_;
  std::vector<double> theta_pow_;
  double bias_ = 1.0;
};

inline Configuration sample_stationary(const ModelParams& p, RngStream& rng) {
  return StationarySampler(p).sample(rng);
}

inline Configuration sample_uniform(std::size_t n, RngStream& rng) {
  Bits b(n);
  for (std::size_t k = 0; k < n; ++k) b[k] = rng.uniform_index(2) == 1;
  return Configuration(std::move(b));
}

/// Law of Y_1.
struct InitialLaw {
  enum class Kind { fixed, stationary, all_plus, uniform };

  Kind kind = Kind::all_plus;
  std::optional<Configuration> config;

  static InitialLaw fixed(Configuration c) { return {Kind::fixed, std::move(c)}; }
  static InitialLaw stationary() { return {Kind::stationary, std::nullopt}; }
  static InitialLaw all_plus() { return {Kind::all_plus, std::nullopt}; }
  static InitialLaw uniform() { return {Kind::uniform, std::nullopt}; }
};

inline Configuration draw_initial(const InitialLaw& law, const ModelParams& p, RngStream& rng) {
  switch (law.kind) {
    case InitialLaw::Kind::fixed:
      if (!law.config || law.config->n() != p.n())
        throw ArgumentError("fixed initial configuration missing or of wrong size");
      return *law.config;
    case InitialLaw::Kind::stationary:
      return sample_stationary(p, rng);
    case InitialLaw::Kind::all_plus:
      return Configuration::all_plus(p.n());
    case InitialLaw::Kind::uniform:
      return sample_uniform(p.n(), rng);
  }
  throw ArgumentError("unknown initial law");
}

/// Runs Y_1 ~ law, Y_{k+1} = step(Y_k) for k < steps, calling
/// visit(k, Y_k) for k = 1..steps without storing the path.
template <class Visitor>
void stream_chain(const InitialLaw& law, std::size_t steps, Dynamics kind, const ModelParams& p,
                  RngStream& rng, Visitor&& visit) {
  if (steps < 1) throw ArgumentError("a trajectory needs at least one step");
  Configuration y = draw_initial(law, p, rng);
  visit(std::size_t{1}, static_cast<const Configuration&>(y));
  if (kind == Dynamics::wolff) {
    WolffSampler sampler(p);
    for (std::size_t k = 2; k <= steps; ++k) {
      sampler.step(y, rng);
      visit(k, static_cast<const Configuration&>(y));
    }
  } else {
    GlauberSampler sampler(p);
    for (std::size_t k = 2; k <= steps; ++k) {
      sampler.step(y, rng);
      visit(k, static_cast<const Configuration&>(y));
    }
  }
}

/// Fully stored path Y_1..Y_M; states[0] is Y_1.
struct Trajectory {
  std::vector<Configuration> states;

  std::size_t steps() const { return states.size(); }
  const Configuration& initial() const { return states.front(); }
  const Configuration& operator[](std::size_t k) const { return states[k]; }
};

inline constexpr std::size_t kDefaultTrajectoryBudget = std::size_t{1} << 30;

inline std::size_t trajectory_bytes(std::size_t n, std::size_t steps) {
  const std::size_t per_state = sizeof(Configuration) + ((n + 63) / 64) * 8 + 16;
  return per_state * steps;
}

inline Trajectory run_chain(const InitialLaw& law, std::size_t steps, Dynamics kind, const ModelParams& p,
                            RngStream& rng, std::size_t memory_budget = kDefaultTrajectoryBudget) {
  if (trajectory_bytes(p.n(), steps) > memory_budget)
    throw ResourceError("stored trajectory exceeds the memory budget; use stream_chain");
  Trajectory t;
  t.states.reserve(steps);
  stream_chain(law, steps, kind, p, rng, [&](std::size_t, const Configuration& y) { t.states.push_back(y); });
  return t;
}

/// First index k with Y_k in {-1, +1} for the Wolff chain at J = inf started
/// from Y_1 = initial (1 if already aligned).
inline std::size_t hitting_time_aligned(const Configuration& initial, RngStream& rng) {
  if (initial.is_aligned()) return 1;
  WolffSampler sampler(ModelParams(initial.n(), Coupling::infinite()));
  Configuration y = initial;
  // Each step merges one component into its neighbours, so N+1 steps suffice.
  for (std::size_t k = 2; k <= initial.n() + 2; ++k) {
    sampler.step(y, rng);
    if (y.is_aligned()) return k;
  }
  throw PreconditionError("J = inf chain failed to align; sampler invariant broken");
}

/// Single-pass mean with compensated summation; partials merge associatively.
class RunningMean {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
    ++count_;
  }

  void merge(const RunningMean& o) {
    add_sum(o.sum_);
    add_sum(o.comp_);
    count_ += o.count_;
  }

  std::size_t count() const { return count_; }
  double mean() const { return count_ == 0 ? 0.0 : (sum_ + comp_) / static_cast<double>(count_); }

 private:
  void add_sum(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }

  double sum_ = 0.0;
  double comp_ = 0.0;
  std::size_t count_ = 0;
};

/// (1/M) sum_k f(Y_k) over a stored trajectory.
template <class F>
double ergodic_average(F&& f, const Trajectory& t) {
  RunningMean acc;
  for (const auto& y : t.states) acc.add(f(y));
  return acc.mean();
}

/// Streaming variant: folds f along a fresh chain without storing it.
template <class F>
double ergodic_average(F&& f, const InitialLaw& law, std::size_t steps, Dynamics kind, const ModelParams& p,
                       RngStream& rng) {
  RunningMean acc;
  stream_chain(law, steps, kind, p, rng, [&](std::size_t, const Configuration& y) { acc.add(f(y)); });
  return acc.mean();
}

}  // namespace ising
