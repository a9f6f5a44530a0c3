#pragma once

// Exact finite-N quantities of the periodic 1D Ising chain with Gibbs weight
// exp(J * sum_i s_i s_{i+1}), where J is the dimensionless coupling beta*J.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ising/configuration.hpp"
#include "ising/errors.hpp"

namespace ising {

/// Largest N for which exhaustive sums over {-1,+1}^N are allowed.
inline constexpr std::size_t kMaxExactSites = 20;

/// Coupling constant J >= 0, or the distinguished critical value J = inf.
///
/// The infinite value is a flag rather than a floating-point infinity so that
/// kappa = 1 and kappa_hat = 0 come out exactly and every Gibbs-measure
/// operation can reject it explicitly.
class Coupling {
 public:
  constexpr Coupling() = default;

  explicit Coupling(double value) : value_(value) {
    if (!std::isfinite(value) || value < 0.0)
      throw ArgumentError("coupling must be a finite nonnegative number or 'inf'");
  }

  static constexpr Coupling infinite() {
    Coupling c;
    c.infinite_ = true;
    return c;
  }

  /// Accepts a decimal number or the exact sentinel "inf".
  static Coupling parse(std::string_view text) {
    if (text == "inf") return infinite();
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v))
      throw ArgumentError("invalid coupling '" + std::string(text) + "' (use a number or 'inf')");
    return Coupling(v);
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_zero() const { return !infinite_ && value_ == 0.0; }

  /// Finite value; throws DomainError at the critical point.
  double value() const {
    if (infinite_) throw DomainError("operation undefined at J = inf");
    return value_;
  }

  std::string to_string() const;

  friend bool operator==(const Coupling& a, const Coupling& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string Coupling::to_string() const {
  return infinite_ ? std::string("inf") : format_double(value_);
}

/// N >= 2 sites on a ring plus the coupling. For N = 2 the bonds (1,2) and
/// (2,1) are distinct ring edges, so every pair interaction is counted twice;
/// results at N = 2 are kept for completeness but are not physical.
class ModelParams {
 public:
  ModelParams(std::size_t n, Coupling j_hat) : n_(n), j_hat_(j_hat) {
    if (n < 2) throw ArgumentError("the ring needs at least 2 sites");
  }
  ModelParams(std::size_t n, double j_hat) : ModelParams(n, Coupling(j_hat)) {}

  std::size_t n() const { return n_; }
  Coupling j_hat() const { return j_hat_; }

 private:
  std::size_t n_;
  Coupling j_hat_;
};

struct DerivedConstants {
  double kappa = 0.0;       // 1 - exp(-2J), the bond-activation probability
  double kappa_hat = 1.0;   // exp(-2J)
  double lambda_plus = 2.0;  // transfer-matrix eigenvalues exp(J) +- exp(-J)
  double lambda_minus = 0.0;
  double theta = 0.0;  // lambda_minus / lambda_plus = tanh(J)
  double xi = 0.0;     // correlation length -1/log(theta)
  std::optional<double> z_n;  // partition function; empty at J = inf

  static DerivedConstants compute(const ModelParams& p) {
    DerivedConstants d;
    const Coupling j = p.j_hat();
    if (j.is_infinite()) {
      d.kappa = 1.0;
      d.kappa_hat = 0.0;
      d.lambda_plus = std::numeric_limits<double>::infinity();
      d.lambda_minus = std::numeric_limits<double>::infinity();
      d.theta = 1.0;
      d.xi = std::numeric_limits<double>::infinity();
      return d;
    }
    const double jv = j.value();
    d.kappa_hat = std::exp(-2.0 * jv);
    d.kappa = 1.0 - d.kappa_hat;
    d.lambda_plus = std::exp(jv) + std::exp(-jv);
    d.lambda_minus = std::exp(jv) - std::exp(-jv);
    d.theta = std::tanh(jv);
    d.xi = jv == 0.0 ? 0.0 : -1.0 / std::log(d.theta);
    const auto nn = static_cast<double>(p.n());
    d.z_n = std::pow(d.lambda_plus, nn) + std::pow(d.lambda_minus, nn);
    return d;
  }
};

/// sum_i s_i s_{i+1} with s_{N+1} = s_1.
inline long bond_sum(const Configuration& c) {
  const std::size_t n = c.n();
  long s = 0;
  for (std::size_t k = 0; k < n; ++k) s += c[k] * c[(k + 1) % n];
  return s;
}

/// bond_sum for the configuration with the given state index (N <= 64):
/// N minus twice the number of frustrated bonds.
inline long bond_sum_of_index(std::size_t n, std::uint64_t idx) {
  const std::uint64_t mask = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  const std::uint64_t next = ((idx >> 1) | (idx << (n - 1))) & mask;
  return static_cast<long>(n) - 2 * static_cast<long>(std::popcount(idx ^ next));
}

/// -sum_i s_i s_{i+1}, in units where J multiplies the sum.
inline double hamiltonian(const Configuration& c, const ModelParams& p) {
  if (c.n() != p.n()) throw ArgumentError("configuration size does not match model");
  return -static_cast<double>(bond_sum(c));
}

/// Transfer-matrix value lambda_+^N + lambda_-^N.
inline double partition_function(const ModelParams& p) {
  if (p.j_hat().is_infinite()) throw DomainError("partition function diverges at J = inf");
  return *DerivedConstants::compute(p).z_n;
}

/// Direct sum of exp(J * bond_sum) over all 2^N configurations.
inline double partition_function_brute(const ModelParams& p) {
  if (p.n() > kMaxExactSites) throw ResourceError("brute-force partition function limited to N <= 20");
  const double j = p.j_hat().value();
  const std::uint64_t count = std::uint64_t{1} << p.n();
  double z = 0.0;
  for (std::uint64_t idx = 0; idx < count; ++idx)
    z += std::exp(j * static_cast<double>(bond_sum_of_index(p.n(), idx)));
  return z;
}

inline double gibbs_probability(const Configuration& c, const ModelParams& p) {
  if (c.n() != p.n()) throw ArgumentError("configuration size does not match model");
  const double j = p.j_hat().value();
  return std::exp(j * static_cast<double>(bond_sum(c))) / partition_function(p);
}

/// The exact Gibbs measure as a 2^N vector in state-index order.
class GibbsMeasure {
 public:
  explicit GibbsMeasure(const ModelParams& p) : params_(p) {
    if (p.j_hat().is_infinite()) throw DomainError("Gibbs measure undefined at J = inf");
    if (p.n() > kMaxExactSites) throw ResourceError("exact Gibbs measure limited to N <= 20");
    const double j = p.j_hat().value();
    const double z = partition_function(p);
    const std::uint64_t count = std::uint64_t{1} << p.n();
    probs_.resize(count);
    // Energies only take N+1 distinct values; cache the weights.
    std::vector<double> weight(2 * p.n() + 1);
    for (std::size_t e = 0; e < weight.size(); ++e)
      weight[e] = std::exp(j * (static_cast<double>(e) - static_cast<double>(p.n()))) / z;
    for (std::uint64_t idx = 0; idx < count; ++idx) {
      const long b = bond_sum_of_index(p.n(), idx);
      probs_[idx] = weight[static_cast<std::size_t>(b + static_cast<long>(p.n()))];
    }
  }

  const ModelParams& params() const { return params_; }
  std::size_t n() const { return params_.n(); }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t idx) const { return probs_[idx]; }
  const std::vector<double>& probabilities() const { return probs_; }

 private:
  ModelParams params_;
  std::vector<double> probs_;
};

/// E[s_i s_j] = (theta^{|j-i|} + theta^{N-|j-i|}) / (1 + theta^N), sites 1-based.
inline double two_point_correlation(std::size_t i, std::size_t j, const ModelParams& p) {
  const std::size_t n = p.n();
  if (i < 1 || i > n || j < 1 || j > n) throw ArgumentError("site out of range");
  if (p.j_hat().is_infinite()) throw DomainError("correlations undefined at J = inf");
  const double theta = DerivedConstants::compute(p).theta;
  const std::size_t d = i > j ? i - j : j - i;
  const double num = std::pow(theta, static_cast<double>(d)) + std::pow(theta, static_cast<double>(n - d));
  return num / (1.0 + std::pow(theta, static_cast<double>(n)));
}

inline double susceptibility_row_sum(std::size_t i, const ModelParams& p) {
  double s = 0.0;
  for (std::size_t j = 1; j <= p.n(); ++j) s += two_point_correlation(i, j, p);
  return s;
}

/// Closed form 1 + (2 lambda_+ / (lambda_+ - lambda_-)) (theta - theta^N) / (1 + theta^N).
/// The row sum attains it (up to rounding); it is itself bounded by exp(2J).
inline double susceptibility_closed_form(const ModelParams& p) {
  if (p.j_hat().is_infinite()) throw DomainError("susceptibility undefined at J = inf");
  const auto d = DerivedConstants::compute(p);
  const double thn = std::pow(d.theta, static_cast<double>(p.n()));
  return 1.0 + (2.0 * d.lambda_plus / (d.lambda_plus - d.lambda_minus)) * (d.theta - thn) / (1.0 + thn);
}

}  // namespace ising
