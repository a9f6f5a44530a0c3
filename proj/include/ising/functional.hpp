#pragma once

// Functionals on L^2(mu) over {-1,+1}^N: Dirichlet forms, entropy, variance,
// the explicit log-Sobolev and Poincare constants of the Wolff chain,
// inequality certification, and ergodic-average error bounds.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ising/errors.hpp"
#include "ising/kernel.hpp"
#include "ising/model.hpp"
#include "ising/rng.hpp"

namespace ising {

/// Real function on states, indexed by state index.
using StateFunction = Eigen::VectorXd;

namespace detail {

inline void check_sizes(const StateFunction& f, const GibbsMeasure& mu) {
  if (static_cast<std::size_t>(f.size()) != mu.size()) throw ArgumentError("function and measure sizes differ");
}

inline Eigen::Map<const Eigen::VectorXd> as_vector(const GibbsMeasure& mu) {
  return {mu.probabilities().data(), static_cast<Eigen::Index>(mu.size())};
}

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace detail

inline double expectation(const StateFunction& f, const GibbsMeasure& mu) {
  detail::check_sizes(f, mu);
  return detail::as_vector(mu).dot(f);
}

inline double variance(const StateFunction& f, const GibbsMeasure& mu) {
  const double m = expectation(f, mu);
  return std::max(0.0, detail::as_vector(mu).dot((f.array() - m).square().matrix()));
}

inline double l2_norm(const StateFunction& f, const GibbsMeasure& mu) {
  detail::check_sizes(f, mu);
  return std::sqrt(detail::as_vector(mu).dot(f.cwiseProduct(f)));
}

/// Ent(f) = E[f log f] - E[f] log E[f] for f >= 0, with 0 log 0 = 0.
inline double entropy(const StateFunction& f, const GibbsMeasure& mu) {
  detail::check_sizes(f, mu);
  if ((f.array() < 0.0).any()) throw ArgumentError("entropy requires a nonnegative function");
  double e_flogf = 0.0;
  for (Eigen::Index x = 0; x < f.size(); ++x) e_flogf += mu[static_cast<std::size_t>(x)] * detail::xlogx(f(x));
  return std::max(0.0, e_flogf - detail::xlogx(expectation(f, mu)));
}

/// (1/2) sum_{x,y} (f(x) - f(y))^2 P(x,y) mu(x).
inline double dirichlet_form(const StateFunction& f, const TransitionKernel& k, const GibbsMeasure& mu) {
  detail::check_sizes(f, mu);
  if (k.size() != mu.size()) throw ArgumentError("kernel and measure sizes differ");
  const auto& p = k.matrix();
  double s = 0.0;
  for (Eigen::Index x = 0; x < p.rows(); ++x) {
    double row = 0.0;
    for (Eigen::Index y = 0; y < p.cols(); ++y) {
      const double d = f(x) - f(y);
      row += d * d * p(x, y);
    }
    s += mu[static_cast<std::size_t>(x)] * row;
  }
  return 0.5 * s;
}

/// <f, (I - P) f>_mu.
inline double dirichlet_form_quadratic(const StateFunction& f, const TransitionKernel& k, const GibbsMeasure& mu) {
  detail::check_sizes(f, mu);
  const StateFunction pf = k.matrix() * f;
  return detail::as_vector(mu).dot(f.cwiseProduct(f - pf));
}

/// e^{2J} (e^{4J} + 1) (1/2 + J e^{(e^{2J} - 1)/2}) N.
inline double lsi_constant_bound(double j_hat, std::size_t n) {
  if (!std::isfinite(j_hat) || j_hat < 0.0) throw DomainError("log-Sobolev constant needs finite J >= 0");
  const double e2 = std::exp(2.0 * j_hat);
  return e2 * (std::exp(4.0 * j_hat) + 1.0) * (0.5 + j_hat * std::exp((e2 - 1.0) / 2.0)) * static_cast<double>(n);
}

inline double lsi_constant_bound(const ModelParams& p) { return lsi_constant_bound(p.j_hat().value(), p.n()); }

inline double poincare_constant_bound(double j_hat, std::size_t n) { return lsi_constant_bound(j_hat, n) / 2.0; }

inline double poincare_constant_bound(const ModelParams& p) { return lsi_constant_bound(p) / 2.0; }

struct InequalityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;
  double slack = 0.0;
  bool pass = true;

  static InequalityReport make(double lhs, double rhs, double constant) {
    const double slack = rhs - lhs;
    return {lhs, rhs, constant, slack, slack >= -1e-10};
  }
};

/// Ent(f^2) <= constant * E(f).
inline InequalityReport certify_lsi(const StateFunction& f, const TransitionKernel& k, const GibbsMeasure& mu,
                                    double constant) {
  const StateFunction sq = f.cwiseProduct(f);
  return InequalityReport::make(entropy(sq, mu), constant * dirichlet_form(f, k, mu), constant);
}

/// Var(f) <= constant * E(f).
inline InequalityReport certify_poincare(const StateFunction& f, const TransitionKernel& k, const GibbsMeasure& mu,
                                         double constant) {
  return InequalityReport::make(variance(f, mu), constant * dirichlet_form(f, k, mu), constant);
}

struct ErgodicBounds {
  double averaged_operator = 0.0;  // || (1/M) sum_k P^k f - E f ||
  double trajectory_mse = 0.0;     // E[((1/M) sum_k f(Y_k) - E f)^2], stationary start
};

inline ErgodicBounds ergodic_l2_bound(double j_hat, std::size_t n, std::size_t m, double f_norm) {
  if (m < 1) throw ArgumentError("M must be at least 1");
  const double mm = static_cast<double>(m);
  return {f_norm / mm * (2.0 + poincare_constant_bound(j_hat, n)),
          f_norm * f_norm / mm * lsi_constant_bound(j_hat, n)};
}

struct GeometricSums {
  double c = 0.0;      // sum_{k=1}^M x^k
  double c_hat = 0.0;  // 1 + (2/M) sum_{d=1}^{M-1} (M - d) x^d
};

inline GeometricSums geometric_sum_helpers(std::size_t m, double x) {
  if (m < 1) throw ArgumentError("M must be at least 1");
  if (x == 1.0) throw DomainError("geometric sums are evaluated for x in [-1, 1)");
  if (!(x >= -1.0 && x < 1.0)) throw ArgumentError("x must lie in [-1, 1)");
  const double mm = static_cast<double>(m);
  const double xm = std::pow(x, mm);
  const double one_minus = 1.0 - x;
  GeometricSums g;
  g.c = x * (1.0 - xm) / one_minus;
  g.c_hat = 1.0 + (2.0 / mm) * (x * (mm - 1.0) - x * x * mm + x * xm) / (one_minus * one_minus);
  return g;
}

/// Exact || (1/M) sum_k P^k f - E f || from the spectral decomposition.
inline double exact_averaged_error(const SpectralDecomposition& d, const StateFunction& f, std::size_t m) {
  const Eigen::Map<const Eigen::VectorXd> w(d.measure.data(), static_cast<Eigen::Index>(d.measure.size()));
  const StateFunction wf = f.cwiseProduct(w);
  double s = 0.0;
  for (std::size_t j = 1; j < d.eigenvalues.size(); ++j) {
    const double c = d.basis.col(static_cast<Eigen::Index>(j)).dot(wf);
    const double g = d.eigenvalues[j] < 1.0 ? geometric_sum_helpers(m, d.eigenvalues[j]).c / static_cast<double>(m) : 1.0;
    s += g * g * c * c;
  }
  return std::sqrt(s);
}

/// Exact stationary-start mean squared error of the ergodic average:
/// (1/M) sum_{j>=2} C_hat(M, lambda_j) <f, xi_j>^2.
inline double exact_trajectory_mse(const SpectralDecomposition& d, const StateFunction& f, std::size_t m) {
  const Eigen::Map<const Eigen::VectorXd> w(d.measure.data(), static_cast<Eigen::Index>(d.measure.size()));
  const StateFunction wf = f.cwiseProduct(w);
  double s = 0.0;
  for (std::size_t j = 1; j < d.eigenvalues.size(); ++j) {
    const double c = d.basis.col(static_cast<Eigen::Index>(j)).dot(wf);
    const double lam = std::min(d.eigenvalues[j], 1.0 - 1e-15);
    s += geometric_sum_helpers(m, std::max(lam, -1.0)).c_hat * c * c;
  }
  return s / static_cast<double>(m);
}

// Test-function families.

enum class TestFamily { gaussian, character, indicator, eigenfunction, abs_eigenfunction, constant, adversarial };

inline std::string_view to_string(TestFamily f) {
  switch (f) {
    case TestFamily::gaussian: return "gaussian";
    case TestFamily::character: return "character";
    case TestFamily::indicator: return "indicator";
    case TestFamily::eigenfunction: return "eigenfunction";
    case TestFamily::abs_eigenfunction: return "abs_eigenfunction";
    case TestFamily::constant: return "constant";
    case TestFamily::adversarial: return "adversarial";
  }
  return "unknown";
}

inline StateFunction gaussian_function(std::size_t size, RngStream& rng) {
  StateFunction f(static_cast<Eigen::Index>(size));
  for (Eigen::Index x = 0; x < f.size(); ++x) f(x) = rng.normal();
  return f;
}

/// prod_{k in S} s_k for the site subset with bitmask `subset`.
inline StateFunction character_function(std::size_t n, std::uint64_t subset) {
  const std::size_t size = std::size_t{1} << n;
  StateFunction f(static_cast<Eigen::Index>(size));
  for (std::size_t x = 0; x < size; ++x) {
    // bit 1 is +1, so the sign is (-1)^{#minus sites in S}
    const auto minus = static_cast<unsigned>(std::popcount(~x & subset));
    f(static_cast<Eigen::Index>(x)) = (minus % 2U) ? -1.0 : 1.0;
  }
  return f;
}

inline StateFunction indicator_function(std::size_t size, std::size_t state) {
  StateFunction f = StateFunction::Zero(static_cast<Eigen::Index>(size));
  f(static_cast<Eigen::Index>(state)) = 1.0;
  return f;
}

struct LabeledFunction {
  TestFamily family;
  StateFunction values;
};

/// Characters of every site subset up to size 2, all indicators, the first
/// few eigenfunctions and their absolute values, and a constant.
inline std::vector<LabeledFunction> structured_functions(std::size_t n, const SpectralDecomposition& d,
                                                         std::size_t eigen_count = 4) {
  const std::size_t size = std::size_t{1} << n;
  std::vector<LabeledFunction> out;
  out.push_back({TestFamily::constant, StateFunction::Constant(static_cast<Eigen::Index>(size), 1.0)});
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({TestFamily::character, character_function(n, std::uint64_t{1} << i)});
    for (std::size_t j = i + 1; j < n; ++j)
      out.push_back({TestFamily::character, character_function(n, (std::uint64_t{1} << i) | (std::uint64_t{1} << j))});
  }
  out.push_back({TestFamily::character, character_function(n, size - 1)});
  for (std::size_t x = 0; x < size; ++x) out.push_back({TestFamily::indicator, indicator_function(size, x)});
  for (std::size_t j = 1; j < std::min(d.eigenvalues.size(), eigen_count + 1); ++j) {
    const StateFunction xi = d.basis.col(static_cast<Eigen::Index>(j));
    out.push_back({TestFamily::eigenfunction, xi});
    out.push_back({TestFamily::abs_eigenfunction, xi.cwiseAbs()});
  }
  return out;
}

enum class InequalityKind { log_sobolev, poincare };

/// Local search for f maximizing lhs(f) / E(f), where lhs is Ent(f^2) or
/// Var(f). Coordinate ascent with multiplicative step sizes from random
/// Gaussian starts; each coordinate move is evaluated in O(row support).
class RatioAdversary {
 public:
  RatioAdversary(const TransitionKernel& k, const GibbsMeasure& mu, InequalityKind kind)
      : kind_(kind), mu_(mu.probabilities()), rows_(k.size()) {
    if (k.size() != mu.size()) throw ArgumentError("kernel and measure sizes differ");
    for (std::size_t x = 0; x < k.size(); ++x)
      for (std::size_t y = 0; y < k.size(); ++y)
        if (y != x && k(x, y) > 0.0) rows_[x].push_back({y, mu_[x] * k(x, y)});
  }

  struct Result {
    StateFunction f;
    double ratio = 0.0;
  };

  Result search(RngStream& rng, std::size_t restarts = 100, std::size_t sweeps = 30) const {
    Result best;
    best.ratio = -1.0;
    for (std::size_t r = 0; r < restarts; ++r) {
      StateFunction f = gaussian_function(mu_.size(), rng);
      const double ratio = ascend(f, sweeps);
      if (ratio > best.ratio) best = {std::move(f), ratio};
    }
    return best;
  }

 private:
  struct Edge {
    std::size_t to;
    double weight;  // mu(x) P(x, y)
  };

  struct Sums {
    double a = 0.0;  // E[f^2]
    double b = 0.0;  // E[f^2 log f^2] or E[f]
    double e = 0.0;  // Dirichlet form
  };

  double lhs(const Sums& s) const {
    if (kind_ == InequalityKind::log_sobolev) return s.b - detail::xlogx(s.a);
    return s.a - s.b * s.b;
  }

  double ratio(const Sums& s) const { return s.e > 1e-300 ? lhs(s) / s.e : 0.0; }

  double b_term(double v) const { return kind_ == InequalityKind::log_sobolev ? detail::xlogx(v * v) : v; }

  Sums totals(const StateFunction& f) const {
    Sums s;
    for (std::size_t x = 0; x < mu_.size(); ++x) {
      const double v = f(static_cast<Eigen::Index>(x));
      s.a += mu_[x] * v * v;
      s.b += mu_[x] * b_term(v);
      for (const Edge& ed : rows_[x]) {
        const double d = v - f(static_cast<Eigen::Index>(ed.to));
        s.e += 0.5 * ed.weight * d * d;
      }
    }
    return s;
  }

  Sums moved(const StateFunction& f, const Sums& s, std::size_t x, double nv) const {
    const double ov = f(static_cast<Eigen::Index>(x));
    Sums t = s;
    t.a += mu_[x] * (nv * nv - ov * ov);
    t.b += mu_[x] * (b_term(nv) - b_term(ov));
    for (const Edge& ed : rows_[x]) {
      const double fy = f(static_cast<Eigen::Index>(ed.to));
      // Reversibility makes the (x,y) and (y,x) terms equal.
      t.e += ed.weight * ((nv - fy) * (nv - fy) - (ov - fy) * (ov - fy));
    }
    return t;
  }

  double ascend(StateFunction& f, std::size_t sweeps) const {
    Sums s = totals(f);
    double step = 0.5;
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
      bool improved = false;
      for (std::size_t x = 0; x < mu_.size(); ++x) {
        const double ov = f(static_cast<Eigen::Index>(x));
        const double scale = std::max(std::abs(ov), 1e-3);
        for (double delta : {step * scale, -step * scale}) {
          const Sums t = moved(f, s, x, ov + delta);
          if (ratio(t) > ratio(s) * (1.0 + 1e-12)) {
            f(static_cast<Eigen::Index>(x)) = ov + delta;
            s = t;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
      if (step < 1e-6) break;
    }
    s = totals(f);
    return ratio(s);
  }

  InequalityKind kind_;
  std::vector<double> mu_;
  std::vector<std::vector<Edge>> rows_;
};

struct InequalityRow {
  std::size_t n = 0;
  Coupling j_hat;
  TestFamily family = TestFamily::gaussian;
  InequalityReport report;
};

inline void write_inequality_csv(std::ostream& os, const std::vector<InequalityRow>& rows) {
  os << "n,j_hat,family,lhs,rhs,slack,pass\n";
  for (const auto& r : rows)
    os << r.n << ',' << r.j_hat.to_string() << ',' << to_string(r.family) << ',' << format_double(r.report.lhs) << ','
       << format_double(r.report.rhs) << ',' << format_double(r.report.slack) << ',' << (r.report.pass ? 1 : 0)
       << '\n';
}

}  // namespace ising
