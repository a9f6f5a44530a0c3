#pragma once

// Dense 2^N x 2^N transition kernels of the Wolff and Glauber chains in
// state-index order, closed-form entries, reversibility checks and spectra.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "ising/cluster.hpp"
#include "ising/configuration.hpp"
#include "ising/dynamics.hpp"
#include "ising/errors.hpp"
#include "ising/model.hpp"
#include "ising/parallel.hpp"
#include "ising/rng.hpp"

namespace ising {

/// Largest N for which a dense kernel (4^N doubles) is built.
inline constexpr std::size_t kMaxKernelSites = 14;

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class TransitionKernel {
 public:
  TransitionKernel(Dynamics kind, ModelParams params, DenseMatrix entries)
      : kind_(kind), params_(params), p_(std::move(entries)) {
    const auto size = std::size_t{1} << params_.n();
    if (static_cast<std::size_t>(p_.rows()) != size || static_cast<std::size_t>(p_.cols()) != size)
      throw ArgumentError("kernel matrix must be 2^N x 2^N");
  }

  Dynamics dynamics() const { return kind_; }
  const ModelParams& params() const { return params_; }
  std::size_t n() const { return params_.n(); }
  std::size_t size() const { return static_cast<std::size_t>(p_.rows()); }

  double operator()(std::size_t from, std::size_t to) const {
    return p_(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
  }
  const DenseMatrix& matrix() const { return p_; }
  DenseMatrix& mutable_matrix() { return p_; }

  double max_row_sum_error() const { return ((p_.rowwise().sum()).array() - 1.0).abs().maxCoeff(); }
  double min_entry() const { return p_.minCoeff(); }
  double max_diagonal() const { return p_.diagonal().maxCoeff(); }

  std::size_t nonzero_count() const { return static_cast<std::size_t>((p_.array() != 0.0).count()); }

 private:
  Dynamics kind_;
  ModelParams params_;
  DenseMatrix p_;
};

namespace detail {

/// (a/N) kappa^{a-1} kappa_hat^e: the probability of flipping a connected,
/// aligned, proper set of size a with e aligned boundary bonds.
inline double wolff_weight(std::size_t a, std::size_t n, int e, const DerivedConstants& d) {
  return (static_cast<double>(a) / static_cast<double>(n)) * std::pow(d.kappa, static_cast<double>(a - 1)) *
         std::pow(d.kappa_hat, static_cast<double>(e));
}

/// (N kappa_hat + kappa) kappa^{N-1}: the full flip from an aligned state.
inline double wolff_full_flip(std::size_t n, const DerivedConstants& d) {
  return (static_cast<double>(n) * d.kappa_hat + d.kappa) * std::pow(d.kappa, static_cast<double>(n - 1));
}

inline void check_flipset(const Configuration& sigma, const FlipSet& a) {
  if (a.n() != sigma.n()) throw ArgumentError("flip set size does not match configuration");
  if (a.is_empty()) throw ArgumentError("flip set must be nonempty");
}

inline std::uint64_t arc_mask(std::size_t start0, std::size_t len, std::size_t n) {
  const std::uint64_t full = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  const std::uint64_t run = len >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << len) - 1;
  const std::uint64_t lo = (run << start0) & full;
  const std::uint64_t hi = start0 == 0 ? 0 : (run >> (n - start0));
  return (lo | hi) & full;
}

}  // namespace detail

/// Wolff transition probability P(sigma, sigma^A), edge-boundary form.
inline double wolff_entry(const Configuration& sigma, const FlipSet& a, const ModelParams& p) {
  detail::check_flipset(sigma, a);
  if (sigma.n() != p.n()) throw ArgumentError("configuration size does not match model");
  const std::size_t n = p.n();
  if (p.j_hat().is_zero()) return a.size() == 1 ? 1.0 / static_cast<double>(n) : 0.0;
  const auto d = DerivedConstants::compute(p);
  if (!is_aligned_on(sigma, a)) return 0.0;
  if (a.is_full()) return sigma.is_aligned() ? detail::wolff_full_flip(n, d) : 0.0;
  const RingGraph g(n);
  if (!is_connected(a, g)) return 0.0;
  int aligned_boundary = 0;
  for (const Bond& b : edge_boundary(a, g))
    if (sigma[b.first - 1] == sigma[b.second - 1]) ++aligned_boundary;
  return detail::wolff_weight(a.size(), n, aligned_boundary, d);
}

/// Same probability, computed from the position of A inside its component.
inline double wolff_entry_by_components(const Configuration& sigma, const FlipSet& a, const ModelParams& p) {
  detail::check_flipset(sigma, a);
  if (sigma.n() != p.n()) throw ArgumentError("configuration size does not match model");
  const std::size_t n = p.n();
  if (p.j_hat().is_zero()) return a.size() == 1 ? 1.0 / static_cast<double>(n) : 0.0;
  const auto d = DerivedConstants::compute(p);
  const auto arc = a.arc();
  if (!arc || !is_aligned_on(sigma, a)) return 0.0;
  const std::size_t size = a.size();
  if (sigma.is_aligned()) return size == n ? detail::wolff_full_flip(n, d) : detail::wolff_weight(size, n, 2, d);

  const auto parts = decompose(sigma);
  const auto& comps = sigma.spin(arc->start) == 1 ? parts.plus_components : parts.minus_components;
  for (const Arc& k : comps) {
    const std::size_t offset = (arc->start + n - k.start) % n;
    if (offset >= k.length) continue;
    const bool has_first = offset == 0;
    const bool has_last = offset + size == k.length;
    if (k.length == 1) return detail::wolff_weight(size, n, 0, d);
    if (has_first && has_last) return detail::wolff_weight(size, n, 0, d);
    if (has_first || has_last) return detail::wolff_weight(size, n, 1, d);
    return detail::wolff_weight(size, n, 2, d);
  }
  return 0.0;
}

/// Heat-bath flip probability P(sigma, sigma^i), site 1-based:
/// (1/N) exp(-J s_i h) / (exp(J h) + exp(-J h)) with h = s_{i-1} + s_{i+1},
/// evaluated in overflow-free form.
inline double glauber_entry(const Configuration& sigma, std::size_t site, const ModelParams& p) {
  if (sigma.n() != p.n()) throw ArgumentError("configuration size does not match model");
  const std::size_t n = p.n();
  if (site < 1 || site > n) throw ArgumentError("site out of range");
  const double j = p.j_hat().value();
  const std::size_t k = site - 1;
  const int h = sigma[(k + n - 1) % n] + sigma[(k + 1) % n];
  const int x = sigma[k] * h;
  const double inv_n = 1.0 / static_cast<double>(n);
  if (h == 0) return inv_n * 0.5;
  return x > 0 ? inv_n / (std::exp(4.0 * j) + 1.0) : inv_n / (1.0 + std::exp(-4.0 * j));
}

/// Same probability by the position of i in its component: isolated site,
/// interior site, boundary site, or any site of an aligned state.
inline double glauber_entry_by_cases(const Configuration& sigma, std::size_t site, const ModelParams& p) {
  if (sigma.n() != p.n()) throw ArgumentError("configuration size does not match model");
  const std::size_t n = p.n();
  if (site < 1 || site > n) throw ArgumentError("site out of range");
  const double j = p.j_hat().value();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double favoured = 1.0 / (1.0 + std::exp(-4.0 * j));
  const double suppressed = 1.0 / (std::exp(4.0 * j) + 1.0);
  if (sigma.is_aligned()) return inv_n * suppressed;
  const std::size_t k = site - 1;
  const bool same_left = sigma[(k + n - 1) % n] == sigma[k];
  const bool same_right = sigma[(k + 1) % n] == sigma[k];
  if (!same_left && !same_right) return inv_n * favoured;
  if (same_left && same_right) return inv_n * suppressed;
  return inv_n * 0.5;
}

inline TransitionKernel build_wolff_kernel(const ModelParams& p, std::size_t threads = 1) {
  const std::size_t n = p.n();
  if (n > kMaxKernelSites) throw ResourceError("dense kernels are limited to N <= 14");
  const std::size_t size = std::size_t{1} << n;
  const auto d = DerivedConstants::compute(p);
  const bool zero = p.j_hat().is_zero();
  const std::uint64_t all = size - 1;
  DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  parallel_for(size, threads, [&](std::size_t x) {
    auto row = m.row(static_cast<Eigen::Index>(x));
    auto put = [&](std::uint64_t mask, double v) { row(static_cast<Eigen::Index>(x ^ mask)) += v; };
    if (zero) {
      for (std::size_t k = 0; k < n; ++k) put(std::uint64_t{1} << k, 1.0 / static_cast<double>(n));
      return;
    }
    if (x == 0 || x == all) {
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t len = 1; len < n; ++len) put(detail::arc_mask(s, len, n), detail::wolff_weight(len, n, 2, d));
      put(all, detail::wolff_full_flip(n, d));
      return;
    }
    const auto parts = decompose(Configuration::from_index(n, x));
    auto visit = [&](const std::vector<Arc>& comps) {
      for (const Arc& k : comps) {
        for (std::size_t off = 0; off < k.length; ++off) {
          for (std::size_t len = 1; off + len <= k.length; ++len) {
            const int e = (off > 0 ? 1 : 0) + (off + len < k.length ? 1 : 0);
            put(detail::arc_mask((k.start - 1 + off) % n, len, n), detail::wolff_weight(len, n, e, d));
          }
        }
      }
    };
    visit(parts.plus_components);
    visit(parts.minus_components);
  });
  return TransitionKernel(Dynamics::wolff, p, std::move(m));
}

inline TransitionKernel build_glauber_kernel(const ModelParams& p, std::size_t threads = 1) {
  const std::size_t n = p.n();
  if (p.j_hat().is_infinite()) throw DomainError("Glauber dynamics is degenerate at J = inf");
  if (n > kMaxKernelSites) throw ResourceError("dense kernels are limited to N <= 14");
  const std::size_t size = std::size_t{1} << n;
  DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  parallel_for(size, threads, [&](std::size_t x) {
    const auto sigma = Configuration::from_index(n, x);
    const auto r = static_cast<Eigen::Index>(x);
    double stay = 1.0;
    for (std::size_t site = 1; site <= n; ++site) {
      const double v = glauber_entry(sigma, site, p);
      m(r, static_cast<Eigen::Index>(x ^ (std::size_t{1} << (site - 1)))) += v;
      stay -= v;
    }
    m(r, r) += stay;
  });
  return TransitionKernel(Dynamics::glauber, p, std::move(m));
}

inline TransitionKernel build_kernel(Dynamics kind, const ModelParams& p, std::size_t threads = 1) {
  return kind == Dynamics::wolff ? build_wolff_kernel(p, threads) : build_glauber_kernel(p, threads);
}

/// max over pairs of |mu(x) P(x,y) - mu(y) P(y,x)|.
inline double check_detailed_balance(const TransitionKernel& k, const GibbsMeasure& mu) {
  if (k.size() != mu.size()) throw ArgumentError("kernel and measure sizes differ");
  const auto& m = k.matrix();
  double worst = 0.0;
  for (Eigen::Index x = 0; x < m.rows(); ++x)
    for (Eigen::Index y = x + 1; y < m.cols(); ++y)
      worst = std::max(worst, std::abs(mu[static_cast<std::size_t>(x)] * m(x, y) -
                                       mu[static_cast<std::size_t>(y)] * m(y, x)));
  return worst;
}

/// max_y |(mu P)(y) - mu(y)|.
inline double stationarity_violation(const TransitionKernel& k, const GibbsMeasure& mu) {
  if (k.size() != mu.size()) throw ArgumentError("kernel and measure sizes differ");
  const Eigen::Map<const Eigen::RowVectorXd> v(mu.probabilities().data(), static_cast<Eigen::Index>(mu.size()));
  const Eigen::RowVectorXd moved = v * k.matrix();
  return (moved - v).cwiseAbs().maxCoeff();
}

struct ComparisonReport {
  double max_ratio = 0.0;  // max of P_GD(s, s^i) / ((1/2) e^{2J} P_W(s, s^i))
  std::size_t checked = 0;
  bool pass(double rel_tol = 1e-12) const { return max_ratio <= 1.0 + rel_tol; }
};

/// Single-flip comparison P_GD <= (1/2) e^{2J} P_W over all states and sites.
inline ComparisonReport compare_glauber_wolff(const ModelParams& p) {
  const std::size_t n = p.n();
  if (n > kMaxExactSites) throw ResourceError("comparison sweep limited to N <= 20");
  const double factor = 0.5 * std::exp(2.0 * p.j_hat().value());
  ComparisonReport r;
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t x = 0; x < count; ++x) {
    const auto sigma = Configuration::from_index(n, x);
    for (std::size_t site = 1; site <= n; ++site) {
      const double gd = glauber_entry(sigma, site, p);
      const double w = wolff_entry(sigma, FlipSet::from_sites(n, {site}), p);
      r.max_ratio = std::max(r.max_ratio, w > 0.0 ? gd / (factor * w) : std::numeric_limits<double>::infinity());
      ++r.checked;
    }
  }
  return r;
}

/// Eigenpairs of a reversible kernel, lambda_1 >= lambda_2 >= ...; column j
/// of `basis` is xi_j, orthonormal in L^2(mu).
struct SpectralDecomposition {
  std::vector<double> eigenvalues;
  Eigen::MatrixXd basis;
  std::vector<double> measure;
  double lambda2 = 0.0;
  double gap = 0.0;

  double reconstruct(std::size_t x, std::size_t y) const {
    double s = 0.0;
    for (std::size_t j = 0; j < eigenvalues.size(); ++j)
      s += eigenvalues[j] * basis(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j)) *
           basis(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(j));
    return s * measure[y];
  }
};

inline SpectralDecomposition symmetrize_and_decompose(const TransitionKernel& k, const GibbsMeasure& mu,
                                                      double reversibility_tol = 1e-10) {
  if (check_detailed_balance(k, mu) > reversibility_tol)
    throw PreconditionError("kernel is not reversible with respect to the measure");
  const auto size = static_cast<Eigen::Index>(k.size());
  Eigen::VectorXd root(size);
  for (Eigen::Index x = 0; x < size; ++x) root(x) = std::sqrt(mu[static_cast<std::size_t>(x)]);
  Eigen::MatrixXd s = root.asDiagonal() * k.matrix() * root.cwiseInverse().asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
  if (solver.info() != Eigen::Success) throw PreconditionError("symmetric eigensolver failed");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(size));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return ev(a) > ev(b); });

  SpectralDecomposition out;
  out.measure = mu.probabilities();
  out.eigenvalues.resize(order.size());
  out.basis.resize(size, size);
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.eigenvalues[j] = ev(order[j]);
    out.basis.col(static_cast<Eigen::Index>(j)) =
        solver.eigenvectors().col(order[j]).cwiseQuotient(root);
  }
  if (out.basis.col(0).sum() < 0.0) out.basis.col(0) *= -1.0;
  out.lambda2 = out.eigenvalues.size() > 1 ? out.eigenvalues[1] : out.eigenvalues[0];
  out.gap = 1.0 - out.lambda2;
  return out;
}

inline double spectral_gap(const SpectralDecomposition& d) { return d.gap; }

/// Sampler frequencies against kernel rows. z = (count - T p) / sqrt(T p (1-p))
/// over cells with p > 0; a visit to a cell with p = 0 is a support violation.
struct EmpiricalReport {
  std::vector<double> row_max_z;
  double max_abs_z = 0.0;
  std::size_t support_violations = 0;
  std::size_t trials = 0;
  std::size_t cells = 0;

  bool pass(double z_max) const { return support_violations == 0 && max_abs_z <= z_max; }
};

inline EmpiricalReport empirical_vs_exact(const TransitionKernel& k, std::size_t trials, RngStream& rng) {
  const std::size_t n = k.n();
  if (n > 8) throw ResourceError("empirical kernel comparison limited to N <= 8");
  if (trials == 0) throw ArgumentError("trials must be positive");
  const std::size_t size = k.size();
  EmpiricalReport rep;
  rep.trials = trials;
  rep.row_max_z.assign(size, 0.0);
  std::vector<std::uint64_t> counts(size);
  WolffSampler wolff(k.params());
  std::optional<GlauberSampler> glauber;
  if (k.dynamics() == Dynamics::glauber) glauber.emplace(k.params());
  const double t = static_cast<double>(trials);
  for (std::size_t x = 0; x < size; ++x) {
    std::fill(counts.begin(), counts.end(), 0);
    const auto start = Configuration::from_index(n, x);
    Configuration y = start;
    for (std::size_t r = 0; r < trials; ++r) {
      if (glauber) {
        glauber->step(y, rng);
      } else {
        wolff.step(y, rng);
      }
      ++counts[y.index()];
      y = start;
    }
    double worst = 0.0;
    for (std::size_t to = 0; to < size; ++to) {
      const double prob = k(x, to);
      const auto c = static_cast<double>(counts[to]);
      if (prob <= 0.0) {
        if (counts[to] != 0) ++rep.support_violations;
        continue;
      }
      ++rep.cells;
      const double var = t * prob * (1.0 - prob);
      const double z = var > 0.0 ? std::abs(c - t * prob) / std::sqrt(var)
                                 : (c == t * prob ? 0.0 : std::numeric_limits<double>::infinity());
      worst = std::max(worst, z);
    }
    rep.row_max_z[x] = worst;
    rep.max_abs_z = std::max(rep.max_abs_z, worst);
  }
  return rep;
}

/// Nonzero entries as CSV: state_index,state_bits,target_index,probability.
/// state_bits lists site 1 first, 1 for +1.
inline void write_kernel_csv(std::ostream& os, const TransitionKernel& k) {
  os << "state_index,state_bits,target_index,probability\n";
  const std::size_t n = k.n();
  for (std::size_t x = 0; x < k.size(); ++x) {
    std::string bits(n, '0');
    for (std::size_t b = 0; b < n; ++b)
      if ((x >> b) & 1U) bits[b] = '1';
    for (std::size_t y = 0; y < k.size(); ++y) {
      const double v = k(x, y);
      if (v != 0.0) os << x << ',' << bits << ',' << y << ',' << format_double(v) << '\n';
    }
  }
}

namespace detail {

inline void put_le(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFU);
  os.write(b, 8);
}

inline std::uint64_t get_le(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ArgumentError("truncated kernel dump");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

/// Binary dump: little-endian u64 n, f64 j_hat (+inf at J = inf), then 4^N
/// row-major f64 entries.
inline void write_kernel_binary(std::ostream& os, const TransitionKernel& k) {
  detail::put_le(os, k.n());
  const Coupling j = k.params().j_hat();
  const double jv = j.is_infinite() ? std::numeric_limits<double>::infinity() : j.value();
  detail::put_le(os, std::bit_cast<std::uint64_t>(jv));
  const auto& m = k.matrix();
  for (Eigen::Index x = 0; x < m.rows(); ++x)
    for (Eigen::Index y = 0; y < m.cols(); ++y) detail::put_le(os, std::bit_cast<std::uint64_t>(m(x, y)));
}

struct KernelDump {
  std::size_t n = 0;
  Coupling j_hat;
  DenseMatrix entries;
};

inline KernelDump read_kernel_binary(std::istream& is) {
  KernelDump d;
  d.n = static_cast<std::size_t>(detail::get_le(is));
  if (d.n < 2 || d.n > kMaxKernelSites) throw ArgumentError("kernel dump has invalid N");
  const double jv = std::bit_cast<double>(detail::get_le(is));
  d.j_hat = std::isinf(jv) ? Coupling::infinite() : Coupling(jv);
  const auto size = static_cast<Eigen::Index>(std::size_t{1} << d.n);
  d.entries.resize(size, size);
  for (Eigen::Index x = 0; x < size; ++x)
    for (Eigen::Index y = 0; y < size; ++y) d.entries(x, y) = std::bit_cast<double>(detail::get_le(is));
  return d;
}

}  // namespace ising
