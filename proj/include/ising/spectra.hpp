#pragma once

// Microstate ensembles X_k = Y_k / sqrt(N), the sample covariance matrix
// K = (1/M) sum_k X_k X_k^T, the correlation matrix C = X^T X / M, and the
// condensation experiments built on their spectra.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ising/configuration.hpp"
#include "ising/dynamics.hpp"
#include "ising/errors.hpp"
#include "ising/functional.hpp"
#include "ising/model.hpp"
#include "ising/parallel.hpp"
#include "ising/rng.hpp"

namespace ising {

/// Columns X_k = Y_k / sqrt(N), stored as the packed Y_k.
class Ensemble {
 public:
  explicit Ensemble(std::vector<Configuration> states) : states_(std::move(states)) {
    if (states_.empty()) throw ArgumentError("an ensemble needs at least one microstate");
    for (const auto& s : states_)
      if (s.n() != states_.front().n()) throw ArgumentError("microstates must share N");
  }

  std::size_t n() const { return states_.front().n(); }
  std::size_t m() const { return states_.size(); }
  const Configuration& state(std::size_t k) const { return states_[k]; }

  Eigen::VectorXd column(std::size_t k) const {
    const double scale = 1.0 / std::sqrt(static_cast<double>(n()));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n()));
    for (std::size_t i = 0; i < n(); ++i) v(static_cast<Eigen::Index>(i)) = scale * states_[k][i];
    return v;
  }

  /// The N x M matrix with columns X_k.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n()), static_cast<Eigen::Index>(m()));
    for (std::size_t k = 0; k < m(); ++k) x.col(static_cast<Eigen::Index>(k)) = column(k);
    return x;
  }

 private:
  std::vector<Configuration> states_;
};

inline Ensemble build_ensemble(const Trajectory& t) { return Ensemble(t.states); }

/// M x M correlation matrix X^T X / M.
inline Eigen::MatrixXd correlation_matrix(const Ensemble& e) {
  const Eigen::MatrixXd x = e.matrix();
  return (x.transpose() * x) / static_cast<double>(e.m());
}

/// Streaming sum of Y_k Y_k^T with exact integer entries.
class CovarianceAccumulator {
 public:
  explicit CovarianceAccumulator(std::size_t n) : n_(n), sums_(n * (n + 1) / 2, 0), spins_(n) {}

  std::size_t n() const { return n_; }
  std::size_t count() const { return count_; }

  void add(const Configuration& y) {
    if (y.n() != n_) throw ArgumentError("microstate size does not match accumulator");
    for (std::size_t i = 0; i < n_; ++i) spins_[i] = static_cast<std::int8_t>(y[i]);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const std::int64_t si = spins_[i];
      for (std::size_t j = i; j < n_; ++j) sums_[p++] += si * spins_[j];
    }
    ++count_;
  }

  void merge(const CovarianceAccumulator& o) {
    if (o.n_ != n_) throw ArgumentError("accumulator sizes differ");
    for (std::size_t p = 0; p < sums_.size(); ++p) sums_[p] += o.sums_[p];
    count_ += o.count_;
  }

  /// sum_k Y_ik Y_jk
  std::int64_t sum(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return sums_[i * n_ - i * (i - 1) / 2 + (j - i)];
  }

  /// K_ij = sum_k Y_ik Y_jk / (N M).
  Eigen::MatrixXd matrix() const {
    if (count_ == 0) throw PreconditionError("no microstates accumulated");
    const double scale = 1.0 / (static_cast<double>(n_) * static_cast<double>(count_));
    Eigen::MatrixXd k(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    std::size_t p = 0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j) {
        const double v = static_cast<double>(sums_[p++]) * scale;
        k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    return k;
  }

 private:
  std::size_t n_;
  std::size_t count_ = 0;
  std::vector<std::int64_t> sums_;
  std::vector<std::int8_t> spins_;
};

inline Eigen::MatrixXd covariance_matrix(const Ensemble& e) {
  CovarianceAccumulator acc(e.n());
  for (std::size_t k = 0; k < e.m(); ++k) acc.add(e.state(k));
  return acc.matrix();
}

/// max_i sum_j |A_ij|
inline double gershgorin_norm(const Eigen::MatrixXd& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

/// Top-k eigenvalues of a symmetric matrix, descending.
inline std::vector<double> eigenvalues_symmetric(const Eigen::MatrixXd& a, std::size_t k) {
  if (a.rows() != a.cols()) throw ArgumentError("matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw ArgumentError("matrix is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw PreconditionError("symmetric eigensolver failed");
  const auto& ev = solver.eigenvalues();
  std::vector<double> out;
  for (Eigen::Index i = ev.size() - 1; i >= 0 && out.size() < k; --i) out.push_back(ev(i));
  return out;
}

struct SpectrumReport {
  std::vector<double> eigenvalues;  // descending
  double norm1 = 0.0;
  double spectral_radius = 0.0;

  static SpectrumReport of(const Eigen::MatrixXd& k, std::size_t count) {
    SpectrumReport r;
    r.eigenvalues = eigenvalues_symmetric(k, count);
    r.norm1 = gershgorin_norm(k);
    r.spectral_radius = r.eigenvalues.empty() ? 0.0 : std::abs(r.eigenvalues.front());
    if (!r.eigenvalues.empty()) r.spectral_radius = std::max(r.spectral_radius, std::abs(r.eigenvalues.back()));
    return r;
  }
};

/// Khat_ij = E[s_i s_j] / N.
inline Eigen::MatrixXd exact_limit_covariance(const ModelParams& p) {
  if (p.j_hat().is_infinite()) throw DomainError("limit covariance undefined at J = inf");
  const std::size_t n = p.n();
  const double theta = DerivedConstants::compute(p).theta;
  std::vector<double> pw(n + 1);
  for (std::size_t d = 0; d <= n; ++d) pw[d] = std::pow(theta, static_cast<double>(d));
  Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t d = i > j ? i - j : j - i;
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (pw[d] + pw[n - d]) / (1.0 + pw[n]) / static_cast<double>(n);
    }
  return k;
}

struct NormBounds {
  double khat_norm = 0.0;        // bound on ||Khat||_1
  double expected_sq_norm = 0.0;  // bound on E[||K||_1^2], stationary start
};

/// (2 lambda_+ / (lambda_+ - lambda_-)) (theta - theta^N) / (1 + theta^N)
inline double correlation_excess(const ModelParams& p) {
  const auto d = DerivedConstants::compute(p);
  if (p.j_hat().is_zero()) return 0.0;
  const double thn = std::pow(d.theta, static_cast<double>(p.n()));
  return (2.0 * d.lambda_plus / (d.lambda_plus - d.lambda_minus)) * (d.theta - thn) / (1.0 + thn);
}

inline NormBounds subcritical_norm_bound(const ModelParams& p, std::size_t m) {
  if (p.j_hat().is_infinite()) throw DomainError("norm bounds need finite J");
  if (m < 1) throw ArgumentError("M must be at least 1");
  const double n = static_cast<double>(p.n());
  const double excess = correlation_excess(p);
  const double per_site_lsi = lsi_constant_bound(p) / n;
  NormBounds b;
  b.khat_norm = 1.0 / n + excess / n;
  const double root = std::sqrt(n * n / static_cast<double>(m) * per_site_lsi) + (1.0 + excess) / std::sqrt(n);
  b.expected_sq_norm = root * root;
  return b;
}

/// Covariance over M steps split into contiguous batches for error bars.
class BatchedCovariance {
 public:
  BatchedCovariance(std::size_t n, std::size_t m, std::size_t batches = 20)
      : m_(m), batches_(std::max<std::size_t>(1, std::min(batches, m))) {
    parts_.assign(batches_, CovarianceAccumulator(n));
  }

  /// Adds Y_k, k 1-based.
  void add(std::size_t k, const Configuration& y) { parts_[(k - 1) * batches_ / m_].add(y); }

  std::size_t batches() const { return batches_; }

  CovarianceAccumulator total() const {
    CovarianceAccumulator acc = parts_.front();
    for (std::size_t b = 1; b < parts_.size(); ++b) acc.merge(parts_[b]);
    return acc;
  }

  Eigen::MatrixXd batch_matrix(std::size_t b) const { return parts_[b].matrix(); }

  /// Standard error of the mean of a per-batch statistic.
  template <class Stat>
  double standard_error(Stat&& stat) const {
    if (batches_ < 2) return std::numeric_limits<double>::infinity();
    std::vector<double> v;
    v.reserve(batches_);
    for (std::size_t b = 0; b < batches_; ++b) v.push_back(stat(parts_[b].matrix()));
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
  }

  /// Per-entry batch-means standard errors.
  Eigen::MatrixXd entry_standard_errors() const {
    const auto n = static_cast<Eigen::Index>(parts_.front().n());
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n, n);
    for (const auto& part : parts_) {
      const Eigen::MatrixXd k = part.matrix();
      mean += k;
      sq += k.cwiseProduct(k);
    }
    const double b = static_cast<double>(batches_);
    mean /= b;
    const Eigen::MatrixXd var = ((sq / b) - mean.cwiseProduct(mean)).cwiseMax(0.0) * (b / (b - 1.0));
    return (var / b).cwiseSqrt();
  }

 private:
  std::size_t m_;
  std::size_t batches_;
  std::vector<CovarianceAccumulator> parts_;
};

// Condensation experiments.

struct CondensationCell {
  std::size_t n = 0;
  Coupling j_hat;
  std::size_t m = 0;
  std::uint64_t seed = 0;
};

enum class Verdict { fail, pass, not_applicable };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::fail: return "0";
    case Verdict::pass: return "1";
    case Verdict::not_applicable: return "na";
  }
  return "na";
}

struct CondensationRow {
  CondensationCell cell;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double norm1 = 0.0;
  double norm1_se = 0.0;       // batch-means SE of ||K||_1
  double entry_se_norm = 0.0;  // max_i sum_j of per-entry batch-means SEs
  double khat_norm_bound = std::numeric_limits<double>::quiet_NaN();
  double sq_norm_bound = std::numeric_limits<double>::quiet_NaN();
  Verdict pass_41 = Verdict::not_applicable;
  Verdict pass_42 = Verdict::not_applicable;
  Verdict pass_43 = Verdict::not_applicable;
};

struct CondensationOptions {
  std::size_t batches = 20;
  double z = 4.0;              // error-bar multiplier for the limit-norm check
  double lambda_tol = 0.01;    // |lambda_1 - 1/N| tolerance at J = 0
};

/// Per-unit stream id derived from the cell contents, so results do not
/// depend on grid order or worker assignment.
inline std::uint64_t cell_stream(const CondensationCell& c) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFFU;
      h *= 1099511628211ULL;
    }
  };
  mix(c.n);
  mix(c.j_hat.is_infinite() ? ~std::uint64_t{0} : std::bit_cast<std::uint64_t>(c.j_hat.value()));
  mix(c.m);
  return h;
}

/// Runs one Wolff chain of length M (stationary start for finite J, uniform
/// start at J = inf) and evaluates the spectral predictions:
///   pass_41  J = inf: lambda_1 >= 1 - N/M and lambda_2 <= N/M;
///            J = 0:   |lambda_1 - 1/N| <= lambda_tol
///   pass_42  finite J: ||K||_1 <= Khat bound + z * max_i sum_j se_ij, which
///            covers ||K - Khat||_1 entry by entry
///   pass_43  finite J: ||K||_1^2 <= bound on E[||K||_1^2]
inline CondensationRow run_condensation_cell(const CondensationCell& cell, const CondensationOptions& opt = {}) {
  const ModelParams p(cell.n, cell.j_hat);
  RngStream rng(cell.seed, cell_stream(cell));
  const bool critical = cell.j_hat.is_infinite();
  const InitialLaw law = critical ? InitialLaw::uniform() : InitialLaw::stationary();
  BatchedCovariance cov(cell.n, cell.m, opt.batches);
  stream_chain(law, cell.m, Dynamics::wolff, p, rng, [&](std::size_t k, const Configuration& y) { cov.add(k, y); });

  CondensationRow row;
  row.cell = cell;
  const Eigen::MatrixXd k = cov.total().matrix();
  const auto top = SpectrumReport::of(k, 2);
  row.lambda1 = top.eigenvalues.at(0);
  row.lambda2 = top.eigenvalues.size() > 1 ? top.eigenvalues[1] : 0.0;
  row.norm1 = top.norm1;
  row.norm1_se = cov.standard_error([](const Eigen::MatrixXd& b) { return gershgorin_norm(b); });
  row.entry_se_norm = gershgorin_norm(cov.entry_standard_errors());
  const double n = static_cast<double>(cell.n);
  const double ratio = n / static_cast<double>(cell.m);
  if (critical) {
    row.pass_41 = row.lambda1 >= 1.0 - ratio - 1e-12 && row.lambda2 <= ratio + 1e-12 ? Verdict::pass : Verdict::fail;
    return row;
  }
  if (cell.j_hat.is_zero())
    row.pass_41 = std::abs(row.lambda1 - 1.0 / n) <= opt.lambda_tol ? Verdict::pass : Verdict::fail;
  const auto bounds = subcritical_norm_bound(p, cell.m);
  row.khat_norm_bound = bounds.khat_norm;
  row.sq_norm_bound = bounds.expected_sq_norm;
  const double khat_norm = gershgorin_norm(exact_limit_covariance(p));
  row.pass_42 = khat_norm <= bounds.khat_norm + 1e-12 && row.norm1 <= bounds.khat_norm + opt.z * row.entry_se_norm
                    ? Verdict::pass
                    : Verdict::fail;
  row.pass_43 = row.norm1 * row.norm1 <= bounds.expected_sq_norm ? Verdict::pass : Verdict::fail;
  return row;
}

/// All (cell, seed) units, evaluated concurrently and returned in grid order.
inline std::vector<CondensationRow> condensation_experiment(const std::vector<CondensationCell>& cells,
                                                            const CondensationOptions& opt = {},
                                                            std::size_t threads = 1) {
  std::vector<CondensationRow> rows(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t u) { rows[u] = run_condensation_cell(cells[u], opt); });
  return rows;
}

inline void write_condensation_csv(std::ostream& os, const std::vector<CondensationRow>& rows) {
  os << "n,j_hat,m,seed,lambda1,lambda2,norm1,khat_norm_bound,thm43_bound,pass_41,pass_42,pass_43\n";
  for (const auto& r : rows)
    os << r.cell.n << ',' << r.cell.j_hat.to_string() << ',' << r.cell.m << ',' << r.cell.seed << ','
       << format_double(r.lambda1) << ',' << format_double(r.lambda2) << ',' << format_double(r.norm1) << ','
       << format_double(r.khat_norm_bound) << ',' << format_double(r.sq_norm_bound) << ',' << to_string(r.pass_41)
       << ',' << to_string(r.pass_42) << ',' << to_string(r.pass_43) << '\n';
}

/// Same layout as kernel dumps: u64 n, f64 j_hat, then row-major f64.
inline void write_matrix_binary(std::ostream& os, const Eigen::MatrixXd& a, Coupling j_hat) {
  detail::put_le(os, static_cast<std::uint64_t>(a.rows()));
  const double jv = j_hat.is_infinite() ? std::numeric_limits<double>::infinity() : j_hat.value();
  detail::put_le(os, std::bit_cast<std::uint64_t>(jv));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) detail::put_le(os, std::bit_cast<std::uint64_t>(a(i, j)));
}

}  // namespace ising
