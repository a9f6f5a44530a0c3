#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ising/dynamics.hpp"
#include "ising/functional.hpp"
#include "ising/kernel.hpp"
#include "oracles.hpp"

using namespace ising;

namespace {

struct Chain {
  ModelParams params;
  TransitionKernel kernel;
  GibbsMeasure mu;

  Chain(std::size_t n, double j) : params(n, j), kernel(build_wolff_kernel(params)), mu(params) {}
};

StateFunction site_function(std::size_t n, std::size_t site) { return character_function(n, std::uint64_t{1} << (site - 1)); }

}  // namespace

TEST(DirichletForm, ConstantIsZero) {
  const Chain s(5, 0.5);
  EXPECT_NEAR(dirichlet_form(StateFunction::Constant(32, 3.0), s.kernel, s.mu), 0.0, 1e-15);
}

TEST(DirichletForm, SingleSpinAtZeroCoupling) {
  for (std::size_t n = 2; n <= 8; ++n) {
    const Chain s(n, 0.0);
    EXPECT_NEAR(dirichlet_form(site_function(n, 1), s.kernel, s.mu), 2.0 / n, 1e-12);
  }
}

TEST(DirichletForm, QuadraticFormIdentity) {
  RngStream rng(3);
  for (double j : {0.0, 0.5, 1.5}) {
    const Chain s(6, j);
    for (int t = 0; t < 100; ++t) {
      const auto f = gaussian_function(64, rng);
      EXPECT_NEAR(dirichlet_form(f, s.kernel, s.mu), dirichlet_form_quadratic(f, s.kernel, s.mu), 1e-12);
    }
  }
}

TEST(DirichletForm, HypercubeFormAtZeroCoupling) {
  const std::size_t n = 6;
  const Chain s(n, 0.0);
  RngStream rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto f = gaussian_function(64, rng);
    double sum = 0.0;
    for (std::size_t x = 0; x < 64; ++x)
      for (std::size_t i = 0; i < n; ++i) {
        const double d = f(static_cast<Eigen::Index>(x ^ (std::size_t{1} << i))) - f(static_cast<Eigen::Index>(x));
        sum += s.mu[x] * d * d;
      }
    EXPECT_NEAR(dirichlet_form(f, s.kernel, s.mu), sum / (2.0 * n), 1e-12);
  }
}

TEST(Entropy, Examples) {
  const Chain s(6, 0.0);
  EXPECT_NEAR(entropy(StateFunction::Constant(64, 2.0), s.mu), 0.0, 1e-15);
  EXPECT_NEAR(entropy(indicator_function(64, 17), s.mu), 6.0 * std::log(2.0) / 64.0, 1e-15);
  RngStream rng(5);
  const StateFunction f = gaussian_function(64, rng).cwiseAbs();
  EXPECT_NEAR(entropy(3.5 * f, s.mu), 3.5 * entropy(f, s.mu), 1e-12);
  StateFunction neg = f;
  neg(3) = -0.1;
  EXPECT_THROW(entropy(neg, s.mu), ArgumentError);
}

TEST(Variance, Examples) {
  const Chain s(5, 0.0);
  EXPECT_NEAR(variance(StateFunction::Constant(32, -1.0), s.mu), 0.0, 1e-15);
  EXPECT_NEAR(variance(site_function(5, 1), s.mu), 1.0, 1e-15);
  const ModelParams p(4, 1.0);
  const GibbsMeasure mu(p);
  const StateFunction f = site_function(4, 1) + site_function(4, 2);
  const auto ref = oracle::gibbs(4, 1.0);
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t x = 0; x < 16; ++x) {
    const double v = f(static_cast<Eigen::Index>(x));
    m1 += ref[x] * v;
    m2 += ref[x] * v * v;
  }
  EXPECT_NEAR(variance(f, mu), m2 - m1 * m1, 1e-12);
  EXPECT_NEAR(variance(f, mu), 2.0 + 2.0 * two_point_correlation(1, 2, p), 1e-12);
}

TEST(Constants, LogSobolev) {
  for (std::size_t n = 2; n <= 20; ++n) EXPECT_DOUBLE_EQ(lsi_constant_bound(0.0, n), double(n));
  const double e = std::exp(1.0);
  EXPECT_NEAR(lsi_constant_bound(0.5, 8), e * (e * e + 1) * (0.5 + 0.5 * std::exp((e - 1) / 2)) * 8, 1e-10);
  for (double j : {0.0, 0.3, 1.0, 2.5})
    EXPECT_DOUBLE_EQ(poincare_constant_bound(j, 7), lsi_constant_bound(j, 7) / 2.0);
  EXPECT_DOUBLE_EQ(poincare_constant_bound(0.0, 10), 5.0);
  double prev = 0.0;
  for (double j = 0.0; j <= 3.0; j += 0.1) {
    const double v = lsi_constant_bound(j, 6);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, lsi_constant_bound(j, 7));
    prev = v;
  }
  EXPECT_THROW(lsi_constant_bound(-1.0, 4), DomainError);
}

TEST(Certify, ConstantFunctionPasses) {
  const Chain s(5, 1.0);
  const StateFunction one = StateFunction::Constant(32, 1.0);
  const auto lsi = certify_lsi(one, s.kernel, s.mu, lsi_constant_bound(s.params));
  EXPECT_TRUE(lsi.pass);
  EXPECT_NEAR(lsi.lhs, 0.0, 1e-15);
  EXPECT_TRUE(certify_poincare(one, s.kernel, s.mu, poincare_constant_bound(s.params)).pass);
}

TEST(Certify, ReportFields) {
  const auto r = InequalityReport::make(1.0, 3.0, 2.0);
  EXPECT_EQ(r.slack, 2.0);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(InequalityReport::make(1.0, 1.0 - 1e-9, 2.0).pass);
  EXPECT_TRUE(InequalityReport::make(1.0, 1.0 - 1e-11, 2.0).pass);
}

TEST(Certify, RandomFunctionsPassOnGrid) {
  RngStream rng(6);
  for (std::size_t n = 2; n <= 6; ++n) {
    for (double j : {0.0, 0.25, 0.5, 1.0, 2.0}) {
      const Chain s(n, j);
      const double c_ls = lsi_constant_bound(s.params);
      const double c_pi = poincare_constant_bound(s.params);
      for (int t = 0; t < 300; ++t) {
        const auto f = gaussian_function(s.mu.size(), rng);
        ASSERT_TRUE(certify_lsi(f, s.kernel, s.mu, c_ls).pass) << n << ' ' << j;
        ASSERT_TRUE(certify_poincare(f, s.kernel, s.mu, c_pi).pass) << n << ' ' << j;
      }
    }
  }
}

TEST(Certify, SecondEigenfunctionIsExtremal) {
  for (double j : {0.0, 0.5, 1.0}) {
    const Chain s(6, j);
    const auto d = symmetrize_and_decompose(s.kernel, s.mu);
    const StateFunction xi2 = d.basis.col(1);
    const auto r = certify_poincare(xi2, s.kernel, s.mu, 1.0);
    EXPECT_NEAR(r.lhs / (r.rhs / r.constant), 1.0 / d.gap, 1e-8);
    EXPECT_TRUE(certify_poincare(xi2, s.kernel, s.mu, poincare_constant_bound(s.params)).pass);
  }
}

TEST(Certify, ZeroCouplingPoincareIsTight) {
  for (std::size_t n = 2; n <= 8; ++n) {
    const Chain s(n, 0.0);
    const auto d = symmetrize_and_decompose(s.kernel, s.mu);
    EXPECT_NEAR(1.0 / d.gap, n / 2.0, 1e-9);
    EXPECT_GE(poincare_constant_bound(0.0, n) - 1.0 / d.gap, -1e-10);
  }
}

TEST(Certify, StructuredFamiliesPass) {
  for (double j : {0.0, 0.5, 2.0}) {
    const Chain s(5, j);
    const auto d = symmetrize_and_decompose(s.kernel, s.mu);
    for (const auto& lf : structured_functions(5, d)) {
      EXPECT_TRUE(certify_lsi(lf.values, s.kernel, s.mu, lsi_constant_bound(s.params)).pass) << to_string(lf.family);
      EXPECT_TRUE(certify_poincare(lf.values, s.kernel, s.mu, poincare_constant_bound(s.params)).pass);
    }
  }
}

TEST(Adversary, LocalSearchStaysBelowConstants) {
  RngStream rng(7);
  for (double j : {0.0, 0.5}) {
    const Chain s(4, j);
    for (auto kind : {InequalityKind::log_sobolev, InequalityKind::poincare}) {
      const RatioAdversary adv(s.kernel, s.mu, kind);
      const auto best = adv.search(rng, 10, 40);
      const double c = kind == InequalityKind::log_sobolev ? lsi_constant_bound(s.params) : poincare_constant_bound(s.params);
      EXPECT_LE(best.ratio, c + 1e-10);
      const auto rep = kind == InequalityKind::log_sobolev ? certify_lsi(best.f, s.kernel, s.mu, c)
                                                           : certify_poincare(best.f, s.kernel, s.mu, c);
      EXPECT_TRUE(rep.pass);
      if (kind == InequalityKind::poincare) {
        const auto d = symmetrize_and_decompose(s.kernel, s.mu);
        EXPECT_LE(best.ratio, 1.0 / d.gap + 1e-8);
        EXPECT_GT(best.ratio, 0.9 / d.gap);
      }
    }
  }
}

TEST(GeometricSums, Examples) {
  EXPECT_EQ(geometric_sum_helpers(10, 0.0).c, 0.0);
  EXPECT_EQ(geometric_sum_helpers(10, 0.0).c_hat, 1.0);
  EXPECT_NEAR(geometric_sum_helpers(3, 0.5).c, 0.875, 1e-15);
  EXPECT_THROW(geometric_sum_helpers(3, 1.0), DomainError);
  EXPECT_THROW(geometric_sum_helpers(3, 1.5), ArgumentError);
  EXPECT_THROW(geometric_sum_helpers(0, 0.5), ArgumentError);
}

TEST(GeometricSums, MatchSeriesAndMonotone) {
  for (std::size_t m : {1u, 2u, 5u, 37u, 200u}) {
    double prev = -1e300;
    for (double x = -1.0; x < 0.999; x += 0.01) {
      const auto g = geometric_sum_helpers(m, x);
      EXPECT_NEAR(g.c, oracle::geometric_series(m, x), 1e-9 * (1 + std::abs(g.c)));
      EXPECT_NEAR(g.c_hat, oracle::weighted_series(m, x), 1e-7 * (1 + std::abs(g.c_hat)));
      if (x >= 0.0) {
        EXPECT_GE(g.c_hat, prev - 1e-9);
        EXPECT_LE(g.c_hat, 2.0 / (1.0 - x) + 1e-12);
      }
      prev = g.c_hat;
    }
  }
}

TEST(ErgodicBound, ClosedFormScaling) {
  const auto b0 = ergodic_l2_bound(0.0, 8, 1000, 2.0);
  EXPECT_NEAR(b0.trajectory_mse, 4.0 * 8 / 1000, 1e-15);
  EXPECT_NEAR(b0.averaged_operator, 2.0 / 1000 * (2 + 4.0), 1e-15);
  const auto b1 = ergodic_l2_bound(0.7, 8, 1000, 1.0);
  const auto b2 = ergodic_l2_bound(0.7, 8, 10000, 1.0);
  EXPECT_NEAR(b1.trajectory_mse / b2.trajectory_mse, 10.0, 1e-12);
  EXPECT_NEAR(b1.averaged_operator / b2.averaged_operator, 10.0, 1e-12);
  EXPECT_THROW(ergodic_l2_bound(0.7, 8, 0, 1.0), ArgumentError);
}

TEST(ErgodicBound, ExactErrorsMatchMatrixPowers) {
  const Chain s(5, 0.6);
  const auto d = symmetrize_and_decompose(s.kernel, s.mu);
  RngStream rng(8);
  const auto f = gaussian_function(32, rng);
  for (std::size_t m : {1u, 2u, 7u, 30u}) {
    const double want = oracle::stationary_average_variance(s.kernel.matrix(), s.mu.probabilities(), f, m);
    EXPECT_NEAR(exact_trajectory_mse(d, f, m), want, 1e-10);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(32);
    Eigen::VectorXd pk = f;
    for (std::size_t k = 1; k <= m; ++k) {
      pk = s.kernel.matrix() * pk;
      acc += pk;
    }
    const Eigen::VectorXd g = acc / double(m) - Eigen::VectorXd::Constant(32, expectation(f, s.mu));
    EXPECT_NEAR(exact_averaged_error(d, f, m), l2_norm(g, s.mu), 1e-10);
    const auto b = ergodic_l2_bound(0.6, 5, m, l2_norm(f, s.mu));
    EXPECT_LE(exact_trajectory_mse(d, f, m), b.trajectory_mse);
    EXPECT_LE(exact_averaged_error(d, f, m), b.averaged_operator);
  }
}

TEST(ErgodicBound, MonteCarloWithinBound) {
  const std::size_t n = 8;
  const double j = 0.5;
  const ModelParams p(n, j);
  const std::size_t m = 10000;
  const int replicas = 200;
  const double target = two_point_correlation(1, 2, p);
  double mse = 0.0;
  for (int r = 0; r < replicas; ++r) {
    RngStream rng(100, static_cast<std::uint64_t>(r));
    const double avg = ergodic_average([](const Configuration& y) { return double(y[0] * y[1]); },
                                       InitialLaw::stationary(), m, Dynamics::wolff, p, rng);
    mse += (avg - target) * (avg - target);
  }
  mse /= replicas;
  EXPECT_LE(mse, ergodic_l2_bound(j, n, m, 1.0).trajectory_mse);
}

TEST(Export, InequalityCsv) {
  std::ostringstream os;
  write_inequality_csv(os, {{4, Coupling(0.5), TestFamily::indicator, InequalityReport::make(0.25, 1.0, 3.0)}});
  EXPECT_EQ(os.str(), "n,j_hat,family,lhs,rhs,slack,pass\n4,0.5,indicator,0.25,1,0.75,1\n");
}
