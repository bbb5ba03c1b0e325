#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rre/errors.hpp"
#include "rre/maps.hpp"
#include "rre/stats.hpp"

namespace rre {
namespace {

const double kPStar = 1.0 + std::sqrt(2.0);
const SymMatrix kP0 = SymMatrix::Scalar(kPStar);

TEST(Ks, Examples) {
  const EmpiricalDistribution s({1.0, 2.0, 2.0, 5.0});
  EXPECT_EQ(ks_distance(s, s), 0.0);
  EXPECT_EQ(ks_distance(EmpiricalDistribution({0.0}), EmpiricalDistribution({1.0})), 1.0);
  EXPECT_EQ(ks_distance(EmpiricalDistribution({0.0, 1.0}), EmpiricalDistribution({0.0, 2.0})), 0.5);
  EXPECT_THROW(ks_distance(EmpiricalDistribution(), s), ValidationError);
}

TEST(Ks, SymmetricAndBounded) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(1 + trial), b(3 + 2 * trial);
    for (double& x : a) x = std::round(4 * n(rng));
    for (double& x : b) x = std::round(4 * n(rng)) + 0.5 * (trial % 3);
    const EmpiricalDistribution da(a), db(b);
    const double d = ks_distance(da, db);
    EXPECT_EQ(d, ks_distance(db, da));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    // Brute force over all sample points.
    double brute = 0.0;
    for (double x : a) brute = std::max(brute, std::abs(da.cdf(x) - db.cdf(x)));
    for (double x : b) brute = std::max(brute, std::abs(da.cdf(x) - db.cdf(x)));
    EXPECT_NEAR(d, brute, 1e-15);
  }
}

TEST(Empirical, CdfAndLowerQuantile) {
  const EmpiricalDistribution d({3.0, 1.0, 2.0, 2.0});
  EXPECT_EQ(d.cdf(0.5), 0.0);
  EXPECT_EQ(d.cdf(1.0), 0.25);
  EXPECT_EQ(d.cdf(2.0), 0.75);
  EXPECT_EQ(d.cdf(2.5), 0.75);
  EXPECT_EQ(d.cdf(3.0), 1.0);
  EXPECT_EQ(d.quantile(0.25), 1.0);
  EXPECT_EQ(d.quantile(0.26), 2.0);
  EXPECT_EQ(d.quantile(0.75), 2.0);
  EXPECT_EQ(d.quantile(0.76), 3.0);
  EXPECT_EQ(d.median(), 2.0);
  EXPECT_DOUBLE_EQ(d.mean(), 2.0);
  EXPECT_DOUBLE_EQ(d.variance(), 2.0 / 3.0);
  EXPECT_THROW(d.quantile(0.0), ValidationError);
  EXPECT_THROW(EmpiricalDistribution({std::nan("")}), ValidationError);
}

TEST(Empirical, QuantileIsLeftInverseOfCdf) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e;
  std::vector<double> v(257);
  for (double& x : v) x = std::floor(10 * e(rng));
  const EmpiricalDistribution d(v);
  for (int i = 1; i <= 100; ++i) {
    const double q = i / 100.0;
    const double x = d.quantile(q);
    EXPECT_GE(d.cdf(x), q - 1e-15);
    for (double y : d.samples()) {
      if (y < x) EXPECT_LT(d.cdf(y), q);
    }
  }
}

TEST(Hill, RecoversParetoIndex) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double alpha : {0.5, 1.0, 2.0}) {
    std::vector<double> v(200000);
    for (double& x : v) x = std::pow(1.0 - u(rng), -1.0 / alpha);
    EXPECT_NEAR(hill_tail_index(v, 2000), alpha, 0.1 * alpha);
  }
}

TEST(Functional, ParseAndName) {
  for (const std::string s : {"trace", "lambda_max", "spectral_norm", "mean_matrix"}) {
    EXPECT_EQ(Functional::parse(s).name(), s);
  }
  const Functional f = Functional::parse("indicator_above:2.5");
  EXPECT_EQ(f.kind, Functional::Kind::kIndicatorAbove);
  EXPECT_EQ(f.threshold, 2.5);
  EXPECT_TRUE(f.bounded());
  EXPECT_EQ(Functional::parse(f.name()).threshold, 2.5);
  EXPECT_THROW(Functional::parse("indicator_above:x"), ValidationError);
  EXPECT_THROW(Functional::parse("median"), ValidationError);
}

TEST(Ergodic, DiracAtFullArrivals) {
  const auto est = ergodic_average(scalar_example(), {1.0, 1, 0}, SymMatrix::Scalar(0.0),
                                   Functional::trace(), 200, 10000);
  EXPECT_NEAR(est.scalar_value(), kPStar, 1e-8);
  EXPECT_FALSE(est.divergent);
}

TEST(Ergodic, MeanMatrix) {
  const auto est = ergodic_average(random_system(3, 2, 1.1, 4), {1.0, 1, 0},
                                   SymMatrix::Identity(3), Functional::mean_matrix(), 200, 1000);
  const SymMatrix p = solve_dare(random_system(3, 2, 1.1, 4)).p_star;
  EXPECT_LT(relative_distance(std::get<SymMatrix>(est.value), p), 1e-8);
}

TEST(Ergodic, RejectsBadInput) {
  const SystemModel m = scalar_example();
  EXPECT_THROW(ergodic_average(m, {0.0, 1, 0}, kP0, Functional::trace(), 10, 100), ValidationError);
  EXPECT_THROW(ergodic_average(m, {0.5, 1, 0}, kP0, Functional::trace(), 100, 100), ValidationError);
}

TEST(Ergodic, IndependentSeedsAgreeForBoundedFunctional) {
  const SystemModel m = scalar_example();
  for (double g : {0.6, 0.9}) {
    const Functional h = Functional::indicator_above(kPStar + 0.01);
    const auto a = ergodic_average(m, {g, 101, 0}, kP0, h, 200, 1'000'000);
    const auto b = ergodic_average(m, {g, 202, 0}, kP0, h, 200, 1'000'000);
    EXPECT_GT(a.scalar_value(), 0.0);
    EXPECT_LT(a.scalar_value(), 1.0);
    EXPECT_NEAR(a.scalar_value(), b.scalar_value(), 0.02) << "gamma " << g;
  }
}

TEST(Ergodic, DivergenceDiagnosticBelowCriticalRate) {
  const SystemModel m = scalar_example();
  for (double g : {0.3, 0.45}) {
    const auto est = ergodic_average(m, {g, 7, 0}, kP0, Functional::trace(), 200, 1'000'000);
    EXPECT_TRUE(est.divergent) << "gamma " << g << " tail " << est.tail_index;
    EXPECT_NE(est.diagnostic, "none");
  }
  const auto stable = ergodic_average(m, {0.9, 7, 0}, kP0, Functional::trace(), 200, 1'000'000);
  EXPECT_FALSE(stable.divergent) << stable.diagnostic;
}

TEST(Ensemble, Examples) {
  const SystemModel m = scalar_example();
  const auto dirac = ensemble_at_time(m, 1.0, SymMatrix::Scalar(5.0), 300, 100,
                                      Functional::trace(), 1);
  EXPECT_LT(dirac.max() - dirac.min(), 1e-8);
  EXPECT_NEAR(dirac.mean(), kPStar, 1e-8);

  const auto lost = ensemble_at_time(m, 0.0, SymMatrix::Scalar(0.0), 5, 50, Functional::trace(), 1);
  EXPECT_NEAR(lost.min(), 31.0, 1e-12);
  EXPECT_NEAR(lost.max(), 31.0, 1e-12);
}

TEST(Ensemble, DeterministicAcrossThreadCounts) {
  const SystemModel m = random_system(4, 2, 1.2, 5);
  const auto a = ensemble_at_time(m, 0.7, SymMatrix::Identity(4), 50, 64, Functional::lambda_max(), 9, 1);
  const auto b = ensemble_at_time(m, 0.7, SymMatrix::Identity(4), 50, 64, Functional::lambda_max(), 9, 4);
  EXPECT_EQ(a.samples(), b.samples());
}

TEST(Ensemble, MultipleTimesMatchSingleTime) {
  const SystemModel m = scalar_example();
  EnsembleRequest req;
  req.gamma_bar = 0.7;
  req.p0 = kP0;
  req.times = {10, 40};
  req.replicates = 32;
  req.seed = 3;
  req.functionals = {Functional::trace(), Functional::lambda_max()};
  const auto s = ensemble_sample(m, req);
  const auto at40 = ensemble_at_time(m, 0.7, kP0, 40, 32, Functional::trace(), 3);
  std::vector<double> col = s[1][0];
  std::sort(col.begin(), col.end());
  EXPECT_EQ(col, at40.samples());
  EXPECT_EQ(s[0][0], s[0][1]);
}

TEST(Ensemble, WeakConvergenceKs) {
  const SystemModel m = scalar_example();
  const auto t500 = ensemble_at_time(m, 0.8, kP0, 500, 10000, Functional::trace(), 11);
  const auto t1000 = ensemble_at_time(m, 0.8, kP0, 1000, 10000, Functional::trace(), 11);
  const auto other = ensemble_at_time(m, 0.8, kP0, 1000, 10000, Functional::trace(), 12);
  EXPECT_LE(ks_distance(t500, t1000), 0.03);
  EXPECT_LE(ks_distance(other, t1000), 0.03);
}

TEST(Ensemble, AgreesWithErgodicAverage) {
  const SystemModel m = scalar_example();
  const Functional h = Functional::indicator_above(kPStar + 0.01);
  const auto ens = ensemble_at_time(m, 0.9, kP0, 1000, 10000, h, 21);
  const auto erg = ergodic_average(m, {0.9, 22, 0}, kP0, h, 200, 1'000'000);
  EXPECT_NEAR(ens.mean(), erg.scalar_value(), 0.03);
}

TEST(Ensemble, SupportFloor) {
  const SystemModel m = scalar_example();
  for (double g : {0.6, 0.8, 0.95}) {
    for (const Functional& h : {Functional::trace(), Functional::lambda_max()}) {
      const auto d = ensemble_at_time(m, g, SymMatrix::Scalar(0.0), 200, 10000, h, 31);
      EXPECT_LE(d.cdf(std::nextafter(kPStar - 1e-6, 0.0)), 0.001) << "gamma " << g;
    }
  }
  const SystemModel m10 = random_system(10, 5, 1.25, 20070611);
  const double lmax = solve_dare(m10).p_star.lambda_max();
  const auto d = ensemble_at_time(m10, 0.8, SymMatrix::Zero(10), 200, 2000, Functional::lambda_max(), 32);
  EXPECT_LE(d.cdf(lmax - 1e-6 * std::max(1.0, lmax)), 0.001);
}

TEST(Ensemble, MonotoneConcentrationInRate) {
  const SystemModel m = scalar_example();
  double prev_mean = std::numeric_limits<double>::infinity();
  double prev_se = 0.0;
  for (double g : {0.6, 0.7, 0.8, 0.9, 1.0}) {
    const auto d = ensemble_at_time(m, g, kP0, 1000, 10000, Functional::trace(), 41);
    EXPECT_LE(d.mean(), prev_mean + 2.0 * std::hypot(prev_se, d.standard_error()))
        << "gamma " << g;
    prev_mean = d.mean();
    prev_se = d.standard_error();
  }
}

TEST(BoundednessProbe, Examples) {
  const SystemModel m = scalar_example();
  const auto full = boundedness_probe(m, 1.0, SymMatrix::Scalar(10.0), {kPStar + 1e-6, 10.0},
                                      {200, 400}, 1000, 1);
  for (const auto& row : full.frequency) {
    for (double f : row) EXPECT_EQ(f, 0.0);
  }

  const std::vector<double> n_grid{10.0, 1e2, 1e3, 1e4, 1e5};
  const auto heavy = boundedness_probe(m, 0.3, kP0, n_grid, {50, 100, 200}, 10000, 2);
  for (const auto& row : heavy.frequency) {
    for (std::size_t j = 1; j < row.size(); ++j) EXPECT_LE(row[j], row[j - 1]);
  }
  EXPECT_GT(heavy.sup_over_time(2), heavy.sup_over_time(4));
}

TEST(BoundednessProbe, RejectsBadInput) {
  const SystemModel m = scalar_example();
  EXPECT_THROW(boundedness_probe(m, 0.5, kP0, {2.0, 1.0}, {10}, 1000, 1), ValidationError);
  EXPECT_THROW(boundedness_probe(m, 0.5, kP0, {1.0}, {10}, 999, 1), ValidationError);
}

}  // namespace
}  // namespace rre
