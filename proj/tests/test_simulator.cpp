#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "rre/errors.hpp"
#include "rre/maps.hpp"
#include "rre/simulator.hpp"

namespace rre {
namespace {

using testing::Engine;

const double kPStar = 1.0 + std::sqrt(2.0);

TEST(Arrivals, DegenerateRates) {
  const auto ones = sample_arrivals({1.0, 7, 0}, 1000);
  const auto zeros = sample_arrivals({0.0, 7, 0}, 1000);
  EXPECT_EQ(std::accumulate(ones.begin(), ones.end(), 0), 1000);
  EXPECT_EQ(std::accumulate(zeros.begin(), zeros.end(), 0), 0);
}

TEST(Arrivals, SampleMeanWithinBinomialBand) {
  const auto g = sample_arrivals({0.5, 11, 0}, 1'000'000);
  const double mean = std::accumulate(g.begin(), g.end(), 0.0) / g.size();
  EXPECT_GE(mean, 0.497);
  EXPECT_LE(mean, 0.503);
}

TEST(Arrivals, SeedAndStreamDetermineSequence) {
  EXPECT_EQ(sample_arrivals({0.3, 5, 2}, 500), sample_arrivals({0.3, 5, 2}, 500));
  EXPECT_NE(sample_arrivals({0.3, 5, 2}, 500), sample_arrivals({0.3, 5, 3}, 500));
  EXPECT_NE(sample_arrivals({0.3, 5, 2}, 500), sample_arrivals({0.3, 6, 2}, 500));
  EXPECT_TRUE(sample_arrivals({0.3, 5, 2}, 0).empty());
}

TEST(Arrivals, RejectsBadInput) {
  EXPECT_THROW(sample_arrivals({1.5, 1, 0}, 10), ValidationError);
  EXPECT_THROW(sample_arrivals({-0.1, 1, 0}, 10), ValidationError);
  EXPECT_THROW(sample_arrivals({0.5, 1, 0}, -1), ValidationError);
}

TEST(RunRre, FullArrivalsConvergeToFixedPoint) {
  for (double p0 : {0.0, 1.0, 50.0}) {
    const CovTrajectory tr = run_rre(scalar_example(), {1.0, 1, 0}, SymMatrix::Scalar(p0), 100);
    double prev = std::abs(tr.covs[0](0, 0) - kPStar);
    for (std::size_t t = 1; t < tr.covs.size(); ++t) {
      const double r = std::abs(tr.covs[t](0, 0) - kPStar);
      EXPECT_LE(r, prev + 1e-15) << "t=" << t;
      prev = r;
    }
    EXPECT_LE(prev, 1e-10);
  }
}

TEST(RunRre, NoArrivalsDoubleAndAddOne) {
  const CovTrajectory tr = run_rre(scalar_example(), {0.0, 1, 0}, SymMatrix::Scalar(0.0), 30);
  for (int t = 0; t <= 30; ++t) {
    const double expected = std::ldexp(1.0, t) - 1.0;
    EXPECT_NEAR(tr.covs[t](0, 0), expected, 1e-14 * t * expected);
  }
}

TEST(RunRre, ZeroHorizon) {
  const SymMatrix p0 = SymMatrix::Scalar(2.0);
  const CovTrajectory tr = run_rre(scalar_example(), {0.5, 1, 0}, p0, 0);
  ASSERT_EQ(tr.covs.size(), 1u);
  EXPECT_EQ(tr.covs[0], p0);
  EXPECT_TRUE(tr.gammas.empty());
}

TEST(RunRre, ReplayQFloorAndDeterminism) {
  Engine rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 5;
    const SystemModel m = testing::random_model(rng, n, std::max(1, n / 2), 1.2);
    const ArrivalProcess ap{testing::uniform(rng, 0.2, 1.0), rng(), 0};
    const SymMatrix p0 = testing::random_psd(rng, n);
    const CovTrajectory tr = run_rre(m, ap, p0, 200);
    ASSERT_EQ(tr.covs.size(), 201u);
    ASSERT_EQ(tr.gammas.size(), 200u);
    EXPECT_EQ(tr.covs[0], p0);
    EXPECT_EQ(tr.gammas, sample_arrivals(ap, 200));
    for (int t = 0; t < 200; ++t) {
      EXPECT_EQ(tr.covs[t + 1], switched_map(m, tr.gammas[t], tr.covs[t]));
      EXPECT_TRUE(loewner_leq(m.Q(), tr.covs[t + 1], 1e-8));
    }
    const CovTrajectory again = run_rre(m, ap, p0, 200);
    EXPECT_EQ(again.covs, tr.covs);
    EXPECT_EQ(run_rre(m, tr.gammas, p0).covs, tr.covs);
  }
}

TEST(RunRre, StreamingMatchesRetained) {
  const SystemModel m = scalar_example();
  const ArrivalProcess ap{0.6, 9, 0};
  const CovTrajectory tr = run_rre(m, ap, SymMatrix::Scalar(kPStar), 300);
  int visits = 0;
  stream_rre(m, ap, SymMatrix::Scalar(kPStar), 300,
             [&](int t, std::optional<bool> gamma, const Eigen::MatrixXd& p) {
               EXPECT_EQ(t, visits++);
               EXPECT_EQ(p(0, 0), tr.covs[t](0, 0));
               if (t < 300) {
                 ASSERT_TRUE(gamma.has_value());
                 EXPECT_EQ(*gamma, static_cast<bool>(tr.gammas[t]));
               } else {
                 EXPECT_FALSE(gamma.has_value());
               }
             });
  EXPECT_EQ(visits, 301);
}

TEST(RunRre, RetentionBudget) {
  const SystemModel m = random_system(10, 5, 1.1, 3);
  EXPECT_THROW(run_rre(m, {0.5, 1, 0}, SymMatrix::Identity(10), 200'000), ValidationError);
}

TEST(RunRre, RejectsBadInitialCovariance) {
  EXPECT_THROW(run_rre(scalar_example(), {0.5, 1, 0}, SymMatrix::Identity(2), 5), DimensionError);
  EXPECT_THROW(run_rre(scalar_example(), {0.5, 1, 0}, SymMatrix::Scalar(-1.0), 5), ValidationError);
}

TEST(TransitionKernel, Examples) {
  const SystemModel m = scalar_example();
  auto k = transition_kernel(m, 1.0, SymMatrix::Scalar(2.0));
  ASSERT_EQ(k.size(), 2u);
  EXPECT_EQ(k[0].probability, 0.0);
  EXPECT_EQ(k[1].probability, 1.0);
  EXPECT_NEAR(k[1].value(0, 0), 3.0 - 2.0 / 3.0, 1e-15);

  k = transition_kernel(m, 0.5, SymMatrix::Scalar(0.0));
  EXPECT_NEAR(k[0].value(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(k[1].value(0, 0), 1.0, 1e-15);
  EXPECT_EQ(k[0].probability, 0.5);
  EXPECT_EQ(k[1].probability, 0.5);

  k = transition_kernel(m, 0.3, SymMatrix::Scalar(1.0));
  EXPECT_NEAR(k[0].value(0, 0), 3.0, 1e-15);
  EXPECT_NEAR(k[0].probability, 0.7, 1e-15);
  EXPECT_NEAR(k[1].value(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(k[1].probability, 0.3, 1e-15);
}

TEST(TrajectoryCsv, Format) {
  std::ostringstream out;
  const SystemModel unit(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                        SymMatrix::Scalar(1.0), SymMatrix::Scalar(1.0));
  write_trajectory_csv(out, unit, {0.0, 1, 0}, SymMatrix::Scalar(0.0), 2, true);
  EXPECT_EQ(out.str(),
            "t,gamma_t,trace,lambda_max,p_0_0\n"
            "0,0,0,0,0\n"
            "1,0,1,1,1\n"
            "2,,2,2,2\n");
}

TEST(Filter, CovariancesMatchRreOnSameArrivals) {
  Engine rng(2);
  const SystemModel m = testing::random_model(rng, 3, 2, 1.2);
  const ArrivalProcess ap{0.7, 4, 0};
  const SymMatrix p0 = SymMatrix::Identity(3);
  const FilterRun run = run_filter(m, ap, 99, 50, p0);
  const CovTrajectory tr = run_rre(m, ap, p0, 50);
  EXPECT_EQ(run.arrivals, tr.gammas);
  ASSERT_EQ(run.covs.size(), tr.covs.size());
  for (std::size_t t = 0; t < tr.covs.size(); ++t) EXPECT_EQ(run.covs[t], tr.covs[t]);
  ASSERT_EQ(run.errors.size(), 51u);
  for (std::size_t t = 0; t < run.errors.size(); ++t) {
    const Eigen::VectorXd diff = run.states[t] - run.estimates[t];
    EXPECT_LT((run.errors[t] - diff).norm(), 1e-9 * std::max(1.0, run.states[t].norm()));
  }
}

TEST(Filter, EstimateOnlyUsesObservationWhenItArrives) {
  const SystemModel m = scalar_example();
  const FilterRun run = run_filter(m, {0.5, 3, 0}, 5, 40, SymMatrix::Scalar(1.0));
  for (int t = 0; t < 40; ++t) {
    if (!run.arrivals[t]) {
      EXPECT_DOUBLE_EQ(run.estimates[t + 1](0), std::sqrt(2.0) * run.estimates[t](0));
    }
  }
}

TEST(Filter, Deterministic) {
  const SystemModel m = random_system(4, 2, 1.1, 8);
  const auto a = run_filter(m, {0.6, 1, 0}, 2, 30, SymMatrix::Identity(4));
  const auto b = run_filter(m, {0.6, 1, 0}, 2, 30, SymMatrix::Identity(4));
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.observations, b.observations);
  EXPECT_EQ(a.estimates, b.estimates);
}

TEST(Filter, NoiselessLimitShrinksErrors) {
  const SystemModel base = scalar_example();
  const SystemModel m(base.A(), base.C(), SymMatrix::Scalar(1e-8), SymMatrix::Scalar(1e-8));
  const FilterRun run = run_filter(m, {1.0, 1, 0}, 3, 60, SymMatrix::Scalar(1.0));
  EXPECT_LT(run.errors.back().norm(), 1e-3);
  EXPECT_LT(run.errors.back().norm(), run.errors.front().norm() + 1e-12);
}

TEST(Filter, SteadyStateCovarianceMatchesDare) {
  const SystemModel m = scalar_example();
  const SymMatrix p_star = solve_dare(m).p_star;
  const auto cov = filter_error_covariance(m, {1.0, 1, 0}, 17, p_star, {200}, 10000);
  EXPECT_LT((cov[0].mat() - p_star.mat()).norm() / p_star.frobenius_norm(), 0.05);
}

TEST(Filter, ConditionalCovarianceValidity) {
  const int reps = 10000;
  const double bound = 10.0 / std::sqrt(static_cast<double>(reps));
  for (const SystemModel& m : {scalar_example(), random_system(3, 2, 1.1, 21)}) {
    const ArrivalProcess ap{0.7, 12, 0};
    const SymMatrix p0 = SymMatrix::Identity(m.state_dim());
    const auto cov = filter_error_covariance(m, ap, 31, p0, {10, 50}, reps);
    const CovTrajectory tr = run_rre(m, ap, p0, 50);
    EXPECT_LT((cov[0].mat() - tr.covs[10].mat()).norm() / tr.covs[10].frobenius_norm(), bound);
    EXPECT_LT((cov[1].mat() - tr.covs[50].mat()).norm() / tr.covs[50].frobenius_norm(), bound);
  }
}

}  // namespace
}  // namespace rre
