#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "generators.hpp"
#include "rre/errors.hpp"
#include "rre/model.hpp"

namespace rre {
namespace {

using testing::Engine;

SystemModel scalar(double a, double c, double q, double r) {
  return SystemModel(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, c),
                     SymMatrix::Scalar(q), SymMatrix::Scalar(r));
}

SystemModel diag2(double a0, double a1, double c, double q) {
  Eigen::MatrixXd a = Eigen::Vector2d(a0, a1).asDiagonal();
  return SystemModel(a, Eigen::MatrixXd::Constant(1, 2, c), q * SymMatrix::Identity(2),
                     SymMatrix::Identity(1));
}

TEST(SymMatrix, SymmetrizesOnConstruction) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 4, 3;
  const SymMatrix s(m);
  EXPECT_EQ(s(0, 1), 3.0);
  EXPECT_EQ(s(1, 0), 3.0);
}

TEST(SymMatrix, RejectsNonSquareAndEmpty) {
  EXPECT_THROW(SymMatrix(Eigen::MatrixXd(2, 3)), DimensionError);
  EXPECT_THROW(SymMatrix(Eigen::MatrixXd(0, 0)), DimensionError);
}

TEST(SymMatrix, PsdToleranceIsRelative) {
  Eigen::MatrixXd m = Eigen::Vector2d(1e6, -1e-4).asDiagonal();
  EXPECT_TRUE(SymMatrix(m).is_psd(1e-9));
  m(1, 1) = -1e-2;
  EXPECT_FALSE(SymMatrix(m).is_psd(1e-9));
}

TEST(SymMatrix, SqrtClampsNegativeEigenvalues) {
  Eigen::MatrixXd m = Eigen::Vector2d(4.0, -1e-14).asDiagonal();
  const SymMatrix r = SymMatrix(m).sqrt_psd();
  EXPECT_NEAR(r(0, 0), 2.0, 1e-15);
  EXPECT_EQ(r(1, 1), 0.0);
}

TEST(Loewner, Examples) {
  Engine rng(1);
  const SymMatrix x = testing::random_psd(rng, 3);
  EXPECT_TRUE(loewner_leq(x, x, 0.0));
  EXPECT_TRUE(loewner_leq(SymMatrix::Scalar(3.0), SymMatrix::Scalar(3.0 + 2.0 * std::sqrt(2.0)), 1e-12));
  EXPECT_FALSE(loewner_leq(SymMatrix::Identity(2), SymMatrix::Zero(2), 1e-12));
  EXPECT_THROW(loewner_leq(SymMatrix::Identity(2), SymMatrix::Identity(3)), DimensionError);
}

TEST(Loewner, PartialOrderProperties) {
  Engine rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 6;
    const SymMatrix x = testing::random_psd(rng, n);
    const SymMatrix y = x + testing::random_psd(rng, n, 1 + trial % n);
    const SymMatrix z = y + testing::random_psd(rng, n, 1);
    const double tol = 1e-9;
    EXPECT_TRUE(loewner_leq(x, x, tol));
    ASSERT_TRUE(loewner_leq(x, y, tol));
    ASSERT_TRUE(loewner_leq(y, z, tol));
    EXPECT_TRUE(loewner_leq(x, z, 2 * tol));
    // Antisymmetry: both directions at zero tolerance force equality.
    if (loewner_leq(x, y, 0.0) && loewner_leq(y, x, 0.0)) {
      EXPECT_LT(relative_distance(x, y), 1e-12);
    }
    const SymMatrix w = testing::random_psd(rng, n);
    if (loewner_leq(w, x, 0.0) && loewner_leq(x, w, 0.0)) {
      EXPECT_LT(relative_distance(x, w), 1e-12);
    }
  }
}

TEST(SystemModel, ValidatesCovariances) {
  EXPECT_THROW(scalar(1.0, 1.0, -1.0, 1.0), ValidationError);
  EXPECT_THROW(scalar(1.0, 1.0, 1.0, 0.0), ValidationError);
  EXPECT_THROW(SystemModel(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Ones(1, 3),
                           SymMatrix::Identity(2), SymMatrix::Identity(1)),
               ValidationError);
  EXPECT_TRUE(scalar(1.0, 1.0, 1.0, 1.0).q_strictly_positive());
  EXPECT_FALSE(scalar(1.0, 1.0, 0.0, 1.0).q_strictly_positive());
}

TEST(Detectability, Examples) {
  EXPECT_TRUE(check_detectability(scalar(std::sqrt(2.0), 1.0, 1.0, 1.0)));
  EXPECT_FALSE(check_detectability(scalar(std::sqrt(2.0), 0.0, 1.0, 1.0)));
  EXPECT_TRUE(check_detectability(diag2(0.5, 0.5, 0.0, 1.0)));
}

TEST(Stabilizability, Examples) {
  EXPECT_TRUE(check_stabilizability(scalar(std::sqrt(2.0), 1.0, 1.0, 1.0)));
  EXPECT_FALSE(check_stabilizability(scalar(std::sqrt(2.0), 1.0, 0.0, 1.0)));
  EXPECT_TRUE(check_stabilizability(diag2(0.2, 0.3, 1.0, 0.0)));
}

TEST(SpectralAbscissa, Examples) {
  EXPECT_NEAR(spectral_abscissa(scalar_example()), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(spectral_abscissa(diag2(1.0, 1.0, 1.0, 1.0)), 1.0, 1e-15);
  EXPECT_NEAR(spectral_abscissa(diag2(2.0, -3.0, 1.0, 1.0)), 3.0, 1e-15);
}

// A block-triangular instance with an unstable mode invisible to C, then an
// arbitrary similarity transform.
SystemModel undetectable_5x5(Engine& rng) {
  Eigen::MatrixXd a = testing::gaussian_matrix(rng, 5, 5, 0.2);
  a.block(4, 0, 1, 4).setZero();
  a(4, 4) = 1.5;
  Eigen::MatrixXd c = testing::gaussian_matrix(rng, 2, 5);
  c.col(4).setZero();
  // The unobserved mode must not leak into the observed block.
  a.block(0, 4, 4, 1).setZero();
  return SystemModel(a, c, SymMatrix::Identity(5), SymMatrix::Identity(2));
}

SystemModel transformed(const SystemModel& m, const Eigen::MatrixXd& t) {
  const Eigen::MatrixXd ti = t.inverse();
  return SystemModel(t * m.A() * ti, m.C() * ti, m.Q(), m.R());
}

TEST(Detectability, InvariantUnderSimilarity) {
  Engine rng(3);
  int detectable = 0;
  int undetectable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SystemModel m =
        trial % 2 ? undetectable_5x5(rng) : testing::random_model(rng, 5, 2, 1.3);
    Eigen::MatrixXd t = testing::gaussian_matrix(rng, 5, 5) + 3.0 * Eigen::MatrixXd::Identity(5, 5);
    const bool before = check_detectability(m);
    EXPECT_EQ(before, check_detectability(transformed(m, t))) << "trial " << trial;
    (before ? detectable : undetectable)++;
  }
  EXPECT_GT(detectable, 0);
  EXPECT_EQ(undetectable, 50);
}

TEST(Detectability, StableSystemsAlwaysPass) {
  Engine rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 5;
    Eigen::MatrixXd a = testing::gaussian_matrix(rng, n, n);
    const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
    a *= testing::uniform(rng, 0.0, 0.99) / rho;
    const SystemModel m(a, Eigen::MatrixXd::Zero(1, n), SymMatrix::Zero(n),
                        SymMatrix::Identity(1));
    EXPECT_TRUE(check_detectability(m));
    EXPECT_TRUE(check_stabilizability(m));
  }
}

TEST(RandomSystem, MeetsHypotheses) {
  const SystemModel m = random_system(10, 5, 1.25, 20070611);
  EXPECT_NEAR(spectral_abscissa(m), 1.25, 1e-12);
  EXPECT_TRUE(check_detectability(m));
  EXPECT_TRUE(check_stabilizability(m));
  EXPECT_EQ(m, random_system(10, 5, 1.25, 20070611));
}

TEST(SystemJson, RoundTrip) {
  Engine rng(5);
  const SystemModel m = testing::random_model(rng, 3, 2, 1.1);
  EXPECT_EQ(system_from_json(system_to_json(m)), m);
}

TEST(SystemJson, ReportsAllProblems) {
  const auto j = nlohmann::json::parse(R"({"A": [[1, 2]], "C": [[1]], "Q": [[1, 2], [3, 1]], "R": [[-1]]})");
  try {
    system_from_json(j);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_GE(e.problems().size(), 2u);
    const std::string what = e.what();
    EXPECT_NE(what.find("not symmetric"), std::string::npos) << what;
    EXPECT_NE(what.find("[0][1]"), std::string::npos) << what;
  }
}

}  // namespace
}  // namespace rre
