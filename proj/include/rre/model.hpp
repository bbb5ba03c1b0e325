#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "rre/errors.hpp"

namespace rre {

/// Default relative tolerance for positive-semidefiniteness checks.
inline constexpr double kPsdTol = 1e-9;
/// Default singular-value ratio below which a PBH matrix is rank deficient.
inline constexpr double kPbhTol = 1e-8;
/// Eigenvalues of A with modulus at or above this are treated as unstable.
inline constexpr double kUnstableModulus = 1.0 - 1e-10;

/**
 * Symmetric real matrix. The stored entries are exactly symmetric: every
 * construction path averages the matrix with its transpose.
 */
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Eigen::MatrixXd m);

  static SymMatrix Zero(int n);
  static SymMatrix Identity(int n);
  static SymMatrix Scalar(double value);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.trace(); }
  double frobenius_norm() const { return m_.norm(); }
  /// Largest eigenvalue (not modulus).
  double lambda_max() const;
  double lambda_min() const;
  /// Induced 2-norm, i.e. the largest eigenvalue modulus.
  double spectral_norm() const;
  Eigen::VectorXd eigenvalues() const;

  /// min eigenvalue >= -tol * max(1, spectral norm).
  bool is_psd(double tol = kPsdTol) const;

  /// Symmetric square root with negative eigenvalues clamped to zero.
  SymMatrix sqrt_psd() const;

  bool all_finite() const { return m_.allFinite(); }

  friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
  friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b);
  friend SymMatrix operator*(double s, const SymMatrix& a);
  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  Eigen::MatrixXd m_;
};

/// Averages m with its transpose in place.
void symmetrize(Eigen::MatrixXd& m);

/// Relative Frobenius distance ||a - b||_F / max(1, ||a||_F, ||b||_F).
double relative_distance(const SymMatrix& a, const SymMatrix& b);

/// X <= Y in the Loewner order, up to tol relative to the size of Y - X.
bool loewner_leq(const SymMatrix& x, const SymMatrix& y, double tol = kPsdTol);

/**
 * Linear time-invariant system x' = A x + w, y = C x + v with
 * w ~ N(0, Q) and v ~ N(0, R). R must be positive definite and Q positive
 * semidefinite; construction throws ValidationError otherwise.
 */
class SystemModel {
 public:
  SystemModel(Eigen::MatrixXd a, Eigen::MatrixXd c, SymMatrix q, SymMatrix r);

  const Eigen::MatrixXd& A() const { return a_; }
  const Eigen::MatrixXd& C() const { return c_; }
  const SymMatrix& Q() const { return q_; }
  const SymMatrix& R() const { return r_; }
  int state_dim() const { return static_cast<int>(a_.rows()); }
  int output_dim() const { return static_cast<int>(c_.rows()); }
  bool q_strictly_positive() const { return q_strictly_positive_; }
  bool is_scalar() const { return state_dim() == 1 && output_dim() == 1; }

  friend bool operator==(const SystemModel& a, const SystemModel& b) {
    return a.a_ == b.a_ && a.c_ == b.c_ && a.q_ == b.q_ && a.r_ == b.r_;
  }

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd c_;
  SymMatrix q_;
  SymMatrix r_;
  bool q_strictly_positive_ = false;
};

/// A = sqrt(2), C = Q = R = 1.
SystemModel scalar_example();

/**
 * Seeded random system with n states and m outputs: A is Gaussian rescaled
 * so that its spectral radius equals `alpha`, C is Gaussian, Q = R = I.
 * Draws are repeated until (A, C) is detectable.
 */
SystemModel random_system(int n, int m, double alpha, std::uint64_t seed);

/// Parses {"A": [[...]], "C": [[...]], "Q": [[...]], "R": [[...]]}.
/// Every problem found is reported, each prefixed with `path`.
SystemModel system_from_json(const nlohmann::json& j,
                             const std::string& path = "system");
nlohmann::json system_to_json(const SystemModel& m);

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);

/// PBH test on (A, C) over the eigenvalues with |lambda| >= 1 - 1e-10.
bool check_detectability(const SystemModel& m, double tol = kPbhTol);
/// PBH test on (A, Q^{1/2}).
bool check_stabilizability(const SystemModel& m, double tol = kPbhTol);
/// max |lambda_i(A)|.
double spectral_abscissa(const SystemModel& m);

}  // namespace rre
