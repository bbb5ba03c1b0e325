#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "rre/maps.hpp"
#include "rre/model.hpp"

namespace rre {

inline constexpr double kBisectTol = 1e-6;
/// Systems with more states than this use power iteration for the spectral
/// radius instead of a dense n^2 x n^2 eigensolve.
inline constexpr int kDenseKroneckerMaxDim = 30;

/// Arrival rate above which the covariance is stochastically bounded, for
/// stabilizable and detectable systems: any positive rate suffices.
inline constexpr double kStochasticBoundednessCritical = 0.0;

/// max(0, 1 - 1 / alpha^2) with alpha the spectral radius of A.
double lower_bound(const SystemModel& m);

/// (1 - g)(A X A' + Q) + g(F X F' + V), F = A + K C, V = Q + K R K'.
SymMatrix phi_operator(const SystemModel& m, double gamma_bar, const Eigen::MatrixXd& gain,
                       const SymMatrix& x);

/// Spectral radius of (1 - g) A(x)A + g F(x)F.
double mixed_spectral_radius(const SystemModel& m, double gamma_bar,
                             const Eigen::MatrixXd& gain);

struct Feasibility {
  bool feasible = false;
  double spectral_radius = 0.0;
};

/// X >> phi(K, X) has a solution iff the linear part of phi is a contraction.
Feasibility feasibility(const SystemModel& m, double gamma_bar, const Eigen::MatrixXd& gain);

struct CriticalBounds {
  double lower = 0.0;
  double upper = 1.0;
  double alpha = 0.0;
  Eigen::MatrixXd gain_used;
  double spectral_radius_at_upper = 0.0;
  /// Feasibility was monotone on the 10-point grid used to bracket the infimum.
  bool monotone_on_grid = true;
  std::string method_notes;

  nlohmann::json to_json() const;
};

/**
 * Smallest arrival rate (to within bisect_tol) at which X >> phi(K, X) is
 * feasible for the fixed gain K. Always a valid upper bound on the mean
 * stability threshold; possibly loose because K is not optimized.
 * Throws NumericalError if infeasible even at rate 1.
 */
CriticalBounds upper_bound_with_gain(const SystemModel& m, const Eigen::MatrixXd& gain,
                                     double bisect_tol = kBisectTol);

/// upper_bound_with_gain with the steady-state Kalman gain from solve_dare.
/// With `refine_gain`, also scans scaled gains c K, c in [0.5, 1.5], and
/// keeps the smallest bound.
CriticalBounds upper_bound(const SystemModel& m, double bisect_tol = kBisectTol,
                           bool refine_gain = false);

}  // namespace rre
