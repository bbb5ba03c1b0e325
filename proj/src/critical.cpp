#include "rre/critical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rre {

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

void check_gain(const SystemModel& m, const Eigen::MatrixXd& gain) {
  if (gain.rows() != m.state_dim() || gain.cols() != m.output_dim()) {
    throw DimensionError("gain must be " + std::to_string(m.state_dim()) + "x" +
                         std::to_string(m.output_dim()));
  }
}

void check_rate(double gamma_bar) {
  if (!(gamma_bar >= 0.0 && gamma_bar <= 1.0)) {
    throw ValidationError("gamma_bar must lie in [0, 1]");
  }
}

// Power iteration on the cone-preserving map X -> (1-g) A X A' + g F X F'.
// Its Perron eigenvector is PSD, so starting from I converges to it.
double operator_spectral_radius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& f,
                                double gamma_bar) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(n, n) / std::sqrt(static_cast<double>(n));
  double estimate = 0.0;
  for (int k = 0; k < 100000; ++k) {
    Eigen::MatrixXd y = (1.0 - gamma_bar) * (a * x * a.transpose()) +
                        gamma_bar * (f * x * f.transpose());
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    if (!std::isfinite(norm)) throw NumericalError("power iteration overflowed");
    const double prev = estimate;
    estimate = norm;
    x = y / norm;
    if (k > 10 && std::abs(estimate - prev) <= 1e-13 * estimate) return estimate;
  }
  return estimate;
}

}  // namespace

double lower_bound(const SystemModel& m) {
  const double alpha = spectral_abscissa(m);
  if (alpha <= 1.0) return 0.0;
  return 1.0 - 1.0 / (alpha * alpha);
}

SymMatrix phi_operator(const SystemModel& m, double gamma_bar, const Eigen::MatrixXd& gain,
                       const SymMatrix& x) {
  check_gain(m, gain);
  check_rate(gamma_bar);
  if (x.dim() != m.state_dim()) throw DimensionError("X has wrong dimension");
  const Eigen::MatrixXd& a = m.A();
  const Eigen::MatrixXd f = a + gain * m.C();
  const Eigen::MatrixXd v = m.Q().mat() + gain * m.R().mat() * gain.transpose();
  const Eigen::MatrixXd open = a * x.mat() * a.transpose() + m.Q().mat();
  const Eigen::MatrixXd closed = f * x.mat() * f.transpose() + v;
  return SymMatrix((1.0 - gamma_bar) * open + gamma_bar * closed);
}

double mixed_spectral_radius(const SystemModel& m, double gamma_bar,
                             const Eigen::MatrixXd& gain) {
  check_gain(m, gain);
  check_rate(gamma_bar);
  const Eigen::MatrixXd& a = m.A();
  const Eigen::MatrixXd f = a + gain * m.C();
  if (m.state_dim() > kDenseKroneckerMaxDim) {
    return operator_spectral_radius(a, f, gamma_bar);
  }
  const Eigen::MatrixXd lin = (1.0 - gamma_bar) * kron(a, a) + gamma_bar * kron(f, f);
  if (lin.rows() == 1) return std::abs(lin(0, 0));
  Eigen::EigenSolver<Eigen::MatrixXd> es(lin, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigensolver failed on the Kronecker operator");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Feasibility feasibility(const SystemModel& m, double gamma_bar, const Eigen::MatrixXd& gain) {
  Feasibility out;
  out.spectral_radius = mixed_spectral_radius(m, gamma_bar, gain);
  out.feasible = out.spectral_radius < 1.0;
  return out;
}

CriticalBounds upper_bound_with_gain(const SystemModel& m, const Eigen::MatrixXd& gain,
                                     double bisect_tol) {
  check_gain(m, gain);
  if (!(bisect_tol > 0.0)) throw ValidationError("bisect_tol must be > 0");

  CriticalBounds b;
  b.alpha = spectral_abscissa(m);
  b.lower = lower_bound(m);
  b.gain_used = gain;

  constexpr int kGrid = 10;
  std::vector<bool> grid(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    grid[i] = feasibility(m, static_cast<double>(i) / (kGrid - 1), gain).feasible;
  }
  if (!grid.back()) {
    throw NumericalError(
        "phi operator is not contracting even at arrival rate 1; the gain does not "
        "stabilize A + K C");
  }
  for (int i = 1; i < kGrid; ++i) {
    if (grid[i - 1] && !grid[i]) b.monotone_on_grid = false;
  }
  const int first = static_cast<int>(std::find(grid.begin(), grid.end(), true) - grid.begin());

  double hi = static_cast<double>(first) / (kGrid - 1);
  if (first > 0) {
    double lo = static_cast<double>(first - 1) / (kGrid - 1);
    while (hi - lo > bisect_tol) {
      const double mid = 0.5 * (lo + hi);
      (feasibility(m, mid, gain).feasible ? hi : lo) = mid;
    }
  }
  b.upper = hi;
  b.spectral_radius_at_upper = mixed_spectral_radius(m, hi, gain);

  std::ostringstream notes;
  notes << "upper bound is the feasibility threshold for a fixed gain (not optimized over "
           "gains), bracketed on a 10-point grid and bisected to "
        << bisect_tol << "; stochastic boundedness threshold is "
        << kStochasticBoundednessCritical << " for stabilizable, detectable systems";
  if (!b.monotone_on_grid) notes << "; WARNING: feasibility was not monotone on the grid";
  b.method_notes = notes.str();
  return b;
}

CriticalBounds upper_bound(const SystemModel& m, double bisect_tol, bool refine_gain) {
  const DareSolution dare = solve_dare(m);
  CriticalBounds best = upper_bound_with_gain(m, dare.gain, bisect_tol);
  best.method_notes = "gain = steady-state Kalman gain; " + best.method_notes;
  if (!refine_gain) return best;
  for (int i = 0; i <= 10; ++i) {
    const double scale = 0.5 + 0.1 * i;
    try {
      CriticalBounds cand = upper_bound_with_gain(m, scale * dare.gain, bisect_tol);
      if (cand.upper < best.upper) {
        std::ostringstream notes;
        notes << "gain = " << scale << " x steady-state Kalman gain (scan over [0.5, 1.5]); "
              << cand.method_notes;
        cand.method_notes = notes.str();
        best = std::move(cand);
      }
    } catch (const NumericalError&) {
      // This scaling does not stabilize A + K C; skip it.
    }
  }
  return best;
}

nlohmann::json CriticalBounds::to_json() const {
  return nlohmann::json{{"lower", lower},
                        {"upper", upper},
                        {"alpha", alpha},
                        {"gain", matrix_to_json(gain_used)},
                        {"spectral_radius_at_upper", spectral_radius_at_upper},
                        {"gamma_sb", kStochasticBoundednessCritical},
                        {"monotone_on_grid", monotone_on_grid},
                        {"notes", method_notes}};
}

}  // namespace rre
