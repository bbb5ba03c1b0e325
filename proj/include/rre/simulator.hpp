#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "rre/maps.hpp"
#include "rre/model.hpp"
#include "rre/random.hpp"

namespace rre {

/// i.i.d. Bernoulli(gamma_bar) packet arrivals. Replicate `stream` of a
/// given seed is an independent sequence.
struct ArrivalProcess {
  double gamma_bar = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  void validate() const;
};

/// Draws arrivals one at a time from an ArrivalProcess.
class ArrivalSampler {
 public:
  explicit ArrivalSampler(const ArrivalProcess& ap);
  bool next() { return rng_.uniform() < gamma_bar_; }

 private:
  double gamma_bar_;
  RandomStream rng_;
};

std::vector<std::uint8_t> sample_arrivals(const ArrivalProcess& ap, int horizon);

/// covs[0] = p0 and covs[t + 1] = f(gammas[t], covs[t]).
struct CovTrajectory {
  SymMatrix p0;
  std::vector<std::uint8_t> gammas;
  std::vector<SymMatrix> covs;
};

/// Trajectories whose (T + 1) * n^2 exceeds this many doubles must be
/// streamed instead of retained.
inline constexpr double kMaxRetainedEntries = 1e7;

CovTrajectory run_rre(const SystemModel& m, const ArrivalProcess& ap,
                      const SymMatrix& p0, int horizon);
/// Same recursion driven by a given arrival sequence.
CovTrajectory run_rre(const SystemModel& m, const std::vector<std::uint8_t>& gammas,
                      const SymMatrix& p0);

/**
 * Streaming form of run_rre: calls visit(t, gamma_t, P_t) for t = 0..T, where
 * gamma_t is the arrival applied to P_t (unset at t = T). Nothing is retained.
 */
using RreVisitor =
    std::function<void(int t, std::optional<bool> gamma, const Eigen::MatrixXd& p)>;
void stream_rre(const SystemModel& m, const ArrivalProcess& ap, const SymMatrix& p0,
                int horizon, const RreVisitor& visit);

/**
 * CSV with columns t,gamma_t,trace,lambda_max and, when `full_matrix`,
 * p_i_j for every entry in row-major order. Streams the trajectory, so any
 * horizon is accepted.
 */
void write_trajectory_csv(std::ostream& out, const SystemModel& m,
                          const ArrivalProcess& ap, const SymMatrix& p0, int horizon,
                          bool full_matrix);

struct KernelAtom {
  SymMatrix value;
  double probability = 0.0;
};

/// The two atoms of the one-step law of P_{t+1} given P_t = X:
/// (f0(X), 1 - gamma_bar) then (f1(X), gamma_bar).
std::vector<KernelAtom> transition_kernel(const SystemModel& m, double gamma_bar,
                                          const SymMatrix& x);

/// One sample path of the intermittent-observation Kalman predictor.
struct FilterRun {
  std::vector<Eigen::VectorXd> states;        // x_t, t = 0..T
  std::vector<Eigen::VectorXd> observations;  // y_t, t = 0..T-1
  std::vector<Eigen::VectorXd> estimates;     // xhat_{t|t-1}, t = 0..T
  std::vector<Eigen::VectorXd> errors;        // x_t - xhat_{t|t-1}, t = 0..T
  std::vector<std::uint8_t> arrivals;         // gamma_t, t = 0..T-1
  std::vector<SymMatrix> covs;                // P_t, t = 0..T
};

/**
 * Simulates x_{t+1} = A x_t + w_t, y_t = C x_t + v_t with x_0 ~ N(0, p0),
 * and the predictor
 *   xhat_{t+1|t} = A xhat_{t|t-1} + gamma_t A P_t C'(C P_t C' + R)^{-1}(y_t - C xhat_{t|t-1})
 * started at xhat_{0|-1} = 0. Arrivals come from `ap`; Gaussian noise from
 * the stream keyed by (noise_seed, noise_stream).
 */
FilterRun run_filter(const SystemModel& m, const ArrivalProcess& ap,
                     std::uint64_t noise_seed, int horizon, const SymMatrix& p0,
                     std::uint64_t noise_stream = 0);

/// Sample covariance (about zero mean) of the prediction error at each of
/// `times`, over `replicates` noise streams that share the arrival sequence
/// of `ap`.
std::vector<SymMatrix> filter_error_covariance(const SystemModel& m,
                                               const ArrivalProcess& ap,
                                               std::uint64_t noise_seed,
                                               const SymMatrix& p0,
                                               const std::vector<int>& times,
                                               int replicates, unsigned threads = 0);

}  // namespace rre
