#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rre/model.hpp"
#include "rre/simulator.hpp"

namespace rre {

/// Scalar or matrix summary h(P) of a covariance.
struct Functional {
  enum class Kind { kTrace, kLambdaMax, kSpectralNorm, kIndicatorAbove, kMeanMatrix };

  Kind kind = Kind::kTrace;
  /// Used by kIndicatorAbove: h(P) = 1{trace(P) > threshold}.
  double threshold = 0.0;

  static Functional trace() { return {Kind::kTrace, 0.0}; }
  static Functional lambda_max() { return {Kind::kLambdaMax, 0.0}; }
  static Functional spectral_norm() { return {Kind::kSpectralNorm, 0.0}; }
  static Functional indicator_above(double threshold) {
    return {Kind::kIndicatorAbove, threshold};
  }
  static Functional mean_matrix() { return {Kind::kMeanMatrix, 0.0}; }

  bool bounded() const { return kind == Kind::kIndicatorAbove; }
  bool scalar() const { return kind != Kind::kMeanMatrix; }
  std::string name() const;
  /// Throws for kMeanMatrix.
  double evaluate(const Eigen::MatrixXd& p) const;

  /// Accepts trace, lambda_max, spectral_norm, mean_matrix, indicator_above:<x>.
  static Functional parse(const std::string& s);
};

/// Sorted sample of a scalar functional.
class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  explicit EmpiricalDistribution(std::vector<double> samples);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<double>& samples() const { return samples_; }

  /// Fraction of samples <= x (right-continuous).
  double cdf(double x) const;
  /// Smallest sample s with cdf(s) >= q, q in (0, 1].
  double quantile(double q) const;
  double median() const { return quantile(0.5); }
  double mean() const;
  double variance() const;
  double standard_error() const;
  double min() const { return samples_.front(); }
  double max() const { return samples_.back(); }

 private:
  std::vector<double> samples_;
};

/// sup_x |F_a(x) - F_b(x)|.
double ks_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

/// Hill estimate of the tail index from the k largest positive samples.
/// Returns +inf when the top of the sample is flat.
double hill_tail_index(std::vector<double> samples, std::size_t k);

inline constexpr int kDefaultBurnIn = 200;
/// Running mean growth between the midpoint and the end of the window
/// above which an unbounded functional is flagged.
inline constexpr double kDivergenceGrowth = 10.0;

struct ErgodicEstimate {
  Functional functional;
  int burn_in = 0;
  int horizon = 0;
  double gamma_bar = 0.0;
  std::uint64_t seed = 0;
  std::variant<double, SymMatrix> value;

  bool divergent = false;
  std::string diagnostic;
  /// Running mean at the end of the window over the running mean at its midpoint.
  double growth_ratio = 1.0;
  /// Hill estimate on h(P_t) along the window; < 1 indicates an infinite mean.
  double tail_index = 0.0;

  double scalar_value() const { return std::get<double>(value); }
};

/**
 * Time average (1 / (horizon - burn_in)) * sum h(P_t), t in (burn_in, horizon],
 * along one trajectory. For unbounded h the estimate carries a divergence
 * diagnostic: it fires when values become non-finite, when the running mean
 * grows more than tenfold over the second half of the window, or when the
 * Hill tail index of the visited values (top sqrt(n) order statistics) is
 * below one.
 */
ErgodicEstimate ergodic_average(const SystemModel& m, const ArrivalProcess& ap,
                                const SymMatrix& p0, const Functional& h, int burn_in,
                                int horizon);

struct EnsembleRequest {
  double gamma_bar = 1.0;
  SymMatrix p0;
  /// Sampling times, each >= 0.
  std::vector<int> times;
  int replicates = 1;
  std::uint64_t seed = 0;
  std::vector<Functional> functionals;
  unsigned threads = 0;
};

/// samples[time index][functional index][replicate].
using EnsembleSamples = std::vector<std::vector<std::vector<double>>>;

/// Independent trajectories, replicate r driven by arrival stream r of `seed`.
EnsembleSamples ensemble_sample(const SystemModel& m, const EnsembleRequest& req);

EmpiricalDistribution ensemble_at_time(const SystemModel& m, double gamma_bar,
                                       const SymMatrix& p0, int t, int replicates,
                                       const Functional& h, std::uint64_t seed,
                                       unsigned threads = 0);

std::vector<SymMatrix> ensemble_matrices_at_time(const SystemModel& m, double gamma_bar,
                                                 const SymMatrix& p0, int t,
                                                 int replicates, std::uint64_t seed,
                                                 unsigned threads = 0);

/// Empirical P(||P_t|| > N) with the spectral norm, indexed [t][N].
struct ExceedanceTable {
  std::vector<int> times;
  std::vector<double> thresholds;
  std::vector<std::vector<double>> frequency;

  /// max over times of the frequency at threshold index j.
  double sup_over_time(std::size_t j) const;
};

ExceedanceTable boundedness_probe(const SystemModel& m, double gamma_bar,
                                  const SymMatrix& p0, const std::vector<double>& thresholds,
                                  const std::vector<int>& times, int replicates,
                                  std::uint64_t seed, unsigned threads = 0);

}  // namespace rre
