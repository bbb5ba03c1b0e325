#include "rre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>

#include "rre/parallel.hpp"

namespace rre {

namespace {

double max_eigenvalue(const Eigen::MatrixXd& p) {
  if (p.rows() == 1) return p(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double max_abs_eigenvalue(const Eigen::MatrixXd& p) {
  if (p.rows() == 1) return std::abs(p(0, 0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

std::string Functional::name() const {
  switch (kind) {
    case Kind::kTrace: return "trace";
    case Kind::kLambdaMax: return "lambda_max";
    case Kind::kSpectralNorm: return "spectral_norm";
    case Kind::kMeanMatrix: return "mean_matrix";
    case Kind::kIndicatorAbove: {
      std::ostringstream os;
      os.precision(17);
      os << "indicator_above:" << threshold;
      return os.str();
    }
  }
  return "unknown";
}

double Functional::evaluate(const Eigen::MatrixXd& p) const {
  switch (kind) {
    case Kind::kTrace: return p.trace();
    case Kind::kLambdaMax: return max_eigenvalue(p);
    case Kind::kSpectralNorm: return max_abs_eigenvalue(p);
    case Kind::kIndicatorAbove: return p.trace() > threshold ? 1.0 : 0.0;
    case Kind::kMeanMatrix: break;
  }
  throw ValidationError("functional '" + name() + "' is not scalar-valued");
}

Functional Functional::parse(const std::string& s) {
  if (s == "trace") return trace();
  if (s == "lambda_max") return lambda_max();
  if (s == "spectral_norm") return spectral_norm();
  if (s == "mean_matrix") return mean_matrix();
  const std::string prefix = "indicator_above:";
  if (s.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const std::string rest = s.substr(prefix.size());
      const double x = std::stod(rest, &used);
      if (used == rest.size()) return indicator_above(x);
    } catch (const std::exception&) {
    }
  }
  throw ValidationError("unknown functional '" + s + "'");
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples)
    : samples_(std::move(samples)) {
  for (double v : samples_) {
    if (std::isnan(v)) throw ValidationError("empirical distribution sample is NaN");
  }
  std::sort(samples_.begin(), samples_.end());
}

double EmpiricalDistribution::cdf(double x) const {
  if (samples_.empty()) throw ValidationError("empty empirical distribution");
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
  return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

double EmpiricalDistribution::quantile(double q) const {
  if (samples_.empty()) throw ValidationError("empty empirical distribution");
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in (0, 1]");
  const double n = static_cast<double>(samples_.size());
  auto idx = static_cast<std::size_t>(std::ceil(q * n));
  idx = std::clamp<std::size_t>(idx, 1, samples_.size());
  return samples_[idx - 1];
}

double EmpiricalDistribution::mean() const {
  if (samples_.empty()) throw ValidationError("empty empirical distribution");
  double sum = 0.0;
  for (double v : samples_) sum += v;
  return sum / static_cast<double>(samples_.size());
}

double EmpiricalDistribution::variance() const {
  if (samples_.size() < 2) return 0.0;
  const double mu = mean();
  double ss = 0.0;
  for (double v : samples_) ss += (v - mu) * (v - mu);
  return ss / static_cast<double>(samples_.size() - 1);
}

double EmpiricalDistribution::standard_error() const {
  if (samples_.empty()) throw ValidationError("empty empirical distribution");
  return std::sqrt(variance() / static_cast<double>(samples_.size()));
}

double ks_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_distance needs non-empty samples");
  const auto& xa = a.samples();
  const auto& xb = b.samples();
  const double na = static_cast<double>(xa.size());
  const double nb = static_cast<double>(xb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < xa.size() && j < xb.size()) {
    const double x = std::min(xa[i], xb[j]);
    while (i < xa.size() && xa[i] == x) ++i;
    while (j < xb.size() && xb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double hill_tail_index(std::vector<double> samples, std::size_t k) {
  if (k == 0 || samples.size() <= k) return std::numeric_limits<double>::quiet_NaN();
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(k),
                   samples.end(), std::greater<>());
  const double pivot = samples[k];
  if (!(pivot > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(samples[i] / pivot);
  if (sum <= 0.0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(k) / sum;
}

ErgodicEstimate ergodic_average(const SystemModel& m, const ArrivalProcess& ap,
                                const SymMatrix& p0, const Functional& h, int burn_in,
                                int horizon) {
  ap.validate();
  std::vector<std::string> problems;
  if (!(ap.gamma_bar > 0.0)) problems.push_back("ergodic averaging needs gamma_bar > 0");
  if (burn_in < 0) problems.push_back("burn_in must be >= 0");
  if (horizon <= burn_in) problems.push_back("horizon must exceed burn_in");
  if (p0.dim() != m.state_dim()) problems.push_back("initial covariance has wrong dimension");
  if (!problems.empty()) throw ValidationError(problems);

  const auto count = static_cast<std::size_t>(horizon - burn_in);
  const int midpoint = burn_in + (horizon - burn_in) / 2;
  const std::size_t hill_k = std::max<std::size_t>(
      10, static_cast<std::size_t>(std::sqrt(static_cast<double>(count))));

  ArrivalSampler arrivals(ap);
  MapEvaluator ev(m);
  Eigen::MatrixXd cur = p0.mat();
  Eigen::MatrixXd next;
  Eigen::MatrixXd matrix_sum;
  if (!h.scalar()) matrix_sum = Eigen::MatrixXd::Zero(m.state_dim(), m.state_dim());

  // Running sum of the monitored scalar (h itself, or the trace for mean_matrix).
  double sum = 0.0;
  double mid_mean = 0.0;
  bool finite = true;
  // Min-heap holding the hill_k + 1 largest monitored values.
  std::priority_queue<double, std::vector<double>, std::greater<>> top;

  for (int t = 1; t <= horizon; ++t) {
    ev.apply(arrivals.next(), cur, next);
    cur.swap(next);
    if (t <= burn_in) continue;
    const double v = h.scalar() ? h.evaluate(cur) : cur.trace();
    if (!h.scalar()) matrix_sum += cur;
    if (!std::isfinite(v)) {
      finite = false;
      break;
    }
    sum += v;
    if (t == midpoint) mid_mean = sum / static_cast<double>(t - burn_in);
    if (!h.bounded()) {
      if (top.size() < hill_k + 1) {
        top.push(v);
      } else if (v > top.top()) {
        top.pop();
        top.push(v);
      }
    }
  }

  ErgodicEstimate est;
  est.functional = h;
  est.burn_in = burn_in;
  est.horizon = horizon;
  est.gamma_bar = ap.gamma_bar;
  est.seed = ap.seed;
  const double n = static_cast<double>(count);
  if (h.scalar()) {
    est.value = sum / n;
  } else {
    est.value = SymMatrix(matrix_sum / n);
  }
  if (!finite) {
    est.divergent = true;
    est.diagnostic = "non-finite values along the trajectory";
    est.value = std::numeric_limits<double>::infinity();
    return est;
  }
  if (h.bounded()) {
    est.tail_index = std::numeric_limits<double>::infinity();
    return est;
  }

  const double end_mean = sum / n;
  est.growth_ratio = mid_mean > 0.0 ? end_mean / mid_mean : 1.0;
  std::vector<double> largest;
  largest.reserve(top.size());
  while (!top.empty()) {
    largest.push_back(top.top());
    top.pop();
  }
  est.tail_index = largest.size() == hill_k + 1
                       ? hill_tail_index(std::move(largest), hill_k)
                       : std::numeric_limits<double>::quiet_NaN();

  std::ostringstream diag;
  if (est.growth_ratio > kDivergenceGrowth) {
    est.divergent = true;
    diag << "running mean grew " << est.growth_ratio << "x over the second half; ";
  }
  if (est.tail_index < 1.0) {
    est.divergent = true;
    diag << "tail index " << est.tail_index << " < 1 (infinite mean); ";
  }
  est.diagnostic = est.divergent ? diag.str() : "none";
  if (est.divergent) est.diagnostic.resize(est.diagnostic.size() - 2);
  return est;
}

EnsembleSamples ensemble_sample(const SystemModel& m, const EnsembleRequest& req) {
  ArrivalProcess{req.gamma_bar, req.seed, 0}.validate();
  std::vector<std::string> problems;
  if (req.replicates < 1) problems.push_back("replicates must be >= 1");
  if (req.p0.dim() != m.state_dim()) problems.push_back("initial covariance has wrong dimension");
  if (req.functionals.empty()) problems.push_back("at least one functional is required");
  for (const auto& f : req.functionals) {
    if (!f.scalar()) problems.push_back("ensemble functionals must be scalar-valued");
  }
  if (req.times.empty()) problems.push_back("at least one sampling time is required");
  if (!std::is_sorted(req.times.begin(), req.times.end())) {
    problems.push_back("sampling times must be non-decreasing");
  }
  if (!req.times.empty() && req.times.front() < 0) problems.push_back("sampling times must be >= 0");
  if (!problems.empty()) throw ValidationError(problems);

  const auto reps = static_cast<std::size_t>(req.replicates);
  EnsembleSamples out(req.times.size(),
                      std::vector<std::vector<double>>(req.functionals.size(),
                                                       std::vector<double>(reps)));
  parallel_for(reps, req.threads, [&](std::size_t r) {
    ArrivalSampler arrivals(ArrivalProcess{req.gamma_bar, req.seed, r});
    MapEvaluator ev(m);
    Eigen::MatrixXd cur = req.p0.mat();
    Eigen::MatrixXd next;
    int t = 0;
    for (std::size_t k = 0; k < req.times.size(); ++k) {
      for (; t < req.times[k]; ++t) {
        ev.apply(arrivals.next(), cur, next);
        cur.swap(next);
      }
      for (std::size_t f = 0; f < req.functionals.size(); ++f) {
        out[k][f][r] = req.functionals[f].evaluate(cur);
      }
    }
  });
  return out;
}

EmpiricalDistribution ensemble_at_time(const SystemModel& m, double gamma_bar,
                                       const SymMatrix& p0, int t, int replicates,
                                       const Functional& h, std::uint64_t seed,
                                       unsigned threads) {
  EnsembleRequest req;
  req.gamma_bar = gamma_bar;
  req.p0 = p0;
  req.times = {t};
  req.replicates = replicates;
  req.seed = seed;
  req.functionals = {h};
  req.threads = threads;
  return EmpiricalDistribution(std::move(ensemble_sample(m, req)[0][0]));
}

std::vector<SymMatrix> ensemble_matrices_at_time(const SystemModel& m, double gamma_bar,
                                                 const SymMatrix& p0, int t,
                                                 int replicates, std::uint64_t seed,
                                                 unsigned threads) {
  ArrivalProcess{gamma_bar, seed, 0}.validate();
  if (replicates < 1) throw ValidationError("replicates must be >= 1");
  if (t < 0) throw ValidationError("sampling time must be >= 0");
  if (p0.dim() != m.state_dim()) throw DimensionError("initial covariance has wrong dimension");
  std::vector<SymMatrix> out(static_cast<std::size_t>(replicates));
  parallel_for(out.size(), threads, [&](std::size_t r) {
    ArrivalSampler arrivals(ArrivalProcess{gamma_bar, seed, r});
    MapEvaluator ev(m);
    Eigen::MatrixXd cur = p0.mat();
    Eigen::MatrixXd next;
    for (int s = 0; s < t; ++s) {
      ev.apply(arrivals.next(), cur, next);
      cur.swap(next);
    }
    out[r] = SymMatrix(std::move(cur));
  });
  return out;
}

double ExceedanceTable::sup_over_time(std::size_t j) const {
  double best = 0.0;
  for (const auto& row : frequency) best = std::max(best, row.at(j));
  return best;
}

ExceedanceTable boundedness_probe(const SystemModel& m, double gamma_bar,
                                  const SymMatrix& p0, const std::vector<double>& thresholds,
                                  const std::vector<int>& times, int replicates,
                                  std::uint64_t seed, unsigned threads) {
  std::vector<std::string> problems;
  if (thresholds.empty()) problems.push_back("at least one threshold is required");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      problems.push_back("thresholds must be strictly increasing");
      break;
    }
  }
  if (replicates < 1000) problems.push_back("boundedness probe needs >= 1000 replicates");
  if (!problems.empty()) throw ValidationError(problems);

  std::vector<int> sorted_times = times;
  std::sort(sorted_times.begin(), sorted_times.end());
  EnsembleRequest req;
  req.gamma_bar = gamma_bar;
  req.p0 = p0;
  req.times = sorted_times;
  req.replicates = replicates;
  req.seed = seed;
  req.functionals = {Functional::spectral_norm()};
  req.threads = threads;
  const EnsembleSamples samples = ensemble_sample(m, req);

  ExceedanceTable table;
  table.times = sorted_times;
  table.thresholds = thresholds;
  for (const auto& at_time : samples) {
    const EmpiricalDistribution dist(at_time[0]);
    std::vector<double> row;
    row.reserve(thresholds.size());
    for (double level : thresholds) row.push_back(1.0 - dist.cdf(level));
    table.frequency.push_back(std::move(row));
  }
  return table;
}

}  // namespace rre
