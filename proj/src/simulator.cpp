#include "rre/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "rre/parallel.hpp"

namespace rre {

void ArrivalProcess::validate() const {
  if (!(gamma_bar >= 0.0 && gamma_bar <= 1.0)) {
    throw ValidationError("gamma_bar must lie in [0, 1], got " + std::to_string(gamma_bar));
  }
}

ArrivalSampler::ArrivalSampler(const ArrivalProcess& ap)
    : gamma_bar_(ap.gamma_bar), rng_(ap.seed, ap.stream, StreamPurpose::kArrivals) {
  ap.validate();
}

std::vector<std::uint8_t> sample_arrivals(const ArrivalProcess& ap, int horizon) {
  if (horizon < 0) throw ValidationError("horizon must be >= 0");
  ArrivalSampler sampler(ap);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(horizon));
  for (auto& g : out) g = sampler.next() ? 1 : 0;
  return out;
}

namespace {

void check_p0(const SystemModel& m, const SymMatrix& p0) {
  if (p0.dim() != m.state_dim()) {
    throw DimensionError("initial covariance has dimension " + std::to_string(p0.dim()) +
                         ", system has " + std::to_string(m.state_dim()) + " states");
  }
  if (!p0.is_psd()) throw ValidationError("initial covariance must be positive semidefinite");
}

}  // namespace

CovTrajectory run_rre(const SystemModel& m, const std::vector<std::uint8_t>& gammas,
                      const SymMatrix& p0) {
  check_p0(m, p0);
  const double n = m.state_dim();
  if ((static_cast<double>(gammas.size()) + 1.0) * n * n > kMaxRetainedEntries) {
    throw ValidationError("trajectory too large to retain; stream it instead");
  }
  CovTrajectory traj;
  traj.p0 = p0;
  traj.gammas = gammas;
  traj.covs.reserve(gammas.size() + 1);
  traj.covs.push_back(p0);
  MapEvaluator ev(m);
  Eigen::MatrixXd next;
  for (std::uint8_t g : gammas) {
    ev.apply(g != 0, traj.covs.back().mat(), next);
    traj.covs.emplace_back(next);
  }
  return traj;
}

CovTrajectory run_rre(const SystemModel& m, const ArrivalProcess& ap,
                      const SymMatrix& p0, int horizon) {
  return run_rre(m, sample_arrivals(ap, horizon), p0);
}

void stream_rre(const SystemModel& m, const ArrivalProcess& ap, const SymMatrix& p0,
                int horizon, const RreVisitor& visit) {
  check_p0(m, p0);
  if (horizon < 0) throw ValidationError("horizon must be >= 0");
  ArrivalSampler arrivals(ap);
  MapEvaluator ev(m);
  Eigen::MatrixXd cur = p0.mat();
  Eigen::MatrixXd next;
  for (int t = 0; t < horizon; ++t) {
    const bool g = arrivals.next();
    visit(t, g, cur);
    ev.apply(g, cur, next);
    cur.swap(next);
  }
  visit(horizon, std::nullopt, cur);
}

void write_trajectory_csv(std::ostream& out, const SystemModel& m,
                          const ArrivalProcess& ap, const SymMatrix& p0, int horizon,
                          bool full_matrix) {
  const int n = m.state_dim();
  out << "t,gamma_t,trace,lambda_max";
  if (full_matrix) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out << ",p_" << i << "_" << j;
  }
  out << "\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  stream_rre(m, ap, p0, horizon, [&](int t, std::optional<bool> g, const Eigen::MatrixXd& p) {
    out << t << ",";
    if (g) out << (*g ? 1 : 0);
    const double lmax =
        n == 1 ? p(0, 0)
               : Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p, Eigen::EigenvaluesOnly)
                     .eigenvalues()
                     .maxCoeff();
    out << "," << num(p.trace());
    out << "," << num(lmax);
    if (full_matrix) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out << "," << num(p(i, j));
    }
    out << "\n";
  });
}

std::vector<KernelAtom> transition_kernel(const SystemModel& m, double gamma_bar,
                                          const SymMatrix& x) {
  ArrivalProcess{gamma_bar, 0, 0}.validate();
  return {KernelAtom{lyapunov_map(m, x), 1.0 - gamma_bar},
          KernelAtom{riccati_map(m, x), gamma_bar}};
}

FilterRun run_filter(const SystemModel& m, const ArrivalProcess& ap,
                     std::uint64_t noise_seed, int horizon, const SymMatrix& p0,
                     std::uint64_t noise_stream) {
  if (horizon < 1) throw ValidationError("filter horizon must be >= 1");
  check_p0(m, p0);
  const int n = m.state_dim();
  const int p = m.output_dim();
  const Eigen::MatrixXd& a = m.A();
  const Eigen::MatrixXd& c = m.C();
  const Eigen::MatrixXd q_root = m.Q().sqrt_psd().mat();
  const Eigen::MatrixXd r_root = m.R().sqrt_psd().mat();
  const Eigen::MatrixXd p0_root = p0.sqrt_psd().mat();

  RandomStream noise(noise_seed, noise_stream, StreamPurpose::kNoise);
  auto gaussian = [&](int dim, const Eigen::MatrixXd& root) {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) z(i) = noise.normal();
    return Eigen::VectorXd(root * z);
  };

  FilterRun run;
  run.arrivals = sample_arrivals(ap, horizon);
  run.covs = run_rre(m, run.arrivals, p0).covs;
  run.states.reserve(horizon + 1);
  run.estimates.reserve(horizon + 1);
  run.errors.reserve(horizon + 1);
  run.observations.reserve(horizon);

  MapEvaluator ev(m);
  Eigen::VectorXd x = gaussian(n, p0_root);
  Eigen::VectorXd xhat = Eigen::VectorXd::Zero(n);
  // The error is propagated by its own recursion rather than as x - xhat:
  // with unstable A both grow geometrically and the difference cancels.
  Eigen::VectorXd e = x;
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd w = gaussian(n, q_root);
    const Eigen::VectorXd v = gaussian(p, r_root);
    const Eigen::VectorXd y = c * x + v;
    run.states.push_back(x);
    run.estimates.push_back(xhat);
    run.errors.push_back(e);
    run.observations.push_back(y);

    Eigen::VectorXd next_hat = a * xhat;
    Eigen::VectorXd next_e = a * e + w;
    if (run.arrivals[t]) {
      const Eigen::MatrixXd gain = ev.predictor_gain(run.covs[t].mat());
      next_hat += gain * (y - c * xhat);
      next_e -= gain * (c * e + v);
    }
    xhat = std::move(next_hat);
    e = std::move(next_e);
    x = a * x + w;
  }
  run.states.push_back(x);
  run.estimates.push_back(xhat);
  run.errors.push_back(e);
  return run;
}

std::vector<SymMatrix> filter_error_covariance(const SystemModel& m,
                                               const ArrivalProcess& ap,
                                               std::uint64_t noise_seed,
                                               const SymMatrix& p0,
                                               const std::vector<int>& times,
                                               int replicates, unsigned threads) {
  if (replicates < 1) throw ValidationError("replicates must be >= 1");
  if (times.empty()) return {};
  int horizon = 1;
  for (int t : times) {
    if (t < 0) throw ValidationError("times must be >= 0");
    horizon = std::max(horizon, t);
  }
  const int n = m.state_dim();
  // Per-replicate outer products, reduced in index order afterwards.
  std::vector<std::vector<Eigen::MatrixXd>> outer(
      static_cast<std::size_t>(replicates));
  parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t r) {
    const FilterRun run = run_filter(m, ap, noise_seed, horizon, p0, r);
    auto& slot = outer[r];
    slot.reserve(times.size());
    for (int t : times) {
      const Eigen::VectorXd& e = run.errors[static_cast<std::size_t>(t)];
      slot.emplace_back(e * e.transpose());
    }
  });
  std::vector<SymMatrix> out;
  out.reserve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
    for (const auto& slot : outer) sum += slot[k];
    out.emplace_back(sum / static_cast<double>(replicates));
  }
  return out;
}

}  // namespace rre
