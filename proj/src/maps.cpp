#include "rre/maps.hpp"

#include <algorithm>
#include <cmath>

namespace rre {

std::size_t Word::ones() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

Word Word::prepend(std::uint8_t outer) const {
  Word w;
  w.bits.reserve(bits.size() + 1);
  w.bits.push_back(outer);
  w.bits.insert(w.bits.end(), bits.begin(), bits.end());
  return w;
}

std::string Word::to_string() const {
  std::string s(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] ? '1' : '0';
  return s;
}

Word Word::parse(std::string_view s) {
  Word w;
  w.bits.reserve(s.size());
  for (char ch : s) {
    if (ch != '0' && ch != '1') {
      throw ValidationError("word may only contain '0' and '1', got '" + std::string(s) + "'");
    }
    w.bits.push_back(ch == '1' ? 1 : 0);
  }
  return w;
}

MapEvaluator::MapEvaluator(const SystemModel& m) : model_(m) {}

void MapEvaluator::lyapunov(const Eigen::MatrixXd& x, Eigen::MatrixXd& out) {
  if (x.rows() != model_.state_dim() || x.cols() != model_.state_dim()) {
    throw DimensionError("map argument has wrong dimension");
  }
  const Eigen::MatrixXd& a = model_.A();
  ax_.noalias() = a * x;
  out.noalias() = ax_ * a.transpose();
  out += model_.Q().mat();
  symmetrize(out);
}

void MapEvaluator::factor_innovation(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd& a = model_.A();
  const Eigen::MatrixXd& c = model_.C();
  ax_.noalias() = a * x;
  axc_.noalias() = ax_ * c.transpose();
  innov_.noalias() = c * x * c.transpose();
  innov_ += model_.R().mat();
  llt_.compute(innov_);
  if (llt_.info() != Eigen::Success) {
    throw NumericalError("C X C' + R is not positive definite");
  }
}

void MapEvaluator::riccati(const Eigen::MatrixXd& x, Eigen::MatrixXd& out) {
  if (x.rows() != model_.state_dim() || x.cols() != model_.state_dim()) {
    throw DimensionError("map argument has wrong dimension");
  }
  factor_innovation(x);
  // With L L' = C X C' + R and W = L^{-1} C X A', the correction is W'W.
  w_ = axc_.transpose();
  llt_.matrixL().solveInPlace(w_);
  out.noalias() = ax_ * model_.A().transpose();
  out += model_.Q().mat();
  out.noalias() -= w_.transpose() * w_;
  symmetrize(out);
}

Eigen::MatrixXd MapEvaluator::predictor_gain(const Eigen::MatrixXd& x) {
  factor_innovation(x);
  // (C X C' + R)^{-1} C X A', transposed.
  return llt_.solve(axc_.transpose()).transpose();
}

namespace {

void check_arg(const SystemModel& m, const SymMatrix& x) {
  if (x.dim() != m.state_dim()) {
    throw DimensionError("matrix is " + std::to_string(x.dim()) + "x" +
                         std::to_string(x.dim()) + ", system has " +
                         std::to_string(m.state_dim()) + " states");
  }
}

}  // namespace

SymMatrix lyapunov_map(const SystemModel& m, const SymMatrix& x) {
  check_arg(m, x);
  MapEvaluator ev(m);
  Eigen::MatrixXd out;
  ev.lyapunov(x.mat(), out);
  return SymMatrix(std::move(out));
}

SymMatrix riccati_map(const SystemModel& m, const SymMatrix& x) {
  check_arg(m, x);
  MapEvaluator ev(m);
  Eigen::MatrixXd out;
  ev.riccati(x.mat(), out);
  return SymMatrix(std::move(out));
}

SymMatrix switched_map(const SystemModel& m, bool gamma, const SymMatrix& x) {
  return gamma ? riccati_map(m, x) : lyapunov_map(m, x);
}

SymMatrix apply_word(const SystemModel& m, const Word& w, const SymMatrix& x) {
  check_arg(m, x);
  MapEvaluator ev(m);
  Eigen::MatrixXd cur = x.mat();
  Eigen::MatrixXd next;
  for (auto it = w.bits.rbegin(); it != w.bits.rend(); ++it) {
    ev.apply(*it != 0, cur, next);
    cur.swap(next);
  }
  return SymMatrix(std::move(cur));
}

Eigen::MatrixXd kalman_gain(const SystemModel& m, const SymMatrix& p) {
  check_arg(m, p);
  MapEvaluator ev(m);
  return -ev.predictor_gain(p.mat());
}

DareSolution solve_dare(const SystemModel& m, double tol, int max_iter, bool force) {
  if (!force) {
    std::vector<std::string> problems;
    if (!check_stabilizability(m)) problems.push_back("(A, Q^{1/2}) is not stabilizable");
    if (!check_detectability(m)) problems.push_back("(A, C) is not detectable");
    if (!problems.empty()) throw ValidationError(problems);
  }
  if (!(tol >= 0.0) || max_iter < 1) {
    throw ValidationError("solve_dare needs tol >= 0 and max_iter >= 1");
  }

  MapEvaluator ev(m);
  Eigen::MatrixXd x = m.Q().mat();
  Eigen::MatrixXd next;
  Eigen::MatrixXd scratch;
  double residual = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    ev.riccati(x, next);
    residual = (next - x).norm() / std::max(1.0, x.norm());
    if (!std::isfinite(residual)) {
      throw ConvergenceError("Riccati iteration produced non-finite values",
                             SymMatrix(x), residual);
    }
    if (residual <= tol) {
      // Polish while the step still shrinks; stops at the rounding floor.
      for (; residual > 0.0 && k < max_iter; ++k) {
        ev.riccati(next, scratch);
        const double r = (scratch - next).norm() / std::max(1.0, next.norm());
        if (!(r < residual)) break;
        x.swap(next);
        next.swap(scratch);
        residual = r;
      }
      DareSolution sol;
      sol.p_star = SymMatrix(x);
      sol.gain = kalman_gain(m, sol.p_star);
      sol.iterations = k;
      sol.residual = residual;
      return sol;
    }
    x.swap(next);
  }
  throw ConvergenceError("Riccati iteration did not reach tolerance in " +
                             std::to_string(max_iter) + " iterations",
                         SymMatrix(x), residual);
}

}  // namespace rre
