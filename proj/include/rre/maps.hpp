#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "rre/model.hpp"

namespace rre {

/**
 * Finite binary word (i_1, ..., i_s) naming the composition
 * f_{i_1} o f_{i_2} o ... o f_{i_s}. bits[0] is the outermost map, so the
 * last bit is applied first. The empty word is the identity.
 */
struct Word {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  bool empty() const { return bits.empty(); }
  std::size_t ones() const;

  /// Word with `outer` composed on the outside: f_outer o (this).
  Word prepend(std::uint8_t outer) const;

  /// "0110"; the empty word renders as "".
  std::string to_string() const;
  static Word parse(std::string_view s);

  friend bool operator==(const Word&, const Word&) = default;
};

/**
 * Reusable scratch space for evaluating the Lyapunov and Riccati maps of one
 * system. Not thread safe; give each thread its own instance. The referenced
 * SystemModel must outlive the evaluator.
 *
 * All outputs are exactly symmetric.
 */
class MapEvaluator {
 public:
  explicit MapEvaluator(const SystemModel& m);

  /// out = A X A' + Q.
  void lyapunov(const Eigen::MatrixXd& x, Eigen::MatrixXd& out);
  /// out = A X A' + Q - A X C' (C X C' + R)^{-1} C X A'.
  void riccati(const Eigen::MatrixXd& x, Eigen::MatrixXd& out);
  void apply(bool gamma, const Eigen::MatrixXd& x, Eigen::MatrixXd& out) {
    gamma ? riccati(x, out) : lyapunov(x, out);
  }
  /// Predictor gain A X C' (C X C' + R)^{-1}.
  Eigen::MatrixXd predictor_gain(const Eigen::MatrixXd& x);

  const SystemModel& model() const { return model_; }

 private:
  void factor_innovation(const Eigen::MatrixXd& x);

  const SystemModel& model_;
  Eigen::MatrixXd ax_;     // A X
  Eigen::MatrixXd axc_;    // A X C'
  Eigen::MatrixXd innov_;  // C X C' + R
  Eigen::MatrixXd w_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

SymMatrix lyapunov_map(const SystemModel& m, const SymMatrix& x);
SymMatrix riccati_map(const SystemModel& m, const SymMatrix& x);
SymMatrix switched_map(const SystemModel& m, bool gamma, const SymMatrix& x);
SymMatrix apply_word(const SystemModel& m, const Word& w, const SymMatrix& x);

/// Steady-state gain K = -A P C' (C P C' + R)^{-1}, so that A + K C is the
/// closed-loop error dynamics.
Eigen::MatrixXd kalman_gain(const SystemModel& m, const SymMatrix& p);

struct DareSolution {
  SymMatrix p_star;
  Eigen::MatrixXd gain;
  int iterations = 0;
  /// ||f1(P) - P||_F / max(1, ||P||_F) at the returned P.
  double residual = 0.0;
};

inline constexpr double kDareTol = 1e-12;
inline constexpr int kDareMaxIter = 10000;

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, SymMatrix last_iterate, double residual)
      : NumericalError(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}
  const SymMatrix& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }

 private:
  SymMatrix last_iterate_;
  double residual_;
};

/**
 * Fixed point of the Riccati map by iterating f1 from X0 = Q until the
 * relative residual drops to `tol`. Throws ValidationError when the system
 * fails the detectability or stabilizability test (unless `force`), and
 * ConvergenceError when `max_iter` evaluations do not suffice.
 */
DareSolution solve_dare(const SystemModel& m, double tol = kDareTol,
                        int max_iter = kDareMaxIter, bool force = false);

}  // namespace rre
