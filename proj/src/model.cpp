#include "rre/model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rre {

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::invalid_argument([&] {
        std::string msg = "validation failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

void symmetrize(Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  }
}

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(const Eigen::MatrixXd& m,
                                                   bool vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      m, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver failed");
  }
  return es;
}

void require_same_dim(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("matrix dimensions differ: " + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()));
  }
}

// Smallest / largest singular value ratio of a complex matrix, restricted to
// the first `rank_needed` singular values.
bool full_rank(const Eigen::MatrixXcd& m, Eigen::Index rank_needed, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() < rank_needed || rank_needed == 0) return s.size() >= rank_needed;
  const double largest = s(0);
  if (largest <= 0.0) return false;
  return s(rank_needed - 1) > tol * largest;
}

}  // namespace

SymMatrix::SymMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) {
    throw DimensionError("SymMatrix requires a non-empty square matrix, got " +
                         std::to_string(m_.rows()) + "x" +
                         std::to_string(m_.cols()));
  }
  symmetrize(m_);
}

SymMatrix SymMatrix::Zero(int n) { return SymMatrix(Eigen::MatrixXd::Zero(n, n)); }

SymMatrix SymMatrix::Identity(int n) {
  return SymMatrix(Eigen::MatrixXd::Identity(n, n));
}

SymMatrix SymMatrix::Scalar(double value) {
  return SymMatrix(Eigen::MatrixXd::Constant(1, 1, value));
}

double SymMatrix::lambda_max() const {
  if (dim() == 1) return m_(0, 0);
  return eig(m_, false).eigenvalues().maxCoeff();
}

double SymMatrix::lambda_min() const {
  if (dim() == 1) return m_(0, 0);
  return eig(m_, false).eigenvalues().minCoeff();
}

double SymMatrix::spectral_norm() const {
  if (dim() == 1) return std::abs(m_(0, 0));
  return eig(m_, false).eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::VectorXd SymMatrix::eigenvalues() const {
  return eig(m_, false).eigenvalues();
}

bool SymMatrix::is_psd(double tol) const {
  const Eigen::VectorXd ev = eigenvalues();
  const double norm = ev.cwiseAbs().maxCoeff();
  return ev.minCoeff() >= -tol * std::max(1.0, norm);
}

SymMatrix SymMatrix::sqrt_psd() const {
  const auto es = eig(m_, true);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return SymMatrix(es.eigenvectors() * root.asDiagonal() *
                   es.eigenvectors().transpose());
}

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b);
  return SymMatrix(a.m_ + b.m_);
}

SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b);
  return SymMatrix(a.m_ - b.m_);
}

SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.m_); }

double relative_distance(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b);
  const double scale =
      std::max({1.0, a.frobenius_norm(), b.frobenius_norm()});
  return (a.mat() - b.mat()).norm() / scale;
}

bool loewner_leq(const SymMatrix& x, const SymMatrix& y, double tol) {
  require_same_dim(x, y);
  return (y - x).is_psd(tol);
}

SystemModel::SystemModel(Eigen::MatrixXd a, Eigen::MatrixXd c, SymMatrix q,
                         SymMatrix r)
    : a_(std::move(a)), c_(std::move(c)), q_(std::move(q)), r_(std::move(r)) {
  std::vector<std::string> problems;
  const Eigen::Index n = a_.rows();
  if (n == 0 || a_.cols() != n) problems.push_back("A must be square and non-empty");
  if (c_.rows() == 0 || c_.cols() != n) {
    problems.push_back("C must have " + std::to_string(n) + " columns and at least one row");
  }
  if (q_.dim() != n) problems.push_back("Q must be " + std::to_string(n) + "x" + std::to_string(n));
  if (r_.dim() != c_.rows()) {
    problems.push_back("R must be " + std::to_string(c_.rows()) + "x" + std::to_string(c_.rows()));
  }
  if (!a_.allFinite() || !c_.allFinite() || !q_.all_finite() || !r_.all_finite()) {
    problems.push_back("system matrices must be finite");
  }
  if (!problems.empty()) throw ValidationError(problems);

  if (!q_.is_psd()) problems.push_back("Q must be positive semidefinite");
  if (!(r_.lambda_min() > 0.0)) problems.push_back("R must be positive definite");
  if (!problems.empty()) throw ValidationError(problems);
  q_strictly_positive_ = q_.lambda_min() > 0.0;
}

SystemModel scalar_example() {
  return SystemModel(Eigen::MatrixXd::Constant(1, 1, std::sqrt(2.0)),
                     Eigen::MatrixXd::Constant(1, 1, 1.0), SymMatrix::Scalar(1.0),
                     SymMatrix::Scalar(1.0));
}

SystemModel random_system(int n, int m, double alpha, std::uint64_t seed) {
  if (n < 1 || m < 1) throw ValidationError("random_system requires n, m >= 1");
  if (!(alpha > 0.0)) throw ValidationError("random_system requires alpha > 0");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::MatrixXd a(n, n);
    Eigen::MatrixXd c(m, n);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = normal(gen);
    for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = normal(gen);
    const double radius = a.eigenvalues().cwiseAbs().maxCoeff();
    if (!(radius > 1e-6)) continue;
    a *= alpha / radius;
    SystemModel sys(std::move(a), std::move(c), SymMatrix::Identity(n),
                    SymMatrix::Identity(m));
    if (check_detectability(sys) && check_stabilizability(sys)) return sys;
  }
  throw NumericalError("random_system: no detectable draw in 1000 attempts");
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) throw ValidationError("expected rows to be non-empty arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError("row " + std::to_string(i) + " has " +
                            (row.is_array() ? std::to_string(row.size()) : std::string("no")) +
                            " entries, expected " + std::to_string(cols));
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) {
        throw ValidationError("entry [" + std::to_string(i) + "][" + std::to_string(k) +
                              "] is not a number");
      }
      out(i, k) = v.get<double>();
    }
  }
  return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

SystemModel system_from_json(const nlohmann::json& j, const std::string& path) {
  std::vector<std::string> problems;
  if (!j.is_object()) throw ValidationError(path + ": expected an object with A, C, Q, R");

  Eigen::MatrixXd mats[4];
  const char* names[4] = {"A", "C", "Q", "R"};
  bool ok[4] = {false, false, false, false};
  for (int k = 0; k < 4; ++k) {
    const std::string field = path + "." + names[k];
    if (!j.contains(names[k])) {
      problems.push_back(field + ": missing");
      continue;
    }
    try {
      mats[k] = matrix_from_json(j.at(names[k]));
      ok[k] = true;
    } catch (const ValidationError& e) {
      for (const auto& p : e.problems()) problems.push_back(field + ": " + p);
    }
  }

  const Eigen::Index n = ok[0] ? mats[0].rows() : -1;
  if (ok[0] && mats[0].cols() != n) problems.push_back(path + ".A: must be square");
  if (ok[1] && n >= 0 && mats[1].cols() != n) {
    problems.push_back(path + ".C: has " + std::to_string(mats[1].cols()) +
                       " columns, expected " + std::to_string(n));
  }
  for (int k : {2, 3}) {
    if (!ok[k]) continue;
    const std::string field = path + "." + names[k];
    const Eigen::MatrixXd& s = mats[k];
    if (s.rows() != s.cols()) {
      problems.push_back(field + ": must be square");
      continue;
    }
    const Eigen::Index want = k == 2 ? n : (ok[1] ? mats[1].rows() : -1);
    if (want >= 0 && s.rows() != want) {
      problems.push_back(field + ": is " + std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()) + ", expected " + std::to_string(want) +
                         "x" + std::to_string(want));
    }
    for (Eigen::Index a = 0; a < s.rows(); ++a) {
      for (Eigen::Index b = a + 1; b < s.cols(); ++b) {
        const double scale = std::max({1.0, std::abs(s(a, b)), std::abs(s(b, a))});
        if (std::abs(s(a, b) - s(b, a)) > 1e-12 * scale) {
          std::ostringstream os;
          os.precision(17);
          os << field << ": not symmetric, [" << a << "][" << b << "]=" << s(a, b)
             << " != [" << b << "][" << a << "]=" << s(b, a);
          problems.push_back(os.str());
        }
      }
    }
  }
  if (!problems.empty()) throw ValidationError(problems);

  try {
    return SystemModel(mats[0], mats[1], SymMatrix(mats[2]), SymMatrix(mats[3]));
  } catch (const ValidationError& e) {
    for (const auto& p : e.problems()) problems.push_back(path + ": " + p);
    throw ValidationError(problems);
  }
}

nlohmann::json system_to_json(const SystemModel& m) {
  return nlohmann::json{{"A", matrix_to_json(m.A())},
                        {"C", matrix_to_json(m.C())},
                        {"Q", matrix_to_json(m.Q().mat())},
                        {"R", matrix_to_json(m.R().mat())}};
}

bool check_detectability(const SystemModel& m, double tol) {
  const Eigen::Index n = m.state_dim();
  const Eigen::Index p = m.output_dim();
  Eigen::EigenSolver<Eigen::MatrixXd> es(m.A(), false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on A");
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    if (std::abs(lambda) < kUnstableModulus) continue;
    // [A - lambda I; C] must have full column rank.
    Eigen::MatrixXcd pbh(n + p, n);
    pbh.topRows(n) = m.A().cast<std::complex<double>>() -
                     lambda * Eigen::MatrixXcd::Identity(n, n);
    pbh.bottomRows(p) = m.C().cast<std::complex<double>>();
    if (!full_rank(pbh, n, tol)) return false;
  }
  return true;
}

bool check_stabilizability(const SystemModel& m, double tol) {
  const Eigen::Index n = m.state_dim();
  const Eigen::MatrixXd q_root = m.Q().sqrt_psd().mat();
  Eigen::EigenSolver<Eigen::MatrixXd> es(m.A(), false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on A");
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    if (std::abs(lambda) < kUnstableModulus) continue;
    // [A - lambda I, Q^{1/2}] must have full row rank.
    Eigen::MatrixXcd pbh(n, 2 * n);
    pbh.leftCols(n) = m.A().cast<std::complex<double>>() -
                      lambda * Eigen::MatrixXcd::Identity(n, n);
    pbh.rightCols(n) = q_root.cast<std::complex<double>>();
    if (!full_rank(pbh, n, tol)) return false;
  }
  return true;
}

double spectral_abscissa(const SystemModel& m) {
  if (m.state_dim() == 1) return std::abs(m.A()(0, 0));
  Eigen::EigenSolver<Eigen::MatrixXd> es(m.A(), false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on A");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace rre
