#pragma once

#include <cstddef>
#include <ostream>
#include <utility>
#include <vector>

#include "rre/maps.hpp"
#include "rre/model.hpp"

namespace rre {

inline constexpr double kDedupeTol = 1e-9;
inline constexpr int kDefaultSupportDepth = 12;
inline constexpr std::size_t kDefaultMaxNodes = 1'000'000;

struct SupportNode {
  Word word;  // shortest word reaching this point
  SymMatrix value;
  int depth() const { return static_cast<int>(word.size()); }
};

/**
 * Distinct points f_{i_1} o ... o f_{i_s}(P*) for s <= depth, in
 * breadth-first order (non-decreasing word length). Two points closer than
 * dedupe_tol in relative Frobenius distance are the same node.
 */
struct SupportAtlas {
  SymMatrix p_star;
  int depth = 0;
  double dedupe_tol = kDedupeTol;
  std::vector<SupportNode> nodes;
  /// Deepest level whose children were all evaluated.
  int complete_depth = 0;
  bool complete = true;
  /// Nodes that fail M >= P* (expected zero).
  std::size_t dominance_violations = 0;

  /// Index of a node within dedupe_tol of x, or nodes.size() if none.
  std::size_t find(const SymMatrix& x) const;
  /// Index of the node nearest to x in Frobenius distance among those
  /// within `radius`, or nodes.size() if none.
  std::size_t nearest_within(const SymMatrix& x, double radius) const;

  /// (trace, node index) sorted by trace; rebuilt by enumerate_support.
  std::vector<std::pair<double, std::size_t>> trace_index;
  void rebuild_index();
};

class SupportTruncated : public std::runtime_error {
 public:
  explicit SupportTruncated(SupportAtlas partial);
  const SupportAtlas& partial() const { return partial_; }

 private:
  SupportAtlas partial_;
};

/// Throws SupportTruncated with the partial atlas when more than max_nodes
/// distinct points would be needed.
SupportAtlas enumerate_support(const SystemModel& m, const SymMatrix& p_star, int depth,
                               double dedupe_tol = kDedupeTol,
                               std::size_t max_nodes = kDefaultMaxNodes);

/// CSV: word,depth,<value columns>,trace,lambda_max. Value columns are
/// `value` for scalar systems and p_i_j (row-major) otherwise.
void write_atlas_csv(std::ostream& out, const SupportAtlas& atlas);

struct ScalarPoint {
  double value = 0.0;
  int depth = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains_open(double x) const { return x > lo && x < hi; }
};

/**
 * Scalar support split into bands S_n = f0^n([P*, Q + A^2 R / C^2]) and the
 * open gaps between consecutive bands. For A = sqrt(2), C = Q = R = 1 the
 * bands are [2^n (1 + sqrt 2) + 2^n - 1, 2^n 3 + 2^n - 1].
 */
struct ScalarPartition {
  std::vector<Interval> bands;                     // n = 0..n_max
  std::vector<std::vector<ScalarPoint>> level_sets;  // sorted by value
  std::vector<Interval> holes;                     // gap between band n and n+1
  std::vector<std::pair<double, int>> hole_violations;  // (value, hole index)
  std::vector<double> below_floor;                 // values < P* (beyond tolerance)
  std::vector<double> beyond;                      // values above band n_max
};

ScalarPartition scalar_partition(const SystemModel& m, const SupportAtlas& atlas, int n_max);

struct SelfSimilarityReport {
  std::size_t lower_count = 0;  // S_{n} points with depth <= atlas depth - 1
  std::size_t upper_count = 0;  // S_{n+1} points
  double max_error = 0.0;       // elementwise max |S_{n+1} - f0(S_n)|
  bool counts_match() const { return lower_count == upper_count; }
};

/// Compares sorted S_{n+1} with f0 applied to the sorted S_n points that are
/// one level shallower, so both sides come from the same word lengths.
SelfSimilarityReport check_self_similarity(const SystemModel& m,
                                           const ScalarPartition& part,
                                           int atlas_depth, int n);

struct CoverageReport {
  /// Fraction of samples within `radius` (Frobenius) of some node.
  double sample_coverage = 0.0;
  /// Fraction of nodes of depth <= max_node_depth with at least one sample.
  double node_hit_fraction = 0.0;
  std::vector<std::size_t> node_hits;  // per atlas node
};

CoverageReport empirical_support_check(const SupportAtlas& atlas, double gamma_bar,
                                       const std::vector<SymMatrix>& samples,
                                       double radius, int max_node_depth);

}  // namespace rre
