#include "rre/support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace rre {

namespace {

// |trace(a) - trace(b)| <= sqrt(n) ||a - b||_F, so candidates for a Frobenius
// ball of radius r around x have traces within sqrt(n) r of trace(x).
double trace_window(int n, double radius) { return std::sqrt(static_cast<double>(n)) * radius; }

double dedupe_radius(const SymMatrix& x, double tol) {
  // Relative distance uses max(1, |a|, |b|); |b| <= |a| + r, so doubling
  // covers every candidate the exact test can accept.
  return 2.0 * tol * std::max(1.0, x.frobenius_norm()) + 1e-300;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SupportTruncated::SupportTruncated(SupportAtlas partial)
    : std::runtime_error("support enumeration truncated at " +
                         std::to_string(partial.nodes.size()) + " nodes (complete to depth " +
                         std::to_string(partial.complete_depth) + ")"),
      partial_(std::move(partial)) {}

void SupportAtlas::rebuild_index() {
  trace_index.clear();
  trace_index.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) trace_index.emplace_back(nodes[i].value.trace(), i);
  std::sort(trace_index.begin(), trace_index.end());
}

std::size_t SupportAtlas::find(const SymMatrix& x) const {
  const double w = trace_window(x.dim(), dedupe_radius(x, dedupe_tol));
  const double tr = x.trace();
  auto it = std::lower_bound(trace_index.begin(), trace_index.end(),
                             std::make_pair(tr - w, std::size_t{0}));
  for (; it != trace_index.end() && it->first <= tr + w; ++it) {
    if (relative_distance(nodes[it->second].value, x) <= dedupe_tol) return it->second;
  }
  return nodes.size();
}

std::size_t SupportAtlas::nearest_within(const SymMatrix& x, double radius) const {
  const double w = trace_window(x.dim(), radius);
  const double tr = x.trace();
  auto it = std::lower_bound(trace_index.begin(), trace_index.end(),
                             std::make_pair(tr - w, std::size_t{0}));
  std::size_t best = nodes.size();
  double best_dist = std::numeric_limits<double>::infinity();
  for (; it != trace_index.end() && it->first <= tr + w; ++it) {
    const double d = (nodes[it->second].value.mat() - x.mat()).norm();
    if (d <= radius && d < best_dist) {
      best = it->second;
      best_dist = d;
    }
  }
  return best;
}

SupportAtlas enumerate_support(const SystemModel& m, const SymMatrix& p_star, int depth,
                               double dedupe_tol, std::size_t max_nodes) {
  std::vector<std::string> problems;
  if (depth < 0) problems.push_back("depth must be >= 0");
  if (!(dedupe_tol >= 0.0)) problems.push_back("dedupe_tol must be >= 0");
  if (max_nodes < 1) problems.push_back("max_nodes must be >= 1");
  if (p_star.dim() != m.state_dim()) problems.push_back("P* has wrong dimension");
  if (!problems.empty()) throw ValidationError(problems);

  SupportAtlas atlas;
  atlas.p_star = p_star;
  atlas.depth = depth;
  atlas.dedupe_tol = dedupe_tol;
  atlas.nodes.push_back(SupportNode{Word{}, p_star});

  // trace -> node index, kept in step with atlas.nodes during enumeration.
  std::multimap<double, std::size_t> index;
  index.emplace(p_star.trace(), 0);
  auto lookup = [&](const SymMatrix& x) {
    const double w = trace_window(x.dim(), dedupe_radius(x, dedupe_tol));
    const double tr = x.trace();
    for (auto it = index.lower_bound(tr - w); it != index.end() && it->first <= tr + w; ++it) {
      if (relative_distance(atlas.nodes[it->second].value, x) <= dedupe_tol) return true;
    }
    return false;
  };

  MapEvaluator ev(m);
  Eigen::MatrixXd child;
  std::size_t level_begin = 0;
  for (int level = 1; level <= depth; ++level) {
    const std::size_t level_end = atlas.nodes.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (std::uint8_t bit : {std::uint8_t{0}, std::uint8_t{1}}) {
        ev.apply(bit != 0, atlas.nodes[i].value.mat(), child);
        SymMatrix value(child);
        if (!value.all_finite()) throw NumericalError("non-finite support point");
        if (lookup(value)) continue;
        if (atlas.nodes.size() >= max_nodes) {
          atlas.complete = false;
          atlas.complete_depth = level - 1;
          atlas.rebuild_index();
          throw SupportTruncated(std::move(atlas));
        }
        index.emplace(value.trace(), atlas.nodes.size());
        atlas.nodes.push_back(SupportNode{atlas.nodes[i].word.prepend(bit), std::move(value)});
      }
    }
    level_begin = level_end;
    atlas.complete_depth = level;
  }

  for (const auto& node : atlas.nodes) {
    if (!loewner_leq(p_star, node.value, 1e-8)) ++atlas.dominance_violations;
  }
  atlas.rebuild_index();
  return atlas;
}

void write_atlas_csv(std::ostream& out, const SupportAtlas& atlas) {
  const int n = atlas.p_star.dim();
  out << "word,depth";
  if (n == 1) {
    out << ",value";
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out << ",p_" << i << "_" << j;
  }
  out << ",trace,lambda_max\n";
  for (const auto& node : atlas.nodes) {
    out << node.word.to_string() << "," << node.depth();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out << "," << fmt(node.value(i, j));
    out << "," << fmt(node.value.trace()) << "," << fmt(node.value.lambda_max()) << "\n";
  }
}

ScalarPartition scalar_partition(const SystemModel& m, const SupportAtlas& atlas, int n_max) {
  if (!m.is_scalar()) throw ValidationError("scalar_partition requires a scalar system");
  if (n_max < 0) throw ValidationError("n_max must be >= 0");
  const double a2 = m.A()(0, 0) * m.A()(0, 0);
  const double c = m.C()(0, 0);
  const double q = m.Q()(0, 0);
  const double r = m.R()(0, 0);
  if (c == 0.0) throw ValidationError("scalar_partition requires C != 0");
  const double p_star = atlas.p_star(0, 0);
  // f1 is increasing with supremum q + a^2 r / c^2.
  const double f1_sup = q + a2 * r / (c * c);
  auto f0 = [&](double x) { return a2 * x + q; };

  ScalarPartition part;
  double lo = p_star;
  double hi = f1_sup;
  for (int n = 0; n <= n_max + 1; ++n) {
    part.bands.push_back({lo, hi});
    lo = f0(lo);
    hi = f0(hi);
  }
  for (int n = 0; n <= n_max; ++n) {
    part.holes.push_back({part.bands[n].hi, std::max(part.bands[n].hi, part.bands[n + 1].lo)});
  }
  part.bands.pop_back();
  part.level_sets.resize(static_cast<std::size_t>(n_max) + 1);

  for (const auto& node : atlas.nodes) {
    const double v = node.value(0, 0);
    const double eps = 1e-9 * std::max(1.0, std::abs(v));
    if (v < p_star - eps) {
      part.below_floor.push_back(v);
      continue;
    }
    bool placed = false;
    for (int n = 0; n <= n_max && !placed; ++n) {
      const Interval& band = part.bands[n];
      if (v >= band.lo - eps && v <= band.hi + eps) {
        part.level_sets[n].push_back({v, node.depth()});
        placed = true;
      } else if (v > part.holes[n].lo + eps && v < part.holes[n].hi - eps) {
        part.hole_violations.emplace_back(v, n);
        placed = true;
      }
    }
    if (!placed) part.beyond.push_back(v);
  }
  for (auto& level : part.level_sets) {
    std::sort(level.begin(), level.end(),
              [](const ScalarPoint& x, const ScalarPoint& y) { return x.value < y.value; });
  }
  std::sort(part.beyond.begin(), part.beyond.end());
  return part;
}

SelfSimilarityReport check_self_similarity(const SystemModel& m,
                                           const ScalarPartition& part,
                                           int atlas_depth, int n) {
  if (!m.is_scalar()) throw ValidationError("self-similarity check requires a scalar system");
  if (n < 0 || static_cast<std::size_t>(n) + 1 >= part.level_sets.size()) {
    throw ValidationError("self-similarity check needs bands n and n+1 in the partition");
  }
  const double a2 = m.A()(0, 0) * m.A()(0, 0);
  const double q = m.Q()(0, 0);
  std::vector<double> image;
  for (const auto& p : part.level_sets[n]) {
    if (p.depth <= atlas_depth - 1) image.push_back(a2 * p.value + q);
  }
  std::sort(image.begin(), image.end());
  const auto& upper = part.level_sets[n + 1];

  SelfSimilarityReport rep;
  rep.lower_count = image.size();
  rep.upper_count = upper.size();
  const std::size_t common = std::min(image.size(), upper.size());
  for (std::size_t i = 0; i < common; ++i) {
    rep.max_error = std::max(rep.max_error, std::abs(image[i] - upper[i].value));
  }
  if (!rep.counts_match()) rep.max_error = std::numeric_limits<double>::infinity();
  return rep;
}

CoverageReport empirical_support_check(const SupportAtlas& atlas, double gamma_bar,
                                       const std::vector<SymMatrix>& samples,
                                       double radius, int max_node_depth) {
  std::vector<std::string> problems;
  if (!(gamma_bar > 0.0 && gamma_bar <= 1.0)) problems.push_back("gamma_bar must lie in (0, 1]");
  if (!(radius > 0.0)) problems.push_back("radius must be > 0");
  if (samples.empty()) problems.push_back("no samples");
  if (!problems.empty()) throw ValidationError(problems);

  CoverageReport rep;
  rep.node_hits.assign(atlas.nodes.size(), 0);
  std::size_t covered = 0;
  for (const auto& s : samples) {
    const std::size_t k = atlas.nearest_within(s, radius);
    if (k < atlas.nodes.size()) {
      ++covered;
      ++rep.node_hits[k];
    }
  }
  rep.sample_coverage = static_cast<double>(covered) / static_cast<double>(samples.size());
  std::size_t eligible = 0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < atlas.nodes.size(); ++i) {
    if (atlas.nodes[i].depth() > max_node_depth) continue;
    ++eligible;
    if (rep.node_hits[i] > 0) ++hit;
  }
  rep.node_hit_fraction = eligible ? static_cast<double>(hit) / static_cast<double>(eligible) : 0.0;
  return rep;
}

}  // namespace rre
