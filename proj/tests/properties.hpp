#pragma once

// Structural properties of the maps f0 and f1, checked on random instances.
// Shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cstddef>
#include <string>

#include "generators.hpp"
#include "rre/maps.hpp"

namespace rre::testing {

inline constexpr double kPropertyTol = 1e-8;

struct PropertyTally {
  std::size_t instances = 0;
  std::size_t order = 0;
  std::size_t sublinear = 0;
  std::size_t concave = 0;
  std::size_t q_domination = 0;
  double worst_sublinear_slack = 0.0;  // most negative (gap - bound) seen

  std::size_t violations() const { return order + sublinear + concave + q_domination; }
};

/// One random instance: model of dimension n, X <= Y, lambda in (0,1), both maps.
inline void check_map_properties(Engine& rng, int n, PropertyTally& tally) {
  const int m = std::max(1, n / 2);
  const SystemModel model = random_model(rng, n, m, uniform(rng, 0.3, 1.6));
  const double scale = uniform(rng, 0.1, 5.0);
  const SymMatrix x = random_psd(rng, n, 1 + static_cast<int>(rng() % n), scale);
  const SymMatrix y = x + random_psd(rng, n, 1 + static_cast<int>(rng() % n), scale);
  const double lambda = uniform(rng, 0.01, 0.99);
  const double q_min = model.Q().lambda_min();
  ++tally.instances;

  for (bool gamma : {false, true}) {
    const SymMatrix fx = switched_map(model, gamma, x);
    const SymMatrix fy = switched_map(model, gamma, y);
    if (!loewner_leq(fx, fy, kPropertyTol)) ++tally.order;

    const SymMatrix gap = switched_map(model, gamma, lambda * x) - lambda * fx;
    const double slack = gap.lambda_min() - ((1.0 - lambda) * q_min - kPropertyTol);
    tally.worst_sublinear_slack = std::min(tally.worst_sublinear_slack, slack);
    if (slack < 0.0) ++tally.sublinear;

    const SymMatrix mix = lambda * fx + (1.0 - lambda) * fy;
    const SymMatrix f_mix = switched_map(model, gamma, lambda * x + (1.0 - lambda) * y);
    if (!loewner_leq(mix, f_mix, kPropertyTol)) ++tally.concave;

    if (!loewner_leq(model.Q(), fx, kPropertyTol)) ++tally.q_domination;
  }
}

}  // namespace rre::testing
