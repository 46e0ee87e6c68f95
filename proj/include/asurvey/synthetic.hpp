#pragma once

#include <cstdint>
#include <vector>

#include "asurvey/data.hpp"
#include "asurvey/order_effects.hpp"
#include "asurvey/ordlogit.hpp"

namespace asurvey {

enum class SyntheticModel { gaussian, ordered_logit };

struct SyntheticOptions {
  int n = 600;
  int k = 30;
  int r = 4;
  double noise_sd = 1.0;  // gaussian only
  std::uint64_t seed = 0;
  SyntheticModel model = SyntheticModel::gaussian;
  int categories = 5;  // ordered_logit only
  double observed_fraction = 1.0;
  // Respondent subgroups: each group shifts user factors by its own
  // N(0, group_shift^2 I) offset, and a "group" covariate column (categories
  // 1..groups) is appended when groups > 1.
  int groups = 0;
  double group_shift = 0.0;
};

struct SyntheticData {
  ResponseMatrix data;
  Matrix U;      // n x r
  Matrix V;      // k x r (question columns only)
  Matrix truth;  // U V^T
  std::vector<Cutpoints> cutpoints;  // ordered_logit only
  std::vector<int> group;            // 1-based, empty without groups
};

// Ordered-logit cutpoints with uniform implied marginals at eta = 0.
Cutpoints uniform_cutpoints(int num_categories);

SyntheticData generate_synthetic(const SyntheticOptions& options);

struct InjectedPair {
  int question = 0;
  int previous = 0;
  double effect = 0.0;  // in sd units
};

struct OrderDataOptions {
  int n = 2000;
  int k = 10;
  std::uint64_t seed = 0;
  // Start-to-end drift in sd units, one entry per question or a single
  // entry applied to every question; empty means none.
  std::vector<double> position_drift;
  std::vector<InjectedPair> pairs;
  double incomplete_fraction = 0.0;  // users who stop early
};

// Independent N(0, 1) responses administered in a random order per user,
// plus the injected drift and pair effects.
OrderedResponses generate_order_data(const OrderDataOptions& options);

}  // namespace asurvey
