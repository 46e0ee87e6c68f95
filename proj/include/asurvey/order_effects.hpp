#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace asurvey {

// One respondent's instrument in the order it was administered.
struct AdministeredSurvey {
  std::vector<int> questions;  // question index at positions 1..L
  std::vector<double> values;  // NaN marks a skipped question
  bool completed = true;
};

struct OrderedResponses {
  std::vector<std::string> question_ids;
  std::vector<AdministeredSurvey> users;

  [[nodiscard]] int num_questions() const { return static_cast<int>(question_ids.size()); }
  void validate() const;
};

// Long-format CSV with columns user, question, position, value (empty value =
// skipped). A user counts as completed when positions run 1..k without gaps
// or skips.
OrderedResponses load_ordered_responses(const std::filesystem::path& path);
void save_ordered_responses(const std::filesystem::path& path, const OrderedResponses& data);

// Per-question z-scores over all non-skipped responses of completed users.
// Questions with zero variance map to 0.
std::vector<std::vector<double>> standardize_by_question(const OrderedResponses& data, bool completed_only);

struct PositionEffect {
  int question = 0;
  std::string question_id;
  double effect = 0.0;  // fitted end-minus-start difference, in sd units
  double null_low = 0.0;
  double null_high = 0.0;
  std::size_t count = 0;
  bool flagged = false;
};

struct PositionEffectResult {
  std::vector<PositionEffect> effects;
  std::vector<std::string> skipped;  // fewer than 3 distinct positions
  int permutations = 0;
};

PositionEffectResult position_effect_estimate(const OrderedResponses& data, int permutations = 200, std::uint64_t seed = 0);

enum class PairParity { all, odd, even };

std::string_view to_string(PairParity parity);
PairParity parse_pair_parity(std::string_view text);

struct PairEffect {
  int question = 0;
  int previous = 0;
  std::string question_id;
  std::string previous_id;
  double coefficient = 0.0;  // penalized estimate
  double refit = 0.0;        // least squares on the selected support
  std::size_t count = 0;
};

struct PairwiseOptions {
  int cv_folds = 10;
  int path_length = 50;
  double min_ratio = 1e-3;  // smallest penalty relative to the largest
  // Largest penalty whose CV error is within one paired standard error of
  // the minimum; false takes the minimum itself.
  bool one_se_rule = true;
  PairParity parity = PairParity::all;
  std::uint64_t seed = 0;
  double tol = 1e-9;
  int max_sweeps = 1000;
};

struct PairwiseResult {
  std::vector<PairEffect> nonzero;
  std::size_t pairs_observed = 0;
  double lambda = 0.0;
  std::vector<double> lambdas;
  std::vector<double> cv_error;
  std::vector<double> cv_se;  // of the fold-wise difference from the minimum
};

// Lasso of standardized responses on (question, previous question) indicators
// with an unpenalized intercept per question. Pairs never observed have no
// coefficient.
PairwiseResult pairwise_order_effects(const OrderedResponses& data, const PairwiseOptions& options = {});

// Penalized solve at one lambda; exposed for testing.
struct PairDesign {
  std::vector<int> user;      // per observation
  std::vector<int> question;  // per observation
  std::vector<int> pair;      // per observation, index into pair_keys
  std::vector<double> z;
  std::vector<std::pair<int, int>> pair_keys;  // (question, previous)
  int num_questions = 0;
};

struct PairFit {
  std::vector<double> intercept;  // per question
  std::vector<double> beta;       // per pair
};

// Minimises (1/2N) sum residual^2 + lambda * sum |beta| over the rows in
// `rows` (all rows when empty).
PairFit fit_pair_lasso(const PairDesign& design, double lambda, const std::vector<int>& rows, double tol, int max_sweeps,
                       const PairFit* warm = nullptr);

PairDesign build_pair_design(const OrderedResponses& data, PairParity parity);

}  // namespace asurvey
