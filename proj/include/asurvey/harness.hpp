#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "asurvey/active.hpp"
#include "asurvey/completion.hpp"
#include "asurvey/data.hpp"
#include "asurvey/ordlogit.hpp"
#include "asurvey/pmf.hpp"

namespace asurvey {

// ---------------------------------------------------------------------------
// Metrics

struct MetricSet {
  double mae = 0.0;
  double mse = 0.0;
  double bias = 0.0;
  double wrong_sign = 0.0;  // among pairs with a nonzero target
  std::size_t count = 0;
};

MetricSet compute_metrics(std::span<const double> predictions, std::span<const double> truths);

// Streaming form of compute_metrics.
class MetricAccumulator {
 public:
  void add(double prediction, double truth);
  [[nodiscard]] std::size_t count() const { return count_; }
  [[nodiscard]] MetricSet result() const;

 private:
  double abs_ = 0, sq_ = 0, diff_ = 0;
  std::size_t count_ = 0, signed_ = 0, wrong_ = 0;
};

// ---------------------------------------------------------------------------
// Strategies

struct ActiveStrategy {
  Criterion criterion = Criterion::A;
};
struct RandomStrategy {
  std::uint64_t seed = 0;
};
struct FixedOrderStrategy {
  std::vector<int> order;
};
struct EpsilonGreedyStrategy {
  Criterion criterion = Criterion::A;
  double epsilon = 0.05;
  std::uint64_t seed = 0;
};
struct AdaptiveOrdLogitStrategy {};

using StrategyKind = std::variant<ActiveStrategy, RandomStrategy, FixedOrderStrategy, EpsilonGreedyStrategy,
                                  AdaptiveOrdLogitStrategy>;

enum class SideInfoMode { none, subgroup_priors, free_covariates };

struct Strategy {
  StrategyKind kind = ActiveStrategy{};
  SideInfoMode side_info = SideInfoMode::none;
  std::string label;  // defaults to a name derived from kind

  [[nodiscard]] std::string name() const;
};

// Parses "active", "active:D", "random", "random:7", "fixed:0,3,1",
// "epsilon:0.05", "epsilon:0.1:D", "adaptive".
Strategy parse_strategy(std::string_view text, std::uint64_t default_seed);

enum class ModelKind { gaussian_pmf, ordered_logit };

struct SimulationConfig {
  int rank = 4;
  double alpha = 1.0;
  bool estimate_alpha = false;  // alpha from the mean squared training residual
  std::optional<double> lambda;  // fixed lambda; otherwise grid search
  std::vector<double> lambda_grid;  // empty: default_lambda_grid
  double val_fraction = 0.2;
  double tol = 1e-5;
  int max_iter = 500;
  double jitter = 1e-6;
  // Question ids used as respondent covariates: never asked by strategies and
  // never evaluated. Subgroup priors partition on them; free covariates
  // reveals them before the first question.
  std::vector<std::string> covariates;
  int subgroup_min_users = 10;
  VariationalConfig variational;
  int refit_epochs = 150;  // per-round refits in the ordered-logit simulation
  bool record_paths = true;
};

struct StrategyResult {
  std::string strategy;
  std::vector<MetricSet> overall;  // budgets 0..T
  // per_question[t][j]; count == 0 where question j has no targets
  std::vector<std::vector<MetricSet>> per_question;
  MetricSet oracle;
  std::vector<MetricSet> oracle_per_question;
  // Requested question sequence for every sim user (includes unrevealed).
  std::vector<std::vector<int>> paths;

  [[nodiscard]] const MetricSet& pre_survey() const { return overall.front(); }
};

struct SimulationReport {
  std::vector<std::string> question_ids;
  std::vector<int> sim_rows;
  int budget = 0;
  ModelKind model = ModelKind::gaussian_pmf;
  int rank = 0;
  double lambda = 0.0;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::vector<StrategyResult> strategies;

  [[nodiscard]] const StrategyResult& find(std::string_view strategy) const;
};

// One shared split, holdout and set of question factors for all strategies.
SimulationReport simulate_survey(const ResponseMatrix& data, const SplitSpec& split, const std::vector<Strategy>& strategies,
                                 ModelKind model, int T, const SimulationConfig& config);
SimulationReport simulate_survey(const ResponseMatrix& data, const SplitSpec& split, const Strategy& strategy,
                                 ModelKind model, int T, const SimulationConfig& config);

// Columns: strategy, budget, question, n, mae, mse, bias, wrong_sign. Budget
// "oracle" rows carry the all-revealed bound; question "ALL" pools targets.
void write_report_csv(std::ostream& out, const SimulationReport& report);
// Columns: strategy, user, step, question.
void write_paths_csv(std::ostream& out, const SimulationReport& report);

// ---------------------------------------------------------------------------
// Per-question cross-validation

struct QuestionErrorRow {
  std::string strategy;
  int question = 0;
  std::string question_id;
  std::vector<MetricSet> by_budget;  // aligned with PerQuestionTable::budgets
  MetricSet pre_survey;
  MetricSet oracle;
};

struct PerQuestionTable {
  std::vector<int> budgets;
  std::vector<QuestionErrorRow> rows;
  std::vector<std::string> skipped;  // questions without observations
  int runs = 0;                       // number of simulations performed
};

PerQuestionTable loocv_per_question(const ResponseMatrix& data, const std::vector<Strategy>& strategies, ModelKind model,
                                    const std::vector<int>& budgets, const SimulationConfig& config, std::uint64_t seed,
                                    double train_fraction = 0.5);
PerQuestionTable kfold_per_question(const ResponseMatrix& data, const std::vector<Strategy>& strategies, ModelKind model,
                                    const std::vector<int>& budgets, int folds, const SimulationConfig& config,
                                    std::uint64_t seed, double train_fraction = 0.5);

void write_per_question_csv(std::ostream& out, const PerQuestionTable& table);

// ---------------------------------------------------------------------------
// Derived curves

struct ComplexityPoint {
  double error = 0.0;
  double questions_a = 0.0;
  double questions_b = 0.0;
};

// Running-minimum monotone version of an error-by-budget curve.
std::vector<double> monotone_curve(std::span<const double> errors);
// Smallest (fractional) budget at which the piecewise-linear monotone curve
// reaches `level`; nullopt when never reached.
std::optional<double> questions_to_reach(std::span<const double> errors, double level);

// Pairs (questions_b, questions_a) needed to reach each error level attained
// by both curves. Empty when the ranges do not overlap.
std::vector<ComplexityPoint> sample_complexity_curve(std::span<const double> errors_a, std::span<const double> errors_b);
std::vector<ComplexityPoint> sample_complexity_curve(const StrategyResult& a, const StrategyResult& b);

struct ErrorReduction {
  int question = 0;
  std::string question_id;
  double percent = 0.0;
};

struct ErrorReductionResult {
  std::vector<ErrorReduction> values;
  std::vector<std::string> flagged;  // zero pre-survey MAE, excluded
};

double percent_reduction(double pre, double at_budget);
ErrorReductionResult error_reduction_distribution(const PerQuestionTable& table, std::string_view strategy, int budget);

// ---------------------------------------------------------------------------
// Side information

// Key of the subgroup a row belongs to, from its covariate values.
std::string subgroup_key(const ResponseMatrix& data, Eigen::Index row, std::span<const int> covariate_columns);

// Prior for every sim user: the empirical-Bayes belief of the user's training
// subgroup, or `global` when that subgroup has fewer than `min_users`.
std::vector<GaussianBelief> subgroup_priors(const ResponseMatrix& train, const Matrix& train_user_factors,
                                            const ResponseMatrix& sim, std::span<const int> covariate_columns,
                                            const GaussianBelief& global, int min_users, double jitter);

struct SideInfoPlan {
  std::vector<GaussianBelief> priors;  // one per sim user
  std::vector<int> reveal_first;       // columns revealed before the first question
};

SideInfoPlan apply_side_info(SideInfoMode mode, const ResponseMatrix& train, const Matrix& train_user_factors,
                             const ResponseMatrix& sim, std::span<const int> covariate_columns,
                             const GaussianBelief& global, int min_users, double jitter);

std::string_view to_string(ModelKind model);
ModelKind parse_model_kind(std::string_view text);

}  // namespace asurvey
