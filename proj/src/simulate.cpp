#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "asurvey/csv.hpp"
#include "asurvey/harness.hpp"

namespace asurvey {

const StrategyResult& SimulationReport::find(std::string_view strategy) const {
  for (const auto& s : strategies)
    if (s.strategy == strategy) return s;
  throw std::out_of_range("no strategy named " + std::string(strategy));
}

std::string subgroup_key(const ResponseMatrix& data, Eigen::Index row, std::span<const int> covariate_columns) {
  std::string key;
  for (std::size_t c = 0; c < covariate_columns.size(); ++c) {
    if (c) key += '|';
    const int j = covariate_columns[c];
    key += data.mask(row, j) ? csv::format_double(data.values(row, j)) : "NA";
  }
  return key;
}

std::vector<GaussianBelief> subgroup_priors(const ResponseMatrix& train, const Matrix& train_user_factors,
                                            const ResponseMatrix& sim, std::span<const int> covariate_columns,
                                            const GaussianBelief& global, int min_users, double jitter) {
  if (train_user_factors.rows() != train.rows()) throw std::invalid_argument("one user factor row per training user required");
  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < train.rows(); ++i) groups[subgroup_key(train, i, covariate_columns)].push_back(i);

  std::map<std::string, GaussianBelief> priors;
  for (const auto& [key, members] : groups) {
    if (static_cast<int>(members.size()) < std::max(min_users, 2)) continue;
    Matrix rows(static_cast<Eigen::Index>(members.size()), train_user_factors.cols());
    for (std::size_t m = 0; m < members.size(); ++m) rows.row(static_cast<Eigen::Index>(m)) = train_user_factors.row(members[m]);
    try {
      priors.emplace(key, empirical_bayes_prior(rows, jitter));
    } catch (const std::invalid_argument&) {
      // degenerate subgroup covariance: fall back to the global prior
    }
  }

  std::vector<GaussianBelief> out;
  out.reserve(static_cast<std::size_t>(sim.rows()));
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    auto it = priors.find(subgroup_key(sim, i, covariate_columns));
    out.push_back(it == priors.end() ? global : it->second);
  }
  return out;
}

SideInfoPlan apply_side_info(SideInfoMode mode, const ResponseMatrix& train, const Matrix& train_user_factors,
                             const ResponseMatrix& sim, std::span<const int> covariate_columns,
                             const GaussianBelief& global, int min_users, double jitter) {
  for (int c : covariate_columns)
    if (c < 0 || c >= train.cols()) throw std::invalid_argument("unknown covariate column");
  SideInfoPlan plan;
  if (mode == SideInfoMode::subgroup_priors && !covariate_columns.empty()) {
    plan.priors = subgroup_priors(train, train_user_factors, sim, covariate_columns, global, min_users, jitter);
  } else {
    plan.priors.assign(static_cast<std::size_t>(sim.rows()), global);
  }
  if (mode == SideInfoMode::free_covariates) plan.reveal_first.assign(covariate_columns.begin(), covariate_columns.end());
  return plan;
}

namespace {

struct Target {
  int user;
  int question;
  double truth;
};

class Evaluator {
 public:
  Evaluator(std::vector<Target> targets, Eigen::Index num_questions)
      : targets_(std::move(targets)), k_(static_cast<std::size_t>(num_questions)) {}

  template <class Predict>
  void run(Predict&& predict, MetricSet& overall, std::vector<MetricSet>& per_question) const {
    MetricAccumulator all;
    std::vector<MetricAccumulator> by_q(k_);
    for (const auto& t : targets_) {
      const double p = predict(t.user, t.question);
      all.add(p, t.truth);
      by_q[static_cast<std::size_t>(t.question)].add(p, t.truth);
    }
    overall = all.result();
    per_question.resize(k_);
    for (std::size_t j = 0; j < k_; ++j) per_question[j] = by_q[j].result();
  }

 private:
  std::vector<Target> targets_;
  std::size_t k_;
};

struct Prepared {
  SplitResult split;
  std::vector<int> covariates;
  std::vector<int> candidates;  // askable questions
  MaskMatrix available;
};

// Order bookkeeping for one strategy across all sim users.
class QuestionPicker {
 public:
  using Optimal = std::function<int(int user, std::span<const int> remaining)>;

  QuestionPicker(const Strategy& strategy, const std::vector<int>& candidates, Eigen::Index num_users, Eigen::Index k)
      : strategy_(strategy) {
    remaining_.assign(static_cast<std::size_t>(num_users), candidates);
    if (const auto* r = std::get_if<RandomStrategy>(&strategy.kind)) {
      std::mt19937_64 rng(r->seed);
      planned_.resize(remaining_.size());
      for (auto& plan : planned_) {
        plan = candidates;
        std::shuffle(plan.begin(), plan.end(), rng);
      }
    } else if (const auto* f = std::get_if<FixedOrderStrategy>(&strategy.kind)) {
      std::vector<int> sorted = f->order;
      std::sort(sorted.begin(), sorted.end());
      std::vector<int> all(static_cast<std::size_t>(k));
      std::iota(all.begin(), all.end(), 0);
      if (sorted != all) throw std::invalid_argument("fixed order must be a permutation of the question indices");
      std::vector<int> plan;
      for (int j : f->order)
        if (std::binary_search(candidates.begin(), candidates.end(), j)) plan.push_back(j);
      planned_.assign(remaining_.size(), plan);
    }
    cursor_.assign(remaining_.size(), 0);
  }

  int pick(int user, const Optimal& optimal) {
    auto& remaining = remaining_[static_cast<std::size_t>(user)];
    if (remaining.empty()) return -1;
    int j = -1;
    if (!planned_.empty()) {
      auto& plan = planned_[static_cast<std::size_t>(user)];
      auto& pos = cursor_[static_cast<std::size_t>(user)];
      while (pos < plan.size() && j < 0) {
        const int q = plan[pos++];
        if (std::binary_search(remaining.begin(), remaining.end(), q)) j = q;
      }
      if (j < 0) return -1;
    } else {
      j = optimal(user, remaining);
    }
    remaining.erase(std::lower_bound(remaining.begin(), remaining.end(), j));
    return j;
  }

 private:
  const Strategy& strategy_;
  std::vector<std::vector<int>> remaining_;
  std::vector<std::vector<int>> planned_;
  std::vector<std::size_t> cursor_;
};

Prepared prepare(const ResponseMatrix& data, const SplitSpec& split, const SimulationConfig& config) {
  Prepared p;
  p.split = split_and_holdout(data, split);
  for (const auto& id : config.covariates) {
    const int j = data.question_index(id);
    if (j < 0) throw std::invalid_argument("unknown covariate id: " + id);
    p.covariates.push_back(j);
  }
  std::set<int> excluded(p.covariates.begin(), p.covariates.end());
  excluded.insert(p.split.heldout_questions.begin(), p.split.heldout_questions.end());
  for (int j = 0; j < data.cols(); ++j)
    if (!excluded.count(j)) p.candidates.push_back(j);
  p.available = p.split.available();
  return p;
}

std::vector<Target> collect_targets(const Prepared& p, const Matrix& truths) {
  std::set<int> covariates(p.covariates.begin(), p.covariates.end());
  std::vector<Target> targets;
  const auto& holdout = p.split.holdout;
  for (Eigen::Index i = 0; i < holdout.rows(); ++i)
    for (Eigen::Index j = 0; j < holdout.cols(); ++j)
      if (holdout(i, j) && !covariates.count(static_cast<int>(j)))
        targets.push_back({static_cast<int>(i), static_cast<int>(j), truths(i, j)});
  return targets;
}

void check_strategy(const Strategy& s, ModelKind model) {
  if (std::holds_alternative<AdaptiveOrdLogitStrategy>(s.kind) && model != ModelKind::ordered_logit)
    throw std::invalid_argument("adaptive_ordlogit strategy requires the ordered_logit model");
}

std::uint64_t strategy_seed(const Strategy& s) {
  if (const auto* e = std::get_if<EpsilonGreedyStrategy>(&s.kind)) return e->seed;
  return 0;
}

// ----------------------------------------------------------------- Gaussian

StrategyResult run_gaussian(const Strategy& strategy, const Prepared& p, const Matrix& Y, const Matrix& V,
                            const NoiseModel& noise, const SideInfoPlan& plan, bool clamp, int T,
                            const Evaluator& evaluator, bool record_paths) {
  const auto n = static_cast<int>(Y.rows());
  StrategyResult result;
  result.strategy = strategy.name();
  result.overall.resize(static_cast<std::size_t>(T) + 1);
  result.per_question.resize(static_cast<std::size_t>(T) + 1);
  if (record_paths) result.paths.resize(static_cast<std::size_t>(n));

  std::vector<GaussianBelief> beliefs = plan.priors;
  for (int c : plan.reveal_first)
    for (int i = 0; i < n; ++i)
      if (p.available(i, c)) beliefs[static_cast<std::size_t>(i)] = posterior_update(beliefs[static_cast<std::size_t>(i)], V.row(c).transpose(), Y(i, c), noise);

  auto predict = [&](int i, int j) {
    const double value = beliefs[static_cast<std::size_t>(i)].mean.dot(V.row(j));
    return clamp ? std::clamp(value, -1.0, 1.0) : value;
  };
  evaluator.run(predict, result.overall[0], result.per_question[0]);

  QuestionPicker picker(strategy, p.candidates, n, V.rows());
  std::mt19937_64 rng(strategy_seed(strategy));
  const QuestionPicker::Optimal optimal = [&](int user, std::span<const int> remaining) {
    const auto& belief = beliefs[static_cast<std::size_t>(user)];
    return std::visit(
        [&](const auto& s) -> int {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, ActiveStrategy>) {
            return select_next(belief, remaining, V, noise, s.criterion);
          } else if constexpr (std::is_same_v<S, EpsilonGreedyStrategy>) {
            return epsilon_greedy_select(belief, remaining, V, noise, s.criterion, s.epsilon, rng);
          } else {
            throw std::logic_error("strategy has no model-based choice");
          }
        },
        strategy.kind);
  };

  for (int t = 1; t <= T; ++t) {
    for (int i = 0; i < n; ++i) {
      const int j = picker.pick(i, optimal);
      if (j < 0) continue;
      if (record_paths) result.paths[static_cast<std::size_t>(i)].push_back(j);
      if (p.available(i, j))
        beliefs[static_cast<std::size_t>(i)] = posterior_update(beliefs[static_cast<std::size_t>(i)], V.row(j).transpose(), Y(i, j), noise);
    }
    evaluator.run(predict, result.overall[static_cast<std::size_t>(t)], result.per_question[static_cast<std::size_t>(t)]);
  }

  // Oracle: every response this strategy could ever reveal.
  std::vector<int> revealable = p.candidates;
  revealable.insert(revealable.end(), plan.reveal_first.begin(), plan.reveal_first.end());
  for (int i = 0; i < n; ++i) {
    std::vector<int> cols;
    for (int j : revealable)
      if (p.available(i, j)) cols.push_back(j);
    Matrix Vo(static_cast<Eigen::Index>(cols.size()), V.cols());
    Vector y(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      Vo.row(static_cast<Eigen::Index>(c)) = V.row(cols[c]);
      y(static_cast<Eigen::Index>(c)) = Y(i, cols[c]);
    }
    beliefs[static_cast<std::size_t>(i)] = batch_posterior(plan.priors[static_cast<std::size_t>(i)], Vo, y, noise);
  }
  evaluator.run(predict, result.oracle, result.oracle_per_question);
  return result;
}

// ------------------------------------------------------------ ordered logit

struct OrdLogitShared {
  std::vector<Cutpoints> cuts;
  VariationalFit train_fit;
  GaussianBelief global_prior;
};

StrategyResult run_ordlogit(const Strategy& strategy, const Prepared& p, const OrdLogitShared& shared,
                            const SideInfoPlan& plan, int T, const SimulationConfig& config, const Evaluator& evaluator) {
  const ResponseMatrix& train = p.split.train;
  const ResponseMatrix& sim = p.split.sim;
  const auto n_train = train.rows();
  const auto n = static_cast<int>(sim.rows());
  const auto k = sim.cols();
  const int r = config.rank;

  StrategyResult result;
  result.strategy = strategy.name();
  result.overall.resize(static_cast<std::size_t>(T) + 1);
  result.per_question.resize(static_cast<std::size_t>(T) + 1);
  if (config.record_paths) result.paths.resize(static_cast<std::size_t>(n));

  // Training rows followed by sim rows; sim rows expose revealed entries only.
  ResponseMatrix combined;
  combined.questions = train.questions;
  combined.scale = ResponseScale::categorical;
  combined.values.resize(n_train + n, k);
  combined.values << train.values, sim.values;
  combined.mask.resize(n_train + n, k);
  combined.mask << train.mask, MaskMatrix::Constant(n, k, false);
  for (int c : plan.reveal_first)
    for (int i = 0; i < n; ++i)
      if (p.available(i, c)) combined.mask(n_train + i, c) = true;

  VariationalParams params;
  params.user_mean = Matrix::Zero(n_train + n, r);
  params.user_sd = Matrix::Ones(n_train + n, r);
  params.user_mean.topRows(n_train) = shared.train_fit.params.user_mean;
  params.user_sd.topRows(n_train) = shared.train_fit.params.user_sd;
  params.question_mean = shared.train_fit.params.question_mean;
  params.question_sd = shared.train_fit.params.question_sd;

  const GaussianBelief unit = standard_normal_belief(r);
  VariationalConfig refit = config.variational;
  refit.max_epochs = config.refit_epochs;
  std::uint64_t round = 0;
  auto refit_all = [&] {
    refit.seed = config.variational.seed + 7919 * (++round);
    params = fit_variational(combined, shared.cuts, r, unit, unit, refit, &params).params;
  };
  refit_all();

  auto u_hat = [&](int i) -> Vector { return params.user_mean.row(n_train + i).transpose(); };
  auto predict = [&](int i, int j) {
    return expected_response_scaled(params.user_mean.row(n_train + i).dot(params.question_mean.row(j)),
                                    shared.cuts[static_cast<std::size_t>(j)]);
  };
  evaluator.run(predict, result.overall[0], result.per_question[0]);

  std::vector<InformationState> states;
  std::vector<GaussianBelief> gaussian;  // precision-only state for Gaussian-rule strategies
  for (int i = 0; i < n; ++i) {
    states.emplace_back(plan.priors[static_cast<std::size_t>(i)].precision, static_cast<int>(k));
    gaussian.push_back(plan.priors[static_cast<std::size_t>(i)]);
  }
  const NoiseModel noise{config.alpha};

  QuestionPicker picker(strategy, p.candidates, n, k);
  std::mt19937_64 rng(strategy_seed(strategy));
  const QuestionPicker::Optimal optimal = [&](int user, std::span<const int> remaining) {
    const Matrix& V = params.question_mean;
    return std::visit(
        [&](const auto& s) -> int {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, AdaptiveOrdLogitStrategy>) {
            return select_next_adaptive(u_hat(user), states[static_cast<std::size_t>(user)], remaining, V, shared.cuts);
          } else if constexpr (std::is_same_v<S, ActiveStrategy>) {
            return select_next(gaussian[static_cast<std::size_t>(user)], remaining, V, noise, s.criterion);
          } else if constexpr (std::is_same_v<S, EpsilonGreedyStrategy>) {
            return epsilon_greedy_select(gaussian[static_cast<std::size_t>(user)], remaining, V, noise, s.criterion, s.epsilon, rng);
          } else {
            throw std::logic_error("strategy has no model-based choice");
          }
        },
        strategy.kind);
  };

  for (int t = 1; t <= T; ++t) {
    for (int i = 0; i < n; ++i) {
      const int j = picker.pick(i, optimal);
      if (j < 0) continue;
      if (config.record_paths) result.paths[static_cast<std::size_t>(i)].push_back(j);
      auto& state = states[static_cast<std::size_t>(i)];
      if (p.available(i, j)) {
        combined.mask(n_train + i, j) = true;
        const Vector v = params.question_mean.row(j).transpose();
        state.record(j, static_cast<int>(sim.values(i, j)), u_hat(i), v, shared.cuts[static_cast<std::size_t>(j)]);
        gaussian[static_cast<std::size_t>(i)].precision += noise.alpha * v * v.transpose();
      } else {
        state.consume(j);
      }
    }
    refit_all();
    for (int i = 0; i < n; ++i) states[static_cast<std::size_t>(i)].rebase(u_hat(i), params.question_mean, shared.cuts);
    evaluator.run(predict, result.overall[static_cast<std::size_t>(t)], result.per_question[static_cast<std::size_t>(t)]);
  }

  std::vector<int> revealable = p.candidates;
  revealable.insert(revealable.end(), plan.reveal_first.begin(), plan.reveal_first.end());
  for (int i = 0; i < n; ++i)
    for (int j : revealable)
      if (p.available(i, j)) combined.mask(n_train + i, j) = true;
  refit.max_epochs = config.variational.max_epochs;
  refit_all();
  evaluator.run(predict, result.oracle, result.oracle_per_question);
  return result;
}

}  // namespace

SimulationReport simulate_survey(const ResponseMatrix& data, const SplitSpec& split, const std::vector<Strategy>& strategies,
                                 ModelKind model, int T, const SimulationConfig& config) {
  data.validate();
  if (T < 0 || T > data.cols()) throw std::invalid_argument("budget T must lie in [0, k]");
  if (strategies.empty()) throw std::invalid_argument("no strategies to simulate");
  for (const auto& s : strategies) check_strategy(s, model);

  const Prepared p = prepare(data, split, config);
  SimulationReport report;
  for (const auto& q : data.questions) report.question_ids.push_back(q.id);
  report.sim_rows = p.split.sim_rows;
  report.budget = T;
  report.model = model;
  report.rank = config.rank;
  report.seed = split.seed;

  if (model == ModelKind::gaussian_pmf) {
    const bool categorical = data.scale == ResponseScale::categorical;
    const ResponseMatrix train = categorical ? rescale_responses(p.split.train) : p.split.train;
    const ResponseMatrix sim = categorical ? rescale_responses(p.split.sim) : p.split.sim;
    const bool clamp = train.scale == ResponseScale::scaled;

    double lambda = 0.0;
    if (config.lambda) {
      lambda = *config.lambda;
    } else {
      const auto grid = config.lambda_grid.empty() ? default_lambda_grid(train) : config.lambda_grid;
      lambda = lambda_grid_search(train, grid, config.val_fraction, config.rank, split.seed + 1, config.tol, config.max_iter)
                   .best_lambda;
    }
    const SoftImputeFit fit = softimpute_fit(train, {lambda, config.rank, config.tol, config.max_iter});
    const Matrix& V = fit.model.V;
    const Matrix user_factors = fit.model.user_factors();
    NoiseModel noise{config.alpha};
    if (config.estimate_alpha) noise.alpha = 1.0 / std::max(estimate_noise_variance(fit.model, train), 1e-6);
    const GaussianBelief global = empirical_bayes_prior(user_factors, config.jitter);
    report.lambda = lambda;
    report.alpha = noise.alpha;

    const Evaluator evaluator(collect_targets(p, sim.values), data.cols());
    for (const auto& s : strategies) {
      const SideInfoPlan plan = apply_side_info(s.side_info, train, user_factors, sim, p.covariates, global,
                                                config.subgroup_min_users, config.jitter);
      report.strategies.push_back(run_gaussian(s, p, sim.values, V, noise, plan, clamp, T, evaluator, config.record_paths));
    }
  } else {
    if (data.scale != ResponseScale::categorical) throw std::invalid_argument("ordered_logit model needs categorical data");
    OrdLogitShared shared;
    shared.cuts = cutpoints_from_data(p.split.train);
    const GaussianBelief unit = standard_normal_belief(config.rank);
    shared.train_fit = fit_variational(p.split.train, shared.cuts, config.rank, unit, unit, config.variational);
    shared.global_prior = empirical_bayes_prior(shared.train_fit.params.user_mean, config.jitter);
    report.alpha = config.alpha;

    const ResponseMatrix sim_scaled = rescale_responses(p.split.sim);
    const Evaluator evaluator(collect_targets(p, sim_scaled.values), data.cols());
    for (const auto& s : strategies) {
      const SideInfoPlan plan = apply_side_info(s.side_info, p.split.train, shared.train_fit.params.user_mean, p.split.sim,
                                                p.covariates, shared.global_prior, config.subgroup_min_users, config.jitter);
      report.strategies.push_back(run_ordlogit(s, p, shared, plan, T, config, evaluator));
    }
  }
  return report;
}

SimulationReport simulate_survey(const ResponseMatrix& data, const SplitSpec& split, const Strategy& strategy,
                                 ModelKind model, int T, const SimulationConfig& config) {
  return simulate_survey(data, split, std::vector<Strategy>{strategy}, model, T, config);
}

namespace {

// Observed columns only; `original` maps reduced indices back.
struct Usable {
  ResponseMatrix data;
  std::vector<int> original;
  std::vector<std::string> skipped;
};

Usable drop_empty_columns(const ResponseMatrix& data) {
  Usable u;
  for (int j = 0; j < data.cols(); ++j) {
    if (data.mask.col(j).any())
      u.original.push_back(j);
    else
      u.skipped.push_back(data.questions[static_cast<std::size_t>(j)].id);
  }
  const auto k = static_cast<Eigen::Index>(u.original.size());
  u.data.scale = data.scale;
  u.data.values.resize(data.rows(), k);
  u.data.mask.resize(data.rows(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const int j = u.original[static_cast<std::size_t>(c)];
    u.data.values.col(c) = data.values.col(j);
    u.data.mask.col(c) = data.mask.col(j);
    u.data.questions.push_back(data.questions[static_cast<std::size_t>(j)]);
  }
  return u;
}

void append_rows(PerQuestionTable& table, const SimulationReport& report, const std::vector<int>& questions,
                 const std::vector<int>& original) {
  for (const auto& s : report.strategies) {
    for (int j : questions) {
      QuestionErrorRow row;
      row.strategy = s.strategy;
      row.question = original[static_cast<std::size_t>(j)];
      row.question_id = report.question_ids[static_cast<std::size_t>(j)];
      for (int b : table.budgets) row.by_budget.push_back(s.per_question[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)]);
      row.pre_survey = s.per_question[0][static_cast<std::size_t>(j)];
      row.oracle = s.oracle_per_question[static_cast<std::size_t>(j)];
      table.rows.push_back(std::move(row));
    }
  }
}

int max_budget(const std::vector<int>& budgets, Eigen::Index k) {
  if (budgets.empty()) throw std::invalid_argument("no budgets requested");
  for (int b : budgets)
    if (b < 0 || b > k) throw std::invalid_argument("budget out of range");
  return *std::max_element(budgets.begin(), budgets.end());
}

}  // namespace

PerQuestionTable loocv_per_question(const ResponseMatrix& data, const std::vector<Strategy>& strategies, ModelKind model,
                                    const std::vector<int>& budgets, const SimulationConfig& config, std::uint64_t seed,
                                    double train_fraction) {
  if (data.cols() < 2) throw std::invalid_argument("leave-one-question-out needs at least 2 questions");
  const Usable usable = drop_empty_columns(data);
  const int T = max_budget(budgets, usable.data.cols());
  PerQuestionTable table;
  table.budgets = budgets;
  table.skipped = usable.skipped;
  std::set<std::string> covariates(config.covariates.begin(), config.covariates.end());
  for (int j = 0; j < usable.data.cols(); ++j) {
    if (covariates.count(usable.data.questions[static_cast<std::size_t>(j)].id)) continue;
    SplitSpec spec{seed, train_fraction, LooHoldout{j}};
    const SimulationReport report = simulate_survey(usable.data, spec, strategies, model, T, config);
    ++table.runs;
    append_rows(table, report, {j}, usable.original);
  }
  return table;
}

PerQuestionTable kfold_per_question(const ResponseMatrix& data, const std::vector<Strategy>& strategies, ModelKind model,
                                    const std::vector<int>& budgets, int folds, const SimulationConfig& config,
                                    std::uint64_t seed, double train_fraction) {
  const Usable usable = drop_empty_columns(data);
  const int T = max_budget(budgets, usable.data.cols());
  PerQuestionTable table;
  table.budgets = budgets;
  table.skipped = usable.skipped;
  std::set<std::string> covariates(config.covariates.begin(), config.covariates.end());
  for (int f = 0; f < folds; ++f) {
    SplitSpec spec{seed, train_fraction, KFoldHoldout{folds, f}};
    std::vector<int> evaluated;
    for (int j : question_fold(static_cast<int>(usable.data.cols()), folds, f, seed))
      if (!covariates.count(usable.data.questions[static_cast<std::size_t>(j)].id)) evaluated.push_back(j);
    if (evaluated.empty()) continue;
    const SimulationReport report = simulate_survey(usable.data, spec, strategies, model, T, config);
    ++table.runs;
    append_rows(table, report, evaluated, usable.original);
  }
  return table;
}

}  // namespace asurvey
