#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asurvey/harness.hpp"

namespace asurvey {

std::vector<double> monotone_curve(std::span<const double> errors) {
  std::vector<double> out(errors.begin(), errors.end());
  for (std::size_t t = 1; t < out.size(); ++t) out[t] = std::min(out[t], out[t - 1]);
  return out;
}

std::optional<double> questions_to_reach(std::span<const double> errors, double level) {
  const auto c = monotone_curve(errors);
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (c[t] > level) continue;
    if (t == 0) return 0.0;
    const double drop = c[t - 1] - c[t];
    return static_cast<double>(t - 1) + (drop > 0 ? (c[t - 1] - level) / drop : 1.0);
  }
  return std::nullopt;
}

std::vector<ComplexityPoint> sample_complexity_curve(std::span<const double> errors_a, std::span<const double> errors_b) {
  if (errors_a.empty() || errors_b.empty()) return {};
  const auto a = monotone_curve(errors_a);
  const auto b = monotone_curve(errors_b);
  const double hi = std::min(a.front(), b.front());
  const double lo = std::max(a.back(), b.back());
  if (lo > hi) return {};

  std::vector<double> levels;
  for (const auto* curve : {&a, &b})
    for (double e : *curve)
      if (e >= lo && e <= hi) levels.push_back(e);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  std::vector<ComplexityPoint> out;
  for (double level : levels) {
    const auto qa = questions_to_reach(a, level);
    const auto qb = questions_to_reach(b, level);
    if (qa && qb) out.push_back({level, *qa, *qb});
  }
  return out;
}

std::vector<ComplexityPoint> sample_complexity_curve(const StrategyResult& a, const StrategyResult& b) {
  auto mae = [](const StrategyResult& s) {
    std::vector<double> out;
    for (const auto& m : s.overall) out.push_back(m.mae);
    return out;
  };
  return sample_complexity_curve(mae(a), mae(b));
}

double percent_reduction(double pre, double at_budget) {
  if (pre == 0.0) throw std::invalid_argument("pre-survey error is zero");
  return 100.0 * (pre - at_budget) / pre;
}

ErrorReductionResult error_reduction_distribution(const PerQuestionTable& table, std::string_view strategy, int budget) {
  const auto it = std::find(table.budgets.begin(), table.budgets.end(), budget);
  if (it == table.budgets.end()) throw std::invalid_argument("budget not present in the table");
  const auto b = static_cast<std::size_t>(it - table.budgets.begin());

  ErrorReductionResult result;
  for (const auto& row : table.rows) {
    if (row.strategy != strategy || row.pre_survey.count == 0) continue;
    if (row.pre_survey.mae == 0.0) {
      result.flagged.push_back(row.question_id);
      continue;
    }
    result.values.push_back({row.question, row.question_id, percent_reduction(row.pre_survey.mae, row.by_budget[b].mae)});
  }
  return result;
}

}  // namespace asurvey
