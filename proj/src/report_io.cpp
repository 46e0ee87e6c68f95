#include <ostream>
#include <string>

#include "asurvey/csv.hpp"
#include "asurvey/harness.hpp"

namespace asurvey {

namespace {

void metric_row(std::ostream& out, const std::string& strategy, const std::string& budget, const std::string& question,
                const MetricSet& m) {
  csv::write_row(out, {strategy, budget, question, std::to_string(m.count), csv::format_double(m.mae),
                       csv::format_double(m.mse), csv::format_double(m.bias), csv::format_double(m.wrong_sign)});
}

void metric_block(std::ostream& out, const std::string& strategy, const std::string& budget, const MetricSet& all,
                  const std::vector<MetricSet>& per_question, const std::vector<std::string>& ids) {
  metric_row(out, strategy, budget, "ALL", all);
  for (std::size_t j = 0; j < per_question.size(); ++j)
    if (per_question[j].count > 0) metric_row(out, strategy, budget, ids[j], per_question[j]);
}

}  // namespace

void write_report_csv(std::ostream& out, const SimulationReport& report) {
  csv::write_row(out, {"strategy", "budget", "question", "n", "mae", "mse", "bias", "wrong_sign"});
  for (const auto& s : report.strategies) {
    for (std::size_t t = 0; t < s.overall.size(); ++t)
      metric_block(out, s.strategy, std::to_string(t), s.overall[t], s.per_question[t], report.question_ids);
    metric_block(out, s.strategy, "oracle", s.oracle, s.oracle_per_question, report.question_ids);
  }
}

void write_paths_csv(std::ostream& out, const SimulationReport& report) {
  csv::write_row(out, {"strategy", "user", "step", "question"});
  for (const auto& s : report.strategies)
    for (std::size_t i = 0; i < s.paths.size(); ++i)
      for (std::size_t step = 0; step < s.paths[i].size(); ++step)
        csv::write_row(out, {s.strategy, std::to_string(report.sim_rows.at(i)), std::to_string(step + 1),
                             report.question_ids[static_cast<std::size_t>(s.paths[i][step])]});
}

void write_per_question_csv(std::ostream& out, const PerQuestionTable& table) {
  csv::write_row(out, {"strategy", "question", "budget", "n", "mae", "mse", "bias", "wrong_sign"});
  for (const auto& row : table.rows) {
    metric_row(out, row.strategy, "0", row.question_id, row.pre_survey);
    for (std::size_t b = 0; b < table.budgets.size(); ++b)
      if (table.budgets[b] != 0) metric_row(out, row.strategy, std::to_string(table.budgets[b]), row.question_id, row.by_budget[b]);
    metric_row(out, row.strategy, "oracle", row.question_id, row.oracle);
  }
}

}  // namespace asurvey
