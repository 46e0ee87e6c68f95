#pragma once

#include <iosfwd>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "asurvey/pmf.hpp"

namespace asurvey {

// Optimal-design criteria over the posterior covariance Sigma = precision^-1.
// Smaller is better for all three.
enum class Criterion {
  A,  // trace
  D,  // determinant
  E,  // largest eigenvalue
};

std::string_view to_string(Criterion c);
Criterion parse_criterion(std::string_view text);

double criterion_value(const Matrix& precision, Criterion criterion);

// Criterion after adding alpha v v^T to `precision`, by a rank-one identity
// (A, D) or direct evaluation (E). Only comparable across candidates: the D
// value is returned as -log(1 + alpha v^T Sigma v), which orders candidates
// like det(Sigma').
double updated_criterion_score(const Matrix& precision, const Matrix& covariance, const Vector& v, double alpha,
                               Criterion criterion);

// argmin over candidates of criterion(precision + alpha v_j v_j^T); ties go
// to the lowest question index.
int select_next(const GaussianBelief& belief, std::span<const int> candidates, const Matrix& V, const NoiseModel& noise,
                Criterion criterion);

struct QuestionOrder {
  std::vector<int> sequence;
  Criterion criterion = Criterion::A;
  std::vector<double> objective;  // criterion value after each step
};

// Greedy ordering of T questions. Responses do not enter the objective, so
// only the precision is updated.
QuestionOrder offline_order(const GaussianBelief& prior, const Matrix& V, const NoiseModel& noise, Criterion criterion,
                            int T);

// With probability epsilon a uniform pick from `candidates`, otherwise
// select_next.
int epsilon_greedy_select(const GaussianBelief& belief, std::span<const int> candidates, const Matrix& V,
                          const NoiseModel& noise, Criterion criterion, double epsilon, std::mt19937_64& rng);

// Columns: rank, question_id, objective.
void write_question_order(std::ostream& out, const QuestionOrder& order, const std::vector<QuestionMeta>& questions);

}  // namespace asurvey
