#include "asurvey/active.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "asurvey/csv.hpp"

namespace asurvey {

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::A: return "A";
    case Criterion::D: return "D";
    case Criterion::E: return "E";
  }
  return "A";
}

Criterion parse_criterion(std::string_view text) {
  if (text == "A" || text == "a") return Criterion::A;
  if (text == "D" || text == "d") return Criterion::D;
  if (text == "E" || text == "e") return Criterion::E;
  throw std::invalid_argument("unknown criterion: " + std::string(text));
}

namespace {

Eigen::LLT<Matrix> checked_llt(const Matrix& precision) {
  if (precision.rows() != precision.cols() || precision.rows() == 0) throw std::invalid_argument("precision must be square");
  if ((precision - precision.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, precision.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("precision is not symmetric");
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("precision is not positive definite");
  return llt;
}

}  // namespace

double criterion_value(const Matrix& precision, Criterion criterion) {
  auto llt = checked_llt(precision);
  switch (criterion) {
    case Criterion::A:
      return llt.solve(Matrix::Identity(precision.rows(), precision.cols())).trace();
    case Criterion::D: {
      const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      return std::exp(-logdet);
    }
    case Criterion::E: {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(precision, Eigen::EigenvaluesOnly);
      return 1.0 / eig.eigenvalues()(0);
    }
  }
  return 0.0;
}

double updated_criterion_score(const Matrix& precision, const Matrix& covariance, const Vector& v, double alpha,
                               Criterion criterion) {
  switch (criterion) {
    case Criterion::A: {
      // tr((L + a v v^T)^-1) = tr(S) - a |S v|^2 / (1 + a v^T S v)
      const Vector sv = covariance * v;
      return covariance.trace() - alpha * sv.squaredNorm() / (1.0 + alpha * v.dot(sv));
    }
    case Criterion::D:
      // det(L + a v v^T) = det(L) (1 + a v^T S v)
      return -std::log1p(alpha * v.dot(covariance * v));
    case Criterion::E: {
      const Matrix updated = precision + alpha * v * v.transpose();
      Eigen::SelfAdjointEigenSolver<Matrix> eig(updated, Eigen::EigenvaluesOnly);
      return 1.0 / eig.eigenvalues()(0);
    }
  }
  return 0.0;
}

int select_next(const GaussianBelief& belief, std::span<const int> candidates, const Matrix& V, const NoiseModel& noise,
                Criterion criterion) {
  if (candidates.empty()) throw std::invalid_argument("select_next: empty candidate set");
  noise.validate();
  if (V.cols() != belief.precision.rows()) throw std::invalid_argument("question factors have the wrong dimension");
  auto llt = checked_llt(belief.precision);
  const Matrix covariance = llt.solve(Matrix::Identity(V.cols(), V.cols()));

  int best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int j : candidates) {
    if (j < 0 || j >= V.rows()) throw std::out_of_range("candidate question out of range");
    const double score = updated_criterion_score(belief.precision, covariance, V.row(j).transpose(), noise.alpha, criterion);
    if (score < best_score || (score == best_score && j < best)) {
      best = j;
      best_score = score;
    }
  }
  return best;
}

QuestionOrder offline_order(const GaussianBelief& prior, const Matrix& V, const NoiseModel& noise, Criterion criterion,
                            int T) {
  const auto k = static_cast<int>(V.rows());
  if (T < 0 || T > k) throw std::invalid_argument("offline_order: T must lie in [0, k]");
  QuestionOrder order;
  order.criterion = criterion;
  std::vector<int> unasked(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) unasked[static_cast<std::size_t>(j)] = j;
  GaussianBelief belief = prior;
  for (int t = 0; t < T; ++t) {
    const int j = select_next(belief, unasked, V, noise, criterion);
    const Vector v = V.row(j).transpose();
    belief.precision += noise.alpha * v * v.transpose();
    order.sequence.push_back(j);
    order.objective.push_back(criterion_value(belief.precision, criterion));
    unasked.erase(std::find(unasked.begin(), unasked.end(), j));
  }
  return order;
}

int epsilon_greedy_select(const GaussianBelief& belief, std::span<const int> candidates, const Matrix& V,
                          const NoiseModel& noise, Criterion criterion, double epsilon, std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0,1]");
  if (candidates.empty()) throw std::invalid_argument("epsilon_greedy_select: empty candidate set");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    return candidates[pick(rng)];
  }
  return select_next(belief, candidates, V, noise, criterion);
}

void write_question_order(std::ostream& out, const QuestionOrder& order, const std::vector<QuestionMeta>& questions) {
  csv::write_row(out, {"rank", "question_id", "objective"});
  for (std::size_t t = 0; t < order.sequence.size(); ++t) {
    const int j = order.sequence[t];
    const std::string id = static_cast<std::size_t>(j) < questions.size() ? questions[static_cast<std::size_t>(j)].id
                                                                           : std::to_string(j);
    csv::write_row(out, {std::to_string(t + 1), id, csv::format_double(order.objective[t])});
  }
}

}  // namespace asurvey
