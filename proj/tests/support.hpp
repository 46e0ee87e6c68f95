#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "asurvey/completion.hpp"
#include "asurvey/model_io.hpp"
#include "asurvey/pmf.hpp"
#include "asurvey/synthetic.hpp"

namespace testing {

using asurvey::Matrix;
using asurvey::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Vector random_vector(Eigen::Index size, std::mt19937_64& rng, double sd = 1.0) {
  return random_matrix(size, 1, rng, sd).col(0);
}

// Well-conditioned SPD matrix.
inline Matrix random_spd(Eigen::Index r, std::mt19937_64& rng) {
  const Matrix A = random_matrix(r, r, rng);
  return A * A.transpose() + 0.5 * Matrix::Identity(r, r);
}

inline asurvey::GaussianBelief random_belief(Eigen::Index r, std::mt19937_64& rng) {
  return {random_vector(r, rng), random_spd(r, rng)};
}

// Plain Gauss-Jordan inverse; independent of Eigen's decompositions.
inline Matrix gauss_jordan_inverse(Matrix A) {
  const auto n = A.rows();
  Matrix inv = Matrix::Identity(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index pivot = c;
    for (Eigen::Index r = c + 1; r < n; ++r)
      if (std::abs(A(r, c)) > std::abs(A(pivot, c))) pivot = r;
    A.row(c).swap(A.row(pivot));
    inv.row(c).swap(inv.row(pivot));
    const double p = A(c, c);
    A.row(c) /= p;
    inv.row(c) /= p;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = A(r, c);
      A.row(r) -= f * A.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

inline double relative_diff(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// Gaussian survey model with M-category questions and known factors.
inline asurvey::SurveyModel small_gaussian_model(int k = 8, int r = 3, std::uint64_t seed = 1, int categories = 5) {
  std::mt19937_64 rng(seed);
  asurvey::SurveyModel m;
  for (int j = 0; j < k; ++j) {
    asurvey::QuestionMeta q;
    q.id = "q" + std::to_string(j + 1);
    q.num_categories = categories;
    q.text = "Question " + std::to_string(j + 1);
    for (int c = 1; c <= categories; ++c) q.labels.push_back("option " + std::to_string(c));
    m.questions.push_back(q);
  }
  m.scale = asurvey::ResponseScale::scaled;
  m.factors.method = asurvey::FactorMethod::als;
  m.factors.U = random_matrix(10, r, rng);
  m.factors.d = Vector::Ones(r);
  m.factors.V = random_matrix(k, r, rng, 0.5);
  m.prior = {Vector::Zero(r), Matrix::Identity(r, r)};
  m.noise.alpha = 2.0;
  return m;
}

// Adds an ordered-logit component sharing the question set.
inline void add_ordlogit(asurvey::SurveyModel& m, std::uint64_t seed = 2) {
  std::mt19937_64 rng(seed);
  asurvey::OrdLogitComponent o;
  const auto r = m.rank();
  o.V = random_matrix(m.num_questions(), r, rng);
  o.V_sd = Matrix::Constant(m.num_questions(), r, 0.1);
  for (const auto& q : m.questions) o.cutpoints.push_back(asurvey::uniform_cutpoints(q.num_categories));
  o.prior = {Vector::Zero(r), Matrix::Identity(r, r)};
  m.ordlogit = std::move(o);
}

}  // namespace testing
