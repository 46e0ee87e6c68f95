#include "asurvey/ordlogit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace asurvey {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

void Cutpoints::validate() const {
  if (beta.size() < 1) throw std::invalid_argument("cutpoints need at least 2 categories");
  if (!beta.allFinite()) throw std::invalid_argument("cutpoints must be finite");
  for (Eigen::Index m = 1; m < beta.size(); ++m)
    if (!(beta(m) > beta(m - 1))) throw std::invalid_argument("cutpoints must be strictly increasing");
}

namespace {

std::vector<double> smoothed(std::span<const double> counts, double zero_count) {
  if (counts.size() < 2) throw std::invalid_argument("cutpoints need at least 2 categories");
  std::vector<double> c(counts.begin(), counts.end());
  for (double& x : c) {
    if (!(x >= 0) || !std::isfinite(x)) throw std::invalid_argument("counts must be nonnegative and finite");
    if (x == 0) x = zero_count;
  }
  if (!(std::accumulate(c.begin(), c.end(), 0.0) > 0)) throw std::invalid_argument("counts sum to zero");
  return c;
}

Cutpoints cutpoints_from_simplex(const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const auto M = weights.size();
  Cutpoints cut;
  cut.beta.resize(static_cast<Eigen::Index>(M - 1));
  double below = 0.0;
  for (std::size_t m = 0; m + 1 < M; ++m) {
    below += weights[m];
    double above = 0.0;
    for (std::size_t k = m + 1; k < M; ++k) above += weights[k];
    cut.beta(static_cast<Eigen::Index>(m)) = std::log(below / total) - std::log(above / total);
  }
  cut.validate();
  return cut;
}

void check_category(const Cutpoints& cut, int m) {
  if (m < 1 || m > cut.num_categories()) throw std::out_of_range("category out of range");
}

}  // namespace

Cutpoints cutpoints_from_counts(std::span<const double> counts, double zero_count) {
  return cutpoints_from_simplex(smoothed(counts, zero_count));
}

Cutpoints cutpoints_from_dirichlet(std::span<const double> counts, std::mt19937_64& rng, double zero_count) {
  std::vector<double> conc = smoothed(counts, zero_count);
  std::vector<double> draw(conc.size());
  for (std::size_t m = 0; m < conc.size(); ++m) {
    std::gamma_distribution<double> gamma(conc[m], 1.0);
    draw[m] = std::max(gamma(rng), std::numeric_limits<double>::min());
  }
  return cutpoints_from_simplex(draw);
}

std::vector<Cutpoints> cutpoints_from_data(const ResponseMatrix& R, double zero_count) {
  if (R.scale != ResponseScale::categorical) throw std::invalid_argument("cutpoints need categorical responses");
  std::vector<Cutpoints> out;
  for (Eigen::Index j = 0; j < R.cols(); ++j) {
    std::vector<double> counts(static_cast<std::size_t>(R.questions[static_cast<std::size_t>(j)].num_categories), 0.0);
    for (Eigen::Index i = 0; i < R.rows(); ++i)
      if (R.mask(i, j)) counts[static_cast<std::size_t>(R.values(i, j)) - 1] += 1.0;
    out.push_back(cutpoints_from_counts(counts, zero_count));
  }
  return out;
}

double log_category_prob(double eta, const Cutpoints& cut, int m) {
  check_category(cut, m);
  const int M = cut.num_categories();
  if (m == 1) return log_sigmoid(eta + cut.beta(0));
  if (m == M) return log_sigmoid(-(eta + cut.beta(M - 2)));
  const double a = eta + cut.beta(m - 1);
  const double b = eta + cut.beta(m - 2);
  // sigmoid(a) - sigmoid(b) = sigmoid(a) sigmoid(-b) (1 - exp(b - a))
  return log_sigmoid(a) + log_sigmoid(-b) + std::log(-std::expm1(b - a));
}

Vector category_probs(double eta, const Cutpoints& cut) {
  const int M = cut.num_categories();
  Vector p(M);
  for (int m = 1; m <= M; ++m) p(m - 1) = std::exp(log_category_prob(eta, cut, m));
  return p;
}

double expected_response(double eta, const Cutpoints& cut) {
  const Vector p = category_probs(eta, cut);
  double e = 0.0;
  for (Eigen::Index m = 0; m < p.size(); ++m) e += static_cast<double>(m + 1) * p(m);
  return e;
}

double expected_response_scaled(double eta, const Cutpoints& cut) {
  const int M = cut.num_categories();
  return 2.0 * (expected_response(eta, cut) - 1.0) / (M - 1) - 1.0;
}

int sample_category(double eta, const Cutpoints& cut, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  const int M = cut.num_categories();
  for (int m = 1; m < M; ++m)
    if (u < sigmoid(eta + cut.beta(m - 1))) return m;
  return M;
}

double log_category_prob_gradient(double eta, const Cutpoints& cut, int m) {
  check_category(cut, m);
  const int M = cut.num_categories();
  double g = 0.0;
  if (m < M) g += sigmoid(-(eta + cut.beta(m - 1)));
  if (m > 1) g -= sigmoid(eta + cut.beta(m - 2));
  return g;
}

double log_category_prob_curvature(double eta, const Cutpoints& cut, int m) {
  check_category(cut, m);
  const int M = cut.num_categories();
  double h = 0.0;
  if (m < M) {
    const double a = eta + cut.beta(m - 1);
    h += sigmoid(a) * sigmoid(-a);
  }
  if (m > 1) {
    const double b = eta + cut.beta(m - 2);
    h += sigmoid(b) * sigmoid(-b);
  }
  return h;
}

Matrix observed_info(const Vector& u, const Vector& v, const Cutpoints& cut, int m) {
  if (u.size() != v.size()) throw std::invalid_argument("u and v dimensions differ");
  if (!u.allFinite() || !v.allFinite()) throw std::invalid_argument("non-finite factors");
  const double h = log_category_prob_curvature(u.dot(v), cut, m);
  return h * v * v.transpose();
}

Matrix fisher_info(const Vector& u, const Vector& v, const Cutpoints& cut) {
  if (u.size() != v.size()) throw std::invalid_argument("u and v dimensions differ");
  if (!u.allFinite() || !v.allFinite()) throw std::invalid_argument("non-finite factors");
  const double eta = u.dot(v);
  const Vector p = category_probs(eta, cut);
  double w = 0.0;
  for (int m = 1; m <= cut.num_categories(); ++m) w += p(m - 1) * log_category_prob_curvature(eta, cut, m);
  return w * v * v.transpose();
}

InformationState::InformationState(Matrix prior_precision, int num_questions)
    : prior_precision_(std::move(prior_precision)),
      accumulated_(Matrix::Zero(prior_precision_.rows(), prior_precision_.cols())),
      asked_flag_(static_cast<std::size_t>(num_questions), false) {
  if (prior_precision_.rows() != prior_precision_.cols()) throw std::invalid_argument("prior precision must be square");
}

void InformationState::mark_asked(int question) {
  if (question < 0 || static_cast<std::size_t>(question) >= asked_flag_.size())
    throw std::out_of_range("question out of range");
  if (asked_flag_[static_cast<std::size_t>(question)]) throw std::invalid_argument("question already asked");
  asked_flag_[static_cast<std::size_t>(question)] = true;
  asked_.push_back(question);
}

void InformationState::record(int question, int category, const Vector& u_hat, const Vector& v, const Cutpoints& cut) {
  check_category(cut, category);
  mark_asked(question);
  answered_.emplace_back(question, category);
  accumulated_ += observed_info(u_hat, v, cut, category);
}

void InformationState::consume(int question) { mark_asked(question); }

void InformationState::rebase(const Vector& u_hat, const Matrix& V, std::span<const Cutpoints> cutpoints) {
  accumulated_.setZero();
  for (const auto& [q, m] : answered_)
    accumulated_ += observed_info(u_hat, V.row(q).transpose(), cutpoints[static_cast<std::size_t>(q)], m);
}

std::vector<int> InformationState::unasked() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < asked_flag_.size(); ++j)
    if (!asked_flag_[j]) out.push_back(static_cast<int>(j));
  return out;
}

int select_next_adaptive(const Vector& u_hat, const InformationState& state, std::span<const int> candidates,
                         const Matrix& V, std::span<const Cutpoints> cutpoints) {
  if (candidates.empty()) throw std::invalid_argument("select_next_adaptive: empty candidate set");
  const Matrix base = state.precision();
  int best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int j : candidates) {
    if (j < 0 || j >= V.rows()) throw std::out_of_range("candidate question out of range");
    if (state.is_asked(j)) throw std::invalid_argument("candidate question was already asked");
    const Matrix P = base + fisher_info(u_hat, V.row(j).transpose(), cutpoints[static_cast<std::size_t>(j)]);
    Eigen::LLT<Matrix> llt(P);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("Laplace precision is not positive definite");
    const double score = llt.solve(Matrix::Identity(P.rows(), P.cols())).trace();
    if (score < best_score || (score == best_score && j < best)) {
      best = j;
      best_score = score;
    }
  }
  return best;
}

Vector ordlogit_map_estimate(const GaussianBelief& prior, const std::vector<std::pair<int, int>>& answered,
                             const Matrix& V, std::span<const Cutpoints> cutpoints, const Vector* start) {
  Vector u = start ? *start : prior.mean;
  auto objective = [&](const Vector& x) {
    const Vector d = x - prior.mean;
    double f = -0.5 * d.dot(prior.precision * d);
    for (const auto& [q, m] : answered) f += log_category_prob(x.dot(V.row(q)), cutpoints[static_cast<std::size_t>(q)], m);
    return f;
  };
  double f = objective(u);
  for (int it = 0; it < 100; ++it) {
    Vector grad = -prior.precision * (u - prior.mean);
    Matrix neg_hess = prior.precision;
    for (const auto& [q, m] : answered) {
      const Vector v = V.row(q).transpose();
      const double eta = u.dot(v);
      const auto& cut = cutpoints[static_cast<std::size_t>(q)];
      grad += log_category_prob_gradient(eta, cut, m) * v;
      neg_hess += log_category_prob_curvature(eta, cut, m) * v * v.transpose();
    }
    const Vector step = neg_hess.llt().solve(grad);
    double scale = 1.0;
    Vector next = u + step;
    double f_next = objective(next);
    while (f_next < f && scale > 1e-8) {
      scale *= 0.5;
      next = u + scale * step;
      f_next = objective(next);
    }
    const double moved = (next - u).norm();
    if (f_next >= f) {
      u = std::move(next);
      f = f_next;
    }
    if (moved < 1e-12 * (1.0 + u.norm())) break;
  }
  return u;
}

GaussianBelief standard_normal_belief(int rank) {
  return {Vector::Zero(rank), Matrix::Identity(rank, rank)};
}

void VariationalParams::validate() const {
  if (user_mean.rows() != user_sd.rows() || user_mean.cols() != user_sd.cols() ||
      question_mean.rows() != question_sd.rows() || question_mean.cols() != question_sd.cols() ||
      user_mean.cols() != question_mean.cols())
    throw std::invalid_argument("variational parameter shapes disagree");
  if (!user_mean.allFinite() || !user_sd.allFinite() || !question_mean.allFinite() || !question_sd.allFinite())
    throw std::invalid_argument("variational parameters must be finite");
  if ((user_sd.array() <= 0).any() || (question_sd.array() <= 0).any())
    throw std::invalid_argument("variational standard deviations must be positive");
}

Matrix ordlogit_predict_scaled(const VariationalParams& params, std::span<const Cutpoints> cutpoints) {
  const Matrix eta = params.user_mean * params.question_mean.transpose();
  Matrix out(eta.rows(), eta.cols());
  for (Eigen::Index j = 0; j < eta.cols(); ++j)
    for (Eigen::Index i = 0; i < eta.rows(); ++i)
      out(i, j) = expected_response_scaled(eta(i, j), cutpoints[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace asurvey
