#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "asurvey/data.hpp"
#include "asurvey/pmf.hpp"

namespace asurvey {

// Ordered-logit response model.
//
// Categories are 1..M. The cumulative probability of answering at most m is
//   F_m = sigmoid(eta + beta_m),  m = 1..M-1,
// with eta = u^T v. Larger eta therefore moves mass toward category 1.

struct Cutpoints {
  Vector beta;  // strictly increasing, length M - 1

  [[nodiscard]] int num_categories() const { return static_cast<int>(beta.size()) + 1; }
  void validate() const;
};

double sigmoid(double x);
double log_sigmoid(double x);

// Dirichlet-mean cutpoints from per-category counts; zero counts are replaced
// by `zero_count`.
Cutpoints cutpoints_from_counts(std::span<const double> counts, double zero_count = 0.5);
// Cutpoints from a Dirichlet(counts) draw.
Cutpoints cutpoints_from_dirichlet(std::span<const double> counts, std::mt19937_64& rng, double zero_count = 0.5);
// Per-question cutpoints from the observed categories of a categorical matrix.
std::vector<Cutpoints> cutpoints_from_data(const ResponseMatrix& R, double zero_count = 0.5);

Vector category_probs(double eta, const Cutpoints& cut);
double expected_response(double eta, const Cutpoints& cut);
// Expected response mapped to [-1, 1] with the same linear map as the data.
double expected_response_scaled(double eta, const Cutpoints& cut);
int sample_category(double eta, const Cutpoints& cut, std::mt19937_64& rng);

double log_category_prob(double eta, const Cutpoints& cut, int m);
// d/d eta log pi_m
double log_category_prob_gradient(double eta, const Cutpoints& cut, int m);
// -d^2/d eta^2 log pi_m; always positive.
double log_category_prob_curvature(double eta, const Cutpoints& cut, int m);

// -Hessian in u of log pi_m(u^T v).
Matrix observed_info(const Vector& u, const Vector& v, const Cutpoints& cut, int m);
// Expectation of observed_info over the response distribution at u.
Matrix fisher_info(const Vector& u, const Vector& v, const Cutpoints& cut);

// Per-user state for adaptive selection under the Laplace approximation.
class InformationState {
 public:
  InformationState(Matrix prior_precision, int num_questions);

  // Answered question: adds J^j(u_hat; m) to the accumulated information.
  void record(int question, int category, const Vector& u_hat, const Vector& v, const Cutpoints& cut);
  // Question consumed without a response.
  void consume(int question);
  // Re-evaluates the accumulated information at a new point estimate.
  void rebase(const Vector& u_hat, const Matrix& V, std::span<const Cutpoints> cutpoints);

  [[nodiscard]] const Matrix& prior_precision() const { return prior_precision_; }
  [[nodiscard]] const Matrix& accumulated() const { return accumulated_; }
  [[nodiscard]] Matrix precision() const { return prior_precision_ + accumulated_; }
  [[nodiscard]] const std::vector<std::pair<int, int>>& answered() const { return answered_; }
  [[nodiscard]] const std::vector<int>& asked() const { return asked_; }
  [[nodiscard]] std::vector<int> unasked() const;
  [[nodiscard]] bool is_asked(int question) const { return asked_flag_.at(static_cast<std::size_t>(question)); }

 private:
  void mark_asked(int question);

  Matrix prior_precision_;
  Matrix accumulated_;
  std::vector<std::pair<int, int>> answered_;  // (question, category)
  std::vector<int> asked_;
  std::vector<bool> asked_flag_;
};

// Adaptive A-optimal pick: argmin_j tr[(prior + accumulated + I^j(u_hat))^-1].
int select_next_adaptive(const Vector& u_hat, const InformationState& state, std::span<const int> candidates,
                         const Matrix& V, std::span<const Cutpoints> cutpoints);

// Single-user posterior mode under a Gaussian prior with V held fixed
// (Newton's method). Used for live sessions.
Vector ordlogit_map_estimate(const GaussianBelief& prior, const std::vector<std::pair<int, int>>& answered,
                             const Matrix& V, std::span<const Cutpoints> cutpoints, const Vector* start = nullptr);

// Mean-field Gaussian variational inference.

struct VariationalParams {
  Matrix user_mean;      // n x r
  Matrix user_sd;        // n x r
  Matrix question_mean;  // k x r
  Matrix question_sd;    // k x r

  void validate() const;
};

struct VariationalConfig {
  int mc_samples = 8;
  double step_size = 0.05;
  int max_epochs = 600;
  std::uint64_t seed = 0;
  // Relative gain of the smoothed ELBO over a 50-epoch window below which the
  // optimisation stops early. Zero disables early stopping.
  double tol = 1e-4;
  double init_sd = 0.1;
};

struct VariationalFit {
  VariationalParams params;
  std::vector<double> elbo_trace;  // exponentially smoothed per epoch
  double elbo = 0.0;
  int epochs = 0;
};

// R must be categorical. Priors default to N(0, I) for both sides.
VariationalFit fit_variational(const ResponseMatrix& R, std::span<const Cutpoints> cutpoints, int rank,
                               const GaussianBelief& user_prior, const GaussianBelief& question_prior,
                               const VariationalConfig& config, const VariationalParams* warm_start = nullptr);

GaussianBelief standard_normal_belief(int rank);

// Expected responses at the variational means, scaled to [-1, 1].
Matrix ordlogit_predict_scaled(const VariationalParams& params, std::span<const Cutpoints> cutpoints);

}  // namespace asurvey
