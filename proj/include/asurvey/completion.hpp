#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asurvey/data.hpp"

namespace asurvey {

enum class FactorMethod { softimpute, als };

// Low-rank factorisation Z = U diag(d) V^T.
//
// SoftImpute output has orthonormal columns in U and V and a nonnegative,
// nonincreasing d. ALS output uses d = 1 with the scale absorbed into U, V.
struct FactorModel {
  Matrix U;   // n x r
  Vector d;   // r
  Matrix V;   // k x r
  double lambda = 0.0;
  FactorMethod method = FactorMethod::softimpute;
  int iterations = 0;
  bool converged = true;

  [[nodiscard]] int rank() const { return static_cast<int>(d.size()); }
  // Rows of U diag(d): the implied user factors.
  [[nodiscard]] Matrix user_factors() const { return U * d.asDiagonal(); }
  [[nodiscard]] Matrix reconstruct() const { return U * d.asDiagonal() * V.transpose(); }
  // Throws std::invalid_argument when an invariant is violated.
  void validate(double orthonormal_tol = 1e-6) const;
};

FactorModel soft_threshold_svd(const Matrix& Z, double lambda, int rank);

struct SoftImputeOptions {
  double lambda = 0.0;
  int rank = 4;
  double tol = 1e-5;
  int max_iter = 500;
};

struct SoftImputeFit {
  FactorModel model;
  // Value of 0.5 * sum_obs (R - Z)^2 + lambda * ||Z||_* after every iteration.
  std::vector<double> objective;
};

double softimpute_objective(const ResponseMatrix& R, const Matrix& Z, double lambda);

// `warm_start`, when given, supplies the initial fill of the missing entries.
SoftImputeFit softimpute_fit(const ResponseMatrix& R, const SoftImputeOptions& options,
                             const FactorModel* warm_start = nullptr);

struct LambdaSearchResult {
  double best_lambda = 0.0;
  std::vector<double> lambdas;
  std::vector<double> validation_mae;
};

// Index of the smallest MAE; ties go to the earlier (larger) lambda.
std::size_t select_lambda_index(const std::vector<double>& validation_mae);

LambdaSearchResult lambda_grid_search(const ResponseMatrix& train, const std::vector<double>& grid,
                                      double val_fraction, int rank, std::uint64_t seed,
                                      double tol = 1e-5, int max_iter = 500);

// Log-spaced descending grid from the largest singular value of the
// zero-filled observed matrix down to `ratio` times that value.
std::vector<double> default_lambda_grid(const ResponseMatrix& R, int points = 12, double ratio = 1e-3);

struct AlsOptions {
  double lambda_u = 1.0;
  double lambda_v = 1.0;
  int rank = 4;
  double tol = 1e-5;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

struct AlsFit {
  FactorModel model;
  // Objective after every half-step (U solve, then V solve).
  std::vector<double> objective;
};

double als_objective(const ResponseMatrix& R, const Matrix& U, const Matrix& V, double lambda_u, double lambda_v);

AlsFit als_fit(const ResponseMatrix& R, const AlsOptions& options);

struct EntryPrediction {
  double value;    // u_i^T D v_j
  double clamped;  // value restricted to [-1, 1]
};

EntryPrediction predict_entry(const FactorModel& model, Eigen::Index i, Eigen::Index j);

}  // namespace asurvey
