#pragma once

#include "asurvey/completion.hpp"
#include "asurvey/data.hpp"

namespace asurvey {

// Gaussian belief over a user's latent factors, stored as mean and precision.
struct GaussianBelief {
  Vector mean;
  Matrix precision;

  [[nodiscard]] int dim() const { return static_cast<int>(mean.size()); }
  [[nodiscard]] Matrix covariance() const;
  // Symmetric to 1e-10 and Cholesky-factorisable.
  void validate() const;
};

struct NoiseModel {
  double alpha = 1.0;  // response precision

  [[nodiscard]] double variance() const { return 1.0 / alpha; }
  void validate() const;
};

// Mean and inverse(sample covariance + jitter I) of the rows of `user_factors`.
GaussianBelief empirical_bayes_prior(const Matrix& user_factors, double jitter = 1e-6);
GaussianBelief empirical_bayes_prior(const FactorModel& model, double jitter = 1e-6);

// Conjugate update for one response to a question with factor `v`.
GaussianBelief posterior_update(const GaussianBelief& belief, const Vector& v, double response, const NoiseModel& noise);

// Posterior after the responses in `responses` to the questions whose factors
// are the rows of `V_obs`.
GaussianBelief batch_posterior(const GaussianBelief& prior, const Matrix& V_obs, const Vector& responses,
                               const NoiseModel& noise);

struct ResponsePrediction {
  double mean;
  double clamped;   // mean restricted to [-1, 1]
  double variance;  // v^T Sigma v + 1/alpha
};

ResponsePrediction predict_response(const GaussianBelief& belief, const Vector& v, const NoiseModel& noise);

// Mean squared residual of the fitted model on observed entries; an estimate
// of the noise variance 1/alpha.
double estimate_noise_variance(const FactorModel& model, const ResponseMatrix& R);

}  // namespace asurvey
