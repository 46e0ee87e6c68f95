#include "asurvey/pmf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asurvey {

Matrix GaussianBelief::covariance() const {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("precision is not positive definite");
  return llt.solve(Matrix::Identity(precision.rows(), precision.cols()));
}

void GaussianBelief::validate() const {
  if (precision.rows() != mean.size() || precision.cols() != mean.size())
    throw std::invalid_argument("belief dimensions disagree");
  if (!mean.allFinite() || !precision.allFinite()) throw std::invalid_argument("belief has non-finite entries");
  if ((precision - precision.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("precision is not symmetric");
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("precision is not positive definite");
}

void NoiseModel::validate() const {
  if (!(alpha > 0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive and finite");
}

GaussianBelief empirical_bayes_prior(const Matrix& user_factors, double jitter) {
  const auto n = user_factors.rows();
  if (n < 2) throw std::invalid_argument("empirical Bayes needs at least 2 users");
  if (jitter < 0) throw std::invalid_argument("jitter must be nonnegative");
  GaussianBelief prior;
  prior.mean = user_factors.colwise().mean().transpose();
  const Matrix centered = user_factors.rowwise() - prior.mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov.diagonal().array() += jitter;
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  if (!(ev(0) > 1e-13 * std::max(ev(ev.size() - 1), 1e-300)))
    throw std::invalid_argument("user factor covariance is singular; use a nonzero jitter");
  Matrix precision = cov.llt().solve(Matrix::Identity(cov.rows(), cov.cols()));
  prior.precision = 0.5 * (precision + precision.transpose());
  return prior;
}

GaussianBelief empirical_bayes_prior(const FactorModel& model, double jitter) {
  return empirical_bayes_prior(model.user_factors(), jitter);
}

GaussianBelief posterior_update(const GaussianBelief& belief, const Vector& v, double response, const NoiseModel& noise) {
  noise.validate();
  if (v.size() != belief.mean.size()) throw std::invalid_argument("question factor has the wrong dimension");
  if (!v.allFinite() || !std::isfinite(response)) throw std::invalid_argument("non-finite update inputs");
  GaussianBelief out;
  out.precision = belief.precision + noise.alpha * v * v.transpose();
  const Vector rhs = noise.alpha * response * v + belief.precision * belief.mean;
  Eigen::LLT<Matrix> llt(out.precision);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("posterior precision is not positive definite");
  out.mean = llt.solve(rhs);
  return out;
}

GaussianBelief batch_posterior(const GaussianBelief& prior, const Matrix& V_obs, const Vector& responses,
                               const NoiseModel& noise) {
  noise.validate();
  if (V_obs.rows() != responses.size()) throw std::invalid_argument("responses and question factors disagree in count");
  if (V_obs.rows() == 0) return prior;
  if (V_obs.cols() != prior.mean.size()) throw std::invalid_argument("question factors have the wrong dimension");
  GaussianBelief out;
  out.precision = prior.precision + noise.alpha * V_obs.transpose() * V_obs;
  out.precision = 0.5 * (out.precision + out.precision.transpose());
  const Vector rhs = noise.alpha * V_obs.transpose() * responses + prior.precision * prior.mean;
  Eigen::LLT<Matrix> llt(out.precision);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("posterior precision is not positive definite");
  out.mean = llt.solve(rhs);
  return out;
}

ResponsePrediction predict_response(const GaussianBelief& belief, const Vector& v, const NoiseModel& noise) {
  noise.validate();
  if (v.size() != belief.mean.size()) throw std::invalid_argument("question factor has the wrong dimension");
  Eigen::LLT<Matrix> llt(belief.precision);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("precision is not positive definite");
  const double mean = belief.mean.dot(v);
  const double variance = v.dot(llt.solve(v)) + noise.variance();
  return {mean, std::clamp(mean, -1.0, 1.0), variance};
}

double estimate_noise_variance(const FactorModel& model, const ResponseMatrix& R) {
  const auto count = R.mask.count();
  if (count == 0) throw std::invalid_argument("no observed entries");
  return R.mask.select(R.values - model.reconstruct(), 0.0).squaredNorm() / static_cast<double>(count);
}

}  // namespace asurvey
