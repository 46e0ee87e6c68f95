#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "asurvey/ordlogit.hpp"

namespace asurvey {

namespace {

struct Observation {
  int user;
  int question;
  int category;
};

// Adam ascent on a block of parameters.
class Adam {
 public:
  Adam(Eigen::Index rows, Eigen::Index cols, double step) : m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)), step_(step) {}

  void ascend(Matrix& param, const Matrix& grad, int t) {
    m_ = beta1 * m_ + (1 - beta1) * grad;
    v_ = beta2 * v_ + (1 - beta2) * grad.cwiseAbs2();
    const double c1 = 1 - std::pow(beta1, t);
    const double c2 = 1 - std::pow(beta2, t);
    param.array() += step_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + 1e-8);
  }

 private:
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  Matrix m_, v_;
  double step_;
};

// KL(q || p) for q = N(mean_row, diag(sd_row^2)) summed over rows, with
// gradients of -KL written into the gradient buffers.
double kl_rows(const Matrix& mean, const Matrix& log_sd, const GaussianBelief& prior, double logdet_prior,
               Matrix& grad_mean, Matrix& grad_log_sd) {
  const auto r = mean.cols();
  const Vector diag = prior.precision.diagonal();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    const Vector d = mean.row(i).transpose() - prior.mean;
    const Vector Ld = prior.precision * d;
    const Vector var = (2.0 * log_sd.row(i).transpose()).array().exp();
    kl += 0.5 * (diag.dot(var) + d.dot(Ld) - static_cast<double>(r) - logdet_prior - 2.0 * log_sd.row(i).sum());
    grad_mean.row(i) -= Ld.transpose();
    grad_log_sd.row(i) -= (diag.array() * var.array() - 1.0).matrix().transpose();
  }
  return kl;
}

double log_det(const Matrix& precision) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("prior precision is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

VariationalFit fit_variational(const ResponseMatrix& R, std::span<const Cutpoints> cutpoints, int rank,
                               const GaussianBelief& user_prior, const GaussianBelief& question_prior,
                               const VariationalConfig& config, const VariationalParams* warm_start) {
  if (R.scale != ResponseScale::categorical) throw std::invalid_argument("variational fit needs categorical responses");
  if (static_cast<Eigen::Index>(cutpoints.size()) != R.cols()) throw std::invalid_argument("one cutpoint set per question required");
  if (rank < 1) throw std::invalid_argument("rank must be positive");
  if (user_prior.dim() != rank || question_prior.dim() != rank) throw std::invalid_argument("prior dimension differs from rank");
  if (config.mc_samples < 1 || config.max_epochs < 1 || !(config.step_size > 0))
    throw std::invalid_argument("invalid variational configuration");

  std::vector<Observation> obs;
  for (Eigen::Index i = 0; i < R.rows(); ++i)
    for (Eigen::Index j = 0; j < R.cols(); ++j)
      if (R.mask(i, j)) {
        const int m = static_cast<int>(R.values(i, j));
        if (m < 1 || m > cutpoints[static_cast<std::size_t>(j)].num_categories())
          throw std::invalid_argument("response outside the cutpoint range");
        obs.push_back({static_cast<int>(i), static_cast<int>(j), m});
      }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = R.rows();
  const auto k = R.cols();

  Matrix um, uls, qm, qls;
  if (warm_start) {
    warm_start->validate();
    if (warm_start->user_mean.rows() != n || warm_start->question_mean.rows() != k || warm_start->user_mean.cols() != rank)
      throw std::invalid_argument("warm start has the wrong shape");
    um = warm_start->user_mean;
    uls = warm_start->user_sd.array().log();
    qm = warm_start->question_mean;
    qls = warm_start->question_sd.array().log();
  } else {
    um.resize(n, rank);
    qm.resize(k, rank);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index a = 0; a < rank; ++a) um(i, a) = user_prior.mean(a) + config.init_sd * normal(rng);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index a = 0; a < rank; ++a) qm(j, a) = question_prior.mean(a) + config.init_sd * normal(rng);
    uls = Matrix::Constant(n, rank, std::log(config.init_sd));
    qls = Matrix::Constant(k, rank, std::log(config.init_sd));
  }

  const double logdet_u = log_det(user_prior.precision);
  const double logdet_q = log_det(question_prior.precision);
  Adam adam_um(n, rank, config.step_size), adam_uls(n, rank, config.step_size);
  Adam adam_qm(k, rank, config.step_size), adam_qls(k, rank, config.step_size);

  Matrix g_um(n, rank), g_uls(n, rank), g_qm(k, rank), g_qls(k, rank);
  Matrix eps_u(n, rank), eps_q(k, rank), us(n, rank), qs(k, rank);

  VariationalFit fit;
  double smoothed = 0.0;
  double checkpoint = 0.0;
  const int window = 50;
  const double inv_samples = 1.0 / config.mc_samples;
  int epoch = 1;
  for (; epoch <= config.max_epochs; ++epoch) {
    g_um.setZero();
    g_uls.setZero();
    g_qm.setZero();
    g_qls.setZero();
    const Matrix usd = uls.array().exp();
    const Matrix qsd = qls.array().exp();
    double loglik = 0.0;
    for (int s = 0; s < config.mc_samples; ++s) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < rank; ++a) eps_u(i, a) = normal(rng);
      for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index a = 0; a < rank; ++a) eps_q(j, a) = normal(rng);
      us = um + usd.cwiseProduct(eps_u);
      qs = qm + qsd.cwiseProduct(eps_q);
      for (const auto& o : obs) {
        const auto u = us.row(o.user);
        const auto v = qs.row(o.question);
        const double eta = u.dot(v);
        const auto& cut = cutpoints[static_cast<std::size_t>(o.question)];
        loglik += log_category_prob(eta, cut, o.category);
        const double g = log_category_prob_gradient(eta, cut, o.category) * inv_samples;
        g_um.row(o.user) += g * v;
        g_uls.row(o.user) += g * v.cwiseProduct(eps_u.row(o.user)).cwiseProduct(usd.row(o.user));
        g_qm.row(o.question) += g * u;
        g_qls.row(o.question) += g * u.cwiseProduct(eps_q.row(o.question)).cwiseProduct(qsd.row(o.question));
      }
    }
    loglik *= inv_samples;
    const double kl = kl_rows(um, uls, user_prior, logdet_u, g_um, g_uls) + kl_rows(qm, qls, question_prior, logdet_q, g_qm, g_qls);
    const double elbo = loglik - kl;
    if (!std::isfinite(elbo) || !g_um.allFinite() || !g_qm.allFinite())
      throw std::runtime_error("variational inference diverged at epoch " + std::to_string(epoch));

    smoothed = epoch == 1 ? elbo : 0.9 * smoothed + 0.1 * elbo;
    fit.elbo_trace.push_back(smoothed);

    adam_um.ascend(um, g_um, epoch);
    adam_uls.ascend(uls, g_uls, epoch);
    adam_qm.ascend(qm, g_qm, epoch);
    adam_qls.ascend(qls, g_qls, epoch);

    if (config.tol > 0 && epoch % window == 0) {
      if (epoch > window && smoothed - checkpoint < config.tol * std::abs(smoothed)) break;
      checkpoint = smoothed;
    }
  }

  fit.epochs = std::min(epoch, config.max_epochs);
  fit.elbo = smoothed;
  fit.params.user_mean = std::move(um);
  fit.params.user_sd = uls.array().exp();
  fit.params.question_mean = std::move(qm);
  fit.params.question_sd = qls.array().exp();
  return fit;
}

}  // namespace asurvey
