#include "asurvey/completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace asurvey {

namespace {

void require_finite(const Matrix& Z) {
  if (!Z.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
}

// Observed entries copied from R, the rest from `fill`.
Matrix merge_observed(const ResponseMatrix& R, const Matrix& fill) {
  return R.mask.select(R.values, fill);
}

Matrix column_mean_fill(const ResponseMatrix& R) {
  Matrix fill(R.rows(), R.cols());
  for (Eigen::Index j = 0; j < R.cols(); ++j) {
    const auto count = R.mask.col(j).count();
    if (count == 0) throw std::invalid_argument("column has no observations: " + R.questions[static_cast<std::size_t>(j)].id);
    const double mean = R.mask.col(j).select(R.values.col(j), 0.0).sum() / static_cast<double>(count);
    fill.col(j).setConstant(mean);
  }
  return fill;
}

// Per-row random reservation of ceil(fraction * observed) entries.
MaskMatrix sample_validation(const MaskMatrix& mask, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MaskMatrix held = MaskMatrix::Constant(mask.rows(), mask.cols(), false);
  std::vector<Eigen::Index> obs;
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    obs.clear();
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      if (mask(i, j)) obs.push_back(j);
    if (obs.empty()) continue;
    const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(obs.size()) - 1e-12));
    std::shuffle(obs.begin(), obs.end(), rng);
    for (std::size_t p = 0; p < count && p < obs.size(); ++p) held(i, obs[p]) = true;
  }
  return held;
}

}  // namespace

void FactorModel::validate(double orthonormal_tol) const {
  const auto r = d.size();
  if (r < 1) throw std::invalid_argument("factor model rank must be >= 1");
  if (U.cols() != r || V.cols() != r) throw std::invalid_argument("factor dimensions disagree with rank");
  if (!U.allFinite() || !V.allFinite() || !d.allFinite()) throw std::invalid_argument("factor model has non-finite entries");
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  for (Eigen::Index a = 0; a < r; ++a) {
    if (d(a) < 0) throw std::invalid_argument("singular values must be nonnegative");
    if (a > 0 && d(a) > d(a - 1)) throw std::invalid_argument("singular values must be nonincreasing");
  }
  if (method == FactorMethod::softimpute) {
    const Matrix I = Matrix::Identity(r, r);
    if ((U.transpose() * U - I).cwiseAbs().maxCoeff() > orthonormal_tol ||
        (V.transpose() * V - I).cwiseAbs().maxCoeff() > orthonormal_tol)
      throw std::invalid_argument("softimpute factors are not orthonormal");
  }
}

FactorModel soft_threshold_svd(const Matrix& Z, double lambda, int rank) {
  require_finite(Z);
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  if (rank < 1 || rank > std::min(Z.rows(), Z.cols())) throw std::invalid_argument("rank must lie in [1, min(n,k)]");
  Eigen::BDCSVD<Matrix> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  FactorModel out;
  out.U = svd.matrixU().leftCols(rank);
  out.V = svd.matrixV().leftCols(rank);
  out.d = (svd.singularValues().head(rank).array() - lambda).max(0.0).matrix();
  out.lambda = lambda;
  out.method = FactorMethod::softimpute;
  return out;
}

double softimpute_objective(const ResponseMatrix& R, const Matrix& Z, double lambda) {
  const double loss = R.mask.select(R.values - Z, 0.0).squaredNorm();
  Eigen::BDCSVD<Matrix> svd(Z);
  return 0.5 * loss + lambda * svd.singularValues().sum();
}

SoftImputeFit softimpute_fit(const ResponseMatrix& R, const SoftImputeOptions& options, const FactorModel* warm_start) {
  if (options.lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  if (options.max_iter < 1) throw std::invalid_argument("max_iter must be positive");
  require_finite(R.mask.select(R.values, 0.0));
  Matrix Z = column_mean_fill(R);  // also rejects empty columns
  if (warm_start) {
    if (warm_start->U.rows() != R.rows() || warm_start->V.rows() != R.cols())
      throw std::invalid_argument("warm start has the wrong shape");
    Z = warm_start->reconstruct();
  }

  const MaskMatrix missing = !R.mask;
  const bool any_missing = missing.any();
  SoftImputeFit fit;
  fit.model.converged = false;
  for (int it = 1; it <= options.max_iter; ++it) {
    FactorModel step = soft_threshold_svd(merge_observed(R, Z), options.lambda, options.rank);
    Matrix Z_new = step.reconstruct();
    const double residual = R.mask.select(R.values - Z_new, 0.0).squaredNorm();
    fit.objective.push_back(0.5 * residual + options.lambda * step.d.sum());

    double change = 0.0;
    if (any_missing) {
      const double num = missing.select(Z_new - Z, 0.0).squaredNorm();
      const double den = missing.select(Z, 0.0).squaredNorm();
      change = num / std::max(den, std::numeric_limits<double>::min());
    }
    Z = std::move(Z_new);
    fit.model = std::move(step);
    fit.model.iterations = it;
    if (!any_missing || change < options.tol) {
      fit.model.converged = true;
      break;
    }
  }
  return fit;
}

std::size_t select_lambda_index(const std::vector<double>& validation_mae) {
  if (validation_mae.empty()) throw std::invalid_argument("empty lambda grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < validation_mae.size(); ++i)
    if (validation_mae[i] < validation_mae[best]) best = i;
  return best;
}

LambdaSearchResult lambda_grid_search(const ResponseMatrix& train, const std::vector<double>& grid, double val_fraction,
                                      int rank, std::uint64_t seed, double tol, int max_iter) {
  if (grid.empty()) throw std::invalid_argument("empty lambda grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] < grid[i - 1])) throw std::invalid_argument("lambda grid must be strictly descending");
  if (!(val_fraction > 0 && val_fraction < 1)) throw std::invalid_argument("val_fraction must lie in (0,1)");

  const MaskMatrix validation = sample_validation(train.mask, val_fraction, seed);
  ResponseMatrix fit_part = train;
  fit_part.mask = train.mask && !validation;
  const bool clamp = train.scale == ResponseScale::scaled;
  const auto n_val = static_cast<double>(validation.count());

  LambdaSearchResult result;
  result.lambdas = grid;
  std::optional<FactorModel> previous;
  for (double lambda : grid) {
    SoftImputeFit fit = softimpute_fit(fit_part, {lambda, rank, tol, max_iter}, previous ? &*previous : nullptr);
    Matrix Z = fit.model.reconstruct();
    if (clamp) Z = Z.cwiseMax(-1.0).cwiseMin(1.0);
    const double mae = n_val > 0 ? validation.select((Z - train.values).cwiseAbs(), 0.0).sum() / n_val : 0.0;
    result.validation_mae.push_back(mae);
    previous = std::move(fit.model);
  }
  result.best_lambda = grid[select_lambda_index(result.validation_mae)];
  return result;
}

std::vector<double> default_lambda_grid(const ResponseMatrix& R, int points, double ratio) {
  if (points < 1) throw std::invalid_argument("grid needs at least one point");
  const Matrix observed = R.mask.select(R.values, 0.0);
  Eigen::BDCSVD<Matrix> svd(observed);
  const double top = std::max(svd.singularValues()(0), 1e-12);
  std::vector<double> grid;
  for (int p = 0; p < points; ++p) {
    const double t = points == 1 ? 0.0 : static_cast<double>(p) / (points - 1);
    grid.push_back(top * std::pow(ratio, t));
  }
  return grid;
}

double als_objective(const ResponseMatrix& R, const Matrix& U, const Matrix& V, double lambda_u, double lambda_v) {
  const Matrix Z = U * V.transpose();
  return 0.5 * R.mask.select(R.values - Z, 0.0).squaredNorm() + 0.5 * lambda_u * U.squaredNorm() +
         0.5 * lambda_v * V.squaredNorm();
}

namespace {

// Ridge solve for every row of `target` given the fixed factors `other`.
// `transposed` selects whether rows of `target` index rows (false) or
// columns (true) of R.
void ridge_rows(const ResponseMatrix& R, const Matrix& other, double lambda, bool transposed, Matrix& target) {
  const auto r = other.cols();
  const Matrix ridge = lambda * Matrix::Identity(r, r);
  const Eigen::Index count = transposed ? R.cols() : R.rows();
  const Eigen::Index inner = transposed ? R.rows() : R.cols();
  for (Eigen::Index a = 0; a < count; ++a) {
    Matrix A = ridge;
    Vector b = Vector::Zero(r);
    for (Eigen::Index c = 0; c < inner; ++c) {
      const Eigen::Index i = transposed ? c : a;
      const Eigen::Index j = transposed ? a : c;
      if (!R.mask(i, j)) continue;
      const auto o = other.row(c).transpose();
      A.noalias() += o * o.transpose();
      b.noalias() += R.values(i, j) * o;
    }
    target.row(a) = A.llt().solve(b).transpose();
  }
}

}  // namespace

AlsFit als_fit(const ResponseMatrix& R, const AlsOptions& options) {
  if (!(options.lambda_u > 0 && options.lambda_v > 0)) throw std::invalid_argument("ALS needs positive lambda_U and lambda_V");
  if (options.rank < 1) throw std::invalid_argument("rank must be positive");
  require_finite(R.mask.select(R.values, 0.0));

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix U = Matrix::Zero(R.rows(), options.rank);
  Matrix V(R.cols(), options.rank);
  for (Eigen::Index j = 0; j < V.rows(); ++j)
    for (Eigen::Index a = 0; a < V.cols(); ++a) V(j, a) = normal(rng);

  AlsFit fit;
  fit.model.converged = false;
  double previous = als_objective(R, U, V, options.lambda_u, options.lambda_v);
  int it = 1;
  for (; it <= options.max_iter; ++it) {
    ridge_rows(R, V, options.lambda_u, false, U);
    fit.objective.push_back(als_objective(R, U, V, options.lambda_u, options.lambda_v));
    ridge_rows(R, U, options.lambda_v, true, V);
    const double current = als_objective(R, U, V, options.lambda_u, options.lambda_v);
    fit.objective.push_back(current);
    const double decrease = (previous - current) / std::max(std::abs(previous), std::numeric_limits<double>::min());
    previous = current;
    if (it > 1 && decrease < options.tol) {
      fit.model.converged = true;
      break;
    }
  }
  fit.model.U = std::move(U);
  fit.model.V = std::move(V);
  fit.model.d = Vector::Ones(options.rank);
  fit.model.lambda = options.lambda_u;
  fit.model.method = FactorMethod::als;
  fit.model.iterations = std::min(it, options.max_iter);
  return fit;
}

EntryPrediction predict_entry(const FactorModel& model, Eigen::Index i, Eigen::Index j) {
  if (i < 0 || i >= model.U.rows() || j < 0 || j >= model.V.rows()) throw std::out_of_range("predict_entry index out of range");
  const double value = (model.U.row(i).array() * model.d.transpose().array()).matrix().dot(model.V.row(j));
  return {value, std::clamp(value, -1.0, 1.0)};
}

}  // namespace asurvey
