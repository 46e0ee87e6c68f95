#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "asurvey/completion.hpp"
#include "support.hpp"

using namespace asurvey;
using testing::random_matrix;

namespace {

ResponseMatrix masked(const Matrix& full, double observed, std::mt19937_64& rng, ResponseScale scale = ResponseScale::real) {
  std::uniform_real_distribution<double> u(0, 1);
  ResponseMatrix R;
  R.values = full;
  R.mask = MaskMatrix::Constant(full.rows(), full.cols(), false);
  for (Eigen::Index i = 0; i < full.rows(); ++i)
    for (Eigen::Index j = 0; j < full.cols(); ++j) R.mask(i, j) = u(rng) < observed;
  // keep every column and row non-empty
  for (Eigen::Index j = 0; j < full.cols(); ++j) R.mask(j % full.rows(), j) = true;
  for (Eigen::Index i = 0; i < full.rows(); ++i) R.mask(i, i % full.cols()) = true;
  for (Eigen::Index j = 0; j < full.cols(); ++j) R.questions.push_back({"c" + std::to_string(j), 2, QuestionKind::ordinal, "", "", {}});
  R.scale = scale;
  return R;
}

// Soft-thresholded reconstruction from the eigen-decomposition of Z^T Z.
Matrix eigen_soft_threshold(const Matrix& Z, double lambda, int rank) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Z.transpose() * Z);
  const auto k = Z.cols();
  Matrix out = Matrix::Zero(Z.rows(), Z.cols());
  for (int a = 0; a < rank; ++a) {
    const Eigen::Index idx = k - 1 - a;  // eigenvalues ascending
    const double sigma = std::sqrt(std::max(es.eigenvalues()(idx), 0.0));
    const Vector v = es.eigenvectors().col(idx);
    const Vector u = Z * v / sigma;
    out += std::max(sigma - lambda, 0.0) * u * v.transpose();
  }
  return out;
}

}  // namespace

TEST_SUITE("completion") {
  TEST_CASE("soft-threshold SVD matches an eigen-decomposition oracle") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 10; ++t) {
      const Matrix Z = random_matrix(12, 7, rng);
      for (double lambda : {0.0, 0.5, 2.0}) {
        const auto f = soft_threshold_svd(Z, lambda, 4);
        CHECK_NOTHROW(f.validate());
        CHECK(testing::relative_diff(f.reconstruct(), eigen_soft_threshold(Z, lambda, 4)) < 1e-9);
      }
    }
  }

  TEST_CASE("a huge threshold zeroes the factorisation") {
    std::mt19937_64 rng(3);
    const Matrix Z = random_matrix(6, 5, rng);
    const auto f = soft_threshold_svd(Z, 1e6, 3);
    CHECK(f.d.isZero());
    CHECK_THROWS(soft_threshold_svd(Z, -1, 3));
    CHECK_THROWS(soft_threshold_svd(Z, 0, 6));
  }

  TEST_CASE("factor model validation catches broken invariants") {
    std::mt19937_64 rng(5);
    auto f = soft_threshold_svd(random_matrix(8, 6, rng), 0.1, 3);
    auto bad = f;
    bad.d(0) = -1;
    CHECK_THROWS(bad.validate());
    bad = f;
    std::swap(bad.d(0), bad.d(2));
    CHECK_THROWS(bad.validate());
    bad = f;
    bad.U *= 2;
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("SoftImpute objective never increases and ends at a fixed point") {
    std::mt19937_64 rng(8);
    const Matrix truth = random_matrix(40, 3, rng) * random_matrix(3, 15, rng) + 0.3 * random_matrix(40, 15, rng);
    const auto R = masked(truth, 0.6, rng);
    const double lambda = 2.0;
    const auto fit = softimpute_fit(R, {lambda, 5, 1e-12, 5000});
    REQUIRE(fit.objective.size() >= 2);
    for (std::size_t t = 1; t < fit.objective.size(); ++t) CHECK(fit.objective[t] <= fit.objective[t - 1] + 1e-9);
    CHECK(fit.model.converged);

    const Matrix Z = fit.model.reconstruct();
    const Matrix again = soft_threshold_svd(R.mask.select(R.values, Z), lambda, 5).reconstruct();
    CHECK(testing::relative_diff(again, Z) < 1e-5);
    CHECK(softimpute_objective(R, Z, lambda) == doctest::Approx(fit.objective.back()).epsilon(1e-6));
  }

  TEST_CASE("noise-free low-rank matrix is completed") {
    std::mt19937_64 rng(21);
    const Matrix truth = random_matrix(60, 2, rng) * random_matrix(2, 20, rng);
    const auto R = masked(truth, 0.7, rng);
    const auto fit = softimpute_fit(R, {1e-4, 2, 1e-12, 20000});
    const Matrix Z = fit.model.reconstruct();
    double worst = 0;
    for (Eigen::Index i = 0; i < R.rows(); ++i)
      for (Eigen::Index j = 0; j < R.cols(); ++j)
        if (!R.mask(i, j)) worst = std::max(worst, std::abs(Z(i, j) - truth(i, j)));
    CHECK(worst < 1e-2);
  }

  TEST_CASE("fully observed input converges in one step") {
    std::mt19937_64 rng(2);
    ResponseMatrix R;
    R.values = random_matrix(10, 4, rng);
    R.mask = MaskMatrix::Constant(10, 4, true);
    R.questions.resize(4);
    const auto fit = softimpute_fit(R, {0.3, 2, 1e-5, 50});
    CHECK(fit.model.iterations == 1);
    CHECK(testing::relative_diff(fit.model.reconstruct(), soft_threshold_svd(R.values, 0.3, 2).reconstruct()) < 1e-12);
  }

  TEST_CASE("empty columns and bad options are rejected") {
    std::mt19937_64 rng(2);
    auto R = masked(random_matrix(10, 4, rng), 0.9, rng);
    CHECK_THROWS(softimpute_fit(R, {-1.0, 2, 1e-5, 10}));
    CHECK_THROWS(softimpute_fit(R, {1.0, 2, 1e-5, 0}));
    R.mask.col(1).setConstant(false);
    CHECK_THROWS(softimpute_fit(R, {1.0, 2, 1e-5, 10}));
  }

  TEST_CASE("lambda selection breaks ties toward the larger lambda") {
    CHECK(select_lambda_index({0.5, 0.3, 0.3, 0.4}) == 1);
    CHECK(select_lambda_index({0.2, 0.2}) == 0);
    CHECK_THROWS(select_lambda_index({}));
  }

  TEST_CASE("default grid is log-spaced and descending from the top singular value") {
    std::mt19937_64 rng(4);
    const auto R = masked(random_matrix(20, 8, rng), 0.8, rng);
    const auto grid = default_lambda_grid(R, 6, 1e-2);
    REQUIRE(grid.size() == 6);
    Eigen::JacobiSVD<Matrix> svd(R.mask.select(R.values, 0.0));
    CHECK(grid.front() == doctest::Approx(svd.singularValues()(0)));
    CHECK(grid.back() == doctest::Approx(svd.singularValues()(0) * 1e-2));
    for (std::size_t p = 1; p < grid.size(); ++p) CHECK(grid[p] / grid[p - 1] == doctest::Approx(std::pow(1e-2, 0.2)));
  }

  TEST_CASE("grid search is deterministic and picks a grid value") {
    std::mt19937_64 rng(6);
    const Matrix truth = random_matrix(50, 2, rng) * random_matrix(2, 12, rng) + 0.2 * random_matrix(50, 12, rng);
    const auto R = masked(truth, 0.8, rng);
    const std::vector<double> grid{20, 5, 1, 0.2};
    const auto a = lambda_grid_search(R, grid, 0.2, 3, 11);
    const auto b = lambda_grid_search(R, grid, 0.2, 3, 11);
    CHECK(a.validation_mae == b.validation_mae);
    CHECK(a.best_lambda == grid[select_lambda_index(a.validation_mae)]);
    CHECK_THROWS(lambda_grid_search(R, {1, 2}, 0.2, 3, 11));
  }

  TEST_CASE("ALS objective is monotone and the last half-step solves its ridge problem") {
    std::mt19937_64 rng(13);
    const Matrix truth = random_matrix(30, 3, rng) * random_matrix(3, 10, rng) + 0.1 * random_matrix(30, 10, rng);
    const auto R = masked(truth, 0.7, rng);
    AlsOptions opt;
    opt.lambda_u = 0.5;
    opt.lambda_v = 0.8;
    opt.rank = 3;
    opt.seed = 4;
    const auto fit = als_fit(R, opt);
    for (std::size_t t = 1; t < fit.objective.size(); ++t) CHECK(fit.objective[t] <= fit.objective[t - 1] + 1e-9);
    CHECK(fit.model.d.isOnes());

    // Gradient in V vanishes after the final V solve.
    const Matrix& U = fit.model.U;
    const Matrix& V = fit.model.V;
    const Matrix resid = R.mask.select(U * V.transpose() - R.values, 0.0);
    const Matrix grad = resid.transpose() * U + opt.lambda_v * V;
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-8);
    CHECK_THROWS(als_fit(R, AlsOptions{0.0, 1.0, 3, 1e-5, 10, 0}));
  }

  TEST_CASE("entry prediction uses U diag(d) V^T and clamps") {
    FactorModel m;
    m.U = Matrix{{1.0, 0.0}, {0.0, 1.0}};
    m.d = Vector{{3.0, 0.25}};
    m.V = Matrix{{0.5, 0.0}, {0.0, 2.0}};
    CHECK(predict_entry(m, 0, 0).value == doctest::Approx(1.5));
    CHECK(predict_entry(m, 0, 0).clamped == 1.0);
    CHECK(predict_entry(m, 1, 1).value == doctest::Approx(0.5));
    CHECK_THROWS(predict_entry(m, 2, 0));
  }
}
