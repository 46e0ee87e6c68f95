#include <doctest.h>

#include <numeric>

#include "asurvey/ordlogit.hpp"
#include "asurvey/synthetic.hpp"
#include "support.hpp"

using namespace asurvey;
using testing::random_matrix;
using testing::random_vector;

namespace {

double naive_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// pi_m = F_m - F_{m-1} with F_0 = 0, F_M = 1, evaluated naively.
std::vector<double> naive_probs(double eta, const Cutpoints& cut) {
  const int M = cut.num_categories();
  std::vector<double> F(static_cast<std::size_t>(M + 1), 0.0);
  F[static_cast<std::size_t>(M)] = 1.0;
  for (int m = 1; m < M; ++m) F[static_cast<std::size_t>(m)] = naive_sigmoid(eta + cut.beta(m - 1));
  std::vector<double> p;
  for (int m = 1; m <= M; ++m) p.push_back(F[static_cast<std::size_t>(m)] - F[static_cast<std::size_t>(m - 1)]);
  return p;
}

Cutpoints asymmetric_cutpoints() { return Cutpoints{Vector{{-2.0, -0.5, 0.3, 2.5}}}; }

double pearson(const Matrix& a, const Matrix& b) {
  const Eigen::ArrayXd x = a.reshaped().array() - a.mean();
  const Eigen::ArrayXd y = b.reshaped().array() - b.mean();
  return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

}  // namespace

TEST_SUITE("ordlogit") {
  TEST_CASE("category probabilities match the cumulative definition") {
    const auto cut = asymmetric_cutpoints();
    for (double eta = -6; eta <= 6; eta += 0.37) {
      const Vector p = category_probs(eta, cut);
      const auto ref = naive_probs(eta, cut);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (int m = 0; m < 5; ++m) {
        CHECK(p(m) >= 0);
        CHECK(p(m) == doctest::Approx(ref[static_cast<std::size_t>(m)]).epsilon(1e-10));
        CHECK(std::exp(log_category_prob(eta, cut, m + 1)) == doctest::Approx(p(m)).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("extreme linear predictors stay finite") {
    const auto cut = asymmetric_cutpoints();
    for (double eta : {-800.0, 800.0}) {
      for (int m = 1; m <= 5; ++m) {
        CHECK(std::isfinite(log_category_prob_gradient(eta, cut, m)));
        CHECK(log_category_prob_curvature(eta, cut, m) >= 0);
      }
    }
    CHECK(std::isfinite(log_category_prob(800.0, cut, 1)));
    CHECK(std::isfinite(log_category_prob(-800.0, cut, 5)));
  }

  TEST_CASE("larger eta favours lower categories") {
    const auto cut = asymmetric_cutpoints();
    double prev = 1e9;
    for (double eta = -5; eta <= 5; eta += 0.5) {
      const double e = expected_response(eta, cut);
      CHECK(e < prev);
      prev = e;
      const double s = expected_response_scaled(eta, cut);
      CHECK(s == doctest::Approx(2.0 * (e - 1.0) / 4.0 - 1.0));
    }
  }

  TEST_CASE("gradient and curvature match finite differences") {
    const auto cut = asymmetric_cutpoints();
    const double h = 1e-5;
    for (double eta = -4; eta <= 4; eta += 0.61)
      for (int m = 1; m <= 5; ++m) {
        const double fd1 = (log_category_prob(eta + h, cut, m) - log_category_prob(eta - h, cut, m)) / (2 * h);
        const double fd2 = (log_category_prob_gradient(eta + h, cut, m) - log_category_prob_gradient(eta - h, cut, m)) / (2 * h);
        CHECK(log_category_prob_gradient(eta, cut, m) == doctest::Approx(fd1).epsilon(1e-6));
        CHECK(log_category_prob_curvature(eta, cut, m) == doctest::Approx(-fd2).epsilon(1e-5));
        CHECK(log_category_prob_curvature(eta, cut, m) > 0);
      }
  }

  TEST_CASE("observed information is the negative Hessian in u") {
    std::mt19937_64 rng(41);
    const auto cut = asymmetric_cutpoints();
    const double h = 1e-5;
    for (int t = 0; t < 10; ++t) {
      const Vector u = random_vector(3, rng);
      const Vector v = random_vector(3, rng);
      const int m = 1 + t % 5;
      Matrix fd(3, 3);
      for (int a = 0; a < 3; ++a) {
        Vector up = u, dn = u;
        up(a) += h;
        dn(a) -= h;
        // gradient in u is g(eta) v
        fd.col(a) = (log_category_prob_gradient(up.dot(v), cut, m) - log_category_prob_gradient(dn.dot(v), cut, m)) / (2 * h) * v;
      }
      CHECK((observed_info(u, v, cut, m) + fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("Fisher information equals the outer product of scores in expectation") {
    std::mt19937_64 rng(43);
    const auto cut = asymmetric_cutpoints();
    for (int t = 0; t < 10; ++t) {
      const Vector u = random_vector(2, rng);
      const Vector v = random_vector(2, rng);
      const auto p = naive_probs(u.dot(v), cut);
      Matrix ref = Matrix::Zero(2, 2);
      Matrix expected_obs = Matrix::Zero(2, 2);
      for (int m = 1; m <= 5; ++m) {
        const double g = log_category_prob_gradient(u.dot(v), cut, m);
        ref += p[static_cast<std::size_t>(m - 1)] * g * g * v * v.transpose();
        expected_obs += p[static_cast<std::size_t>(m - 1)] * observed_info(u, v, cut, m);
      }
      CHECK(testing::relative_diff(fisher_info(u, v, cut), ref) < 1e-8);
      CHECK(testing::relative_diff(fisher_info(u, v, cut), expected_obs) < 1e-10);
    }
  }

  TEST_CASE("cutpoints from counts reproduce the smoothed marginals at eta = 0") {
    const std::vector<double> counts{10, 0, 30, 60};
    const auto cut = cutpoints_from_counts(counts, 0.5);
    const Vector p = category_probs(0.0, cut);
    const double total = 100.5;
    CHECK(p(0) == doctest::Approx(10 / total));
    CHECK(p(1) == doctest::Approx(0.5 / total));
    CHECK(p(3) == doctest::Approx(60 / total));
    const Vector u = category_probs(0.0, uniform_cutpoints(4));
    for (int m = 0; m < 4; ++m) CHECK(u(m) == doctest::Approx(0.25));
    CHECK_THROWS(cutpoints_from_counts(std::vector<double>{1.0}));
    CHECK_THROWS(cutpoints_from_counts(std::vector<double>{1.0, -1.0}));
    CHECK_THROWS(Cutpoints{Vector{{0.5, 0.1}}}.validate());
  }

  TEST_CASE("Dirichlet cutpoints average to the count proportions") {
    std::mt19937_64 rng(5);
    const std::vector<double> counts{20, 50, 30};
    Vector mean = Vector::Zero(3);
    const int draws = 4000;
    for (int t = 0; t < draws; ++t) mean += category_probs(0.0, cutpoints_from_dirichlet(counts, rng));
    mean /= draws;
    CHECK(mean(0) == doctest::Approx(0.2).epsilon(0.03));
    CHECK(mean(1) == doctest::Approx(0.5).epsilon(0.03));
  }

  TEST_CASE("cutpoints from data count each column") {
    ResponseMatrix R;
    R.values = Matrix{{1, 2}, {1, 2}, {3, 2}};
    R.mask = MaskMatrix::Constant(3, 2, true);
    R.questions = {{"a", 3}, {"b", 2}};
    const auto cuts = cutpoints_from_data(R);
    REQUIRE(cuts.size() == 2);
    CHECK(category_probs(0, cuts[0])(0) == doctest::Approx(2.0 / 3.5));
    CHECK(category_probs(0, cuts[1])(1) == doctest::Approx(3.0 / 3.5));
    R.scale = ResponseScale::scaled;
    CHECK_THROWS(cutpoints_from_data(R));
  }

  TEST_CASE("sampled categories follow the model probabilities") {
    std::mt19937_64 rng(77);
    const auto cut = asymmetric_cutpoints();
    const double eta = 0.4;
    std::vector<int> counts(5, 0);
    const int N = 50000;
    for (int t = 0; t < N; ++t) ++counts[static_cast<std::size_t>(sample_category(eta, cut, rng) - 1)];
    const Vector p = category_probs(eta, cut);
    for (int m = 0; m < 5; ++m) {
      const double se = std::sqrt(p(m) * (1 - p(m)) / N);
      CHECK(std::abs(counts[static_cast<std::size_t>(m)] / double(N) - p(m)) < 4 * se);
    }
  }

  TEST_CASE("information state bookkeeping and rebase") {
    std::mt19937_64 rng(3);
    const Matrix V = random_matrix(5, 2, rng);
    std::vector<Cutpoints> cuts(5, asymmetric_cutpoints());
    InformationState s(Matrix::Identity(2, 2), 5);
    const Vector u0 = random_vector(2, rng);
    s.record(2, 4, u0, V.row(2).transpose(), cuts[2]);
    s.consume(0);
    s.record(4, 1, u0, V.row(4).transpose(), cuts[4]);
    CHECK(s.asked() == std::vector<int>{2, 0, 4});
    CHECK(s.unasked() == std::vector<int>{1, 3});
    CHECK(s.answered().size() == 2);
    CHECK_THROWS(s.consume(2));
    CHECK_THROWS(s.record(1, 9, u0, V.row(1).transpose(), cuts[1]));
    CHECK_THROWS(s.consume(7));

    const Matrix at_u0 = observed_info(u0, V.row(2).transpose(), cuts[2], 4) + observed_info(u0, V.row(4).transpose(), cuts[4], 1);
    CHECK(testing::relative_diff(s.accumulated(), at_u0) < 1e-14);
    const Vector u1 = random_vector(2, rng);
    s.rebase(u1, V, cuts);
    const Matrix at_u1 = observed_info(u1, V.row(2).transpose(), cuts[2], 4) + observed_info(u1, V.row(4).transpose(), cuts[4], 1);
    CHECK(testing::relative_diff(s.accumulated(), at_u1) < 1e-14);
    CHECK(testing::relative_diff(s.precision(), Matrix::Identity(2, 2) + at_u1) < 1e-14);
  }

  TEST_CASE("adaptive selection matches brute force and rejects asked questions") {
    std::mt19937_64 rng(47);
    std::vector<Cutpoints> cuts;
    for (int j = 0; j < 8; ++j) cuts.push_back(j % 2 ? asymmetric_cutpoints() : uniform_cutpoints(3));
    for (int t = 0; t < 20; ++t) {
      const Matrix V = random_matrix(8, 3, rng);
      InformationState s(testing::random_spd(3, rng), 8);
      const Vector u = random_vector(3, rng);
      s.record(1, 1, u, V.row(1).transpose(), cuts[1]);
      const auto cands = s.unasked();
      int best = -1;
      double best_val = 1e300;
      for (int j : cands) {
        const double val =
            testing::gauss_jordan_inverse(s.precision() + fisher_info(u, V.row(j).transpose(), cuts[static_cast<std::size_t>(j)])).trace();
        if (val < best_val) {
          best_val = val;
          best = j;
        }
      }
      CHECK(select_next_adaptive(u, s, cands, V, cuts) == best);
      CHECK_THROWS(select_next_adaptive(u, s, std::vector<int>{1}, V, cuts));
    }
  }

  TEST_CASE("MAP estimate is a stationary point of the log posterior") {
    std::mt19937_64 rng(53);
    std::vector<Cutpoints> cuts(6, asymmetric_cutpoints());
    const Matrix V = random_matrix(6, 2, rng);
    const GaussianBelief prior{Vector{{0.2, -0.1}}, Matrix{{2.0, 0.3}, {0.3, 1.0}}};
    const std::vector<std::pair<int, int>> answered{{0, 1}, {3, 5}, {5, 2}};
    const Vector u = ordlogit_map_estimate(prior, answered, V, cuts);
    Vector grad = -prior.precision * (u - prior.mean);
    for (const auto& [q, m] : answered) grad += log_category_prob_gradient(u.dot(V.row(q)), cuts[static_cast<std::size_t>(q)], m) * V.row(q).transpose();
    CHECK(grad.norm() < 1e-9);
    CHECK(ordlogit_map_estimate(prior, {}, V, cuts) == prior.mean);
  }

  TEST_CASE("variational inference raises the ELBO and recovers the linear predictor") {
    SyntheticOptions opt;
    opt.n = 150;
    opt.k = 12;
    opt.r = 2;
    opt.model = SyntheticModel::ordered_logit;
    opt.categories = 5;
    opt.observed_fraction = 0.8;
    opt.seed = 3;
    const auto syn = generate_synthetic(opt);
    VariationalConfig cfg;
    cfg.max_epochs = 400;
    cfg.seed = 9;
    const auto prior = standard_normal_belief(2);
    const auto fit = fit_variational(syn.data, syn.cutpoints, 2, prior, prior, cfg);
    CHECK_NOTHROW(fit.params.validate());
    REQUIRE(fit.elbo_trace.size() > 20);
    CHECK(fit.elbo_trace.back() > fit.elbo_trace[10]);
    const Matrix eta = fit.params.user_mean * fit.params.question_mean.transpose();
    CHECK(pearson(eta, syn.truth) > 0.7);

    const auto again = fit_variational(syn.data, syn.cutpoints, 2, prior, prior, cfg);
    CHECK(again.params.user_mean == fit.params.user_mean);

    // a warm start begins near the previous optimum
    VariationalConfig short_cfg = cfg;
    short_cfg.max_epochs = 5;
    const auto warm = fit_variational(syn.data, syn.cutpoints, 2, prior, prior, short_cfg, &fit.params);
    CHECK(pearson(warm.params.user_mean * warm.params.question_mean.transpose(), syn.truth) > 0.7);

    const Matrix pred = ordlogit_predict_scaled(fit.params, syn.cutpoints);
    CHECK(pred.maxCoeff() <= 1.0);
    CHECK(pred.minCoeff() >= -1.0);
  }

  TEST_CASE("variational input checks") {
    SyntheticOptions opt;
    opt.n = 20;
    opt.k = 4;
    opt.r = 2;
    opt.model = SyntheticModel::ordered_logit;
    const auto syn = generate_synthetic(opt);
    const auto prior = standard_normal_belief(2);
    std::vector<Cutpoints> short_cuts(syn.cutpoints.begin(), syn.cutpoints.end() - 1);
    CHECK_THROWS(fit_variational(syn.data, short_cuts, 2, prior, prior, {}));
    CHECK_THROWS(fit_variational(syn.data, syn.cutpoints, 3, prior, prior, {}));
    auto scaled = rescale_responses(syn.data);
    CHECK_THROWS(fit_variational(scaled, syn.cutpoints, 2, prior, prior, {}));
  }
}
