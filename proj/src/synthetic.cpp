#include "asurvey/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace asurvey {

Cutpoints uniform_cutpoints(int num_categories) {
  if (num_categories < 2) throw std::invalid_argument("at least 2 categories required");
  Cutpoints cut;
  cut.beta.resize(num_categories - 1);
  for (int m = 1; m < num_categories; ++m) {
    const double p = static_cast<double>(m) / num_categories;
    cut.beta(m - 1) = std::log(p / (1 - p));
  }
  return cut;
}

SyntheticData generate_synthetic(const SyntheticOptions& o) {
  if (o.n < 1 || o.k < 1 || o.r < 1 || o.r > std::min(o.n, o.k)) throw std::invalid_argument("invalid synthetic dimensions");
  if (!(o.noise_sd >= 0) || !(o.observed_fraction > 0 && o.observed_fraction <= 1))
    throw std::invalid_argument("invalid synthetic noise or observed fraction");
  if (o.model == SyntheticModel::ordered_logit && o.categories < 2) throw std::invalid_argument("at least 2 categories required");

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
  };

  SyntheticData out;
  out.U = draw(o.n, o.r);
  out.V = draw(o.k, o.r);
  const bool grouped = o.groups > 1;
  if (grouped) {
    const Matrix shifts = o.group_shift * draw(o.groups, o.r);
    std::uniform_int_distribution<int> pick(1, o.groups);
    for (int i = 0; i < o.n; ++i) {
      const int g = pick(rng);
      out.group.push_back(g);
      out.U.row(i) += shifts.row(g - 1);
    }
  }
  out.truth = out.U * out.V.transpose();

  const int cols = o.k + (grouped ? 1 : 0);
  ResponseMatrix& R = out.data;
  R.values = Matrix::Zero(o.n, cols);
  R.mask = MaskMatrix::Constant(o.n, cols, false);
  for (int j = 0; j < o.k; ++j) {
    QuestionMeta q;
    q.id = "q" + std::to_string(j + 1);
    q.num_categories = o.model == SyntheticModel::ordered_logit ? o.categories : 2;
    q.kind = q.num_categories == 2 ? QuestionKind::binary : QuestionKind::ordinal;
    R.questions.push_back(q);
  }
  if (grouped) {
    QuestionMeta q;
    q.id = "group";
    q.num_categories = o.groups;
    R.questions.push_back(q);
  }

  if (o.model == SyntheticModel::ordered_logit) {
    R.scale = ResponseScale::categorical;
    out.cutpoints.assign(static_cast<std::size_t>(o.k), uniform_cutpoints(o.categories));
  } else {
    R.scale = ResponseScale::real;
  }

  for (int i = 0; i < o.n; ++i) {
    for (int j = 0; j < o.k; ++j) {
      const double eta = out.truth(i, j);
      if (o.model == SyntheticModel::ordered_logit)
        R.values(i, j) = sample_category(eta, out.cutpoints[static_cast<std::size_t>(j)], rng);
      else
        R.values(i, j) = eta + o.noise_sd * normal(rng);
      R.mask(i, j) = o.observed_fraction >= 1.0 || unit(rng) < o.observed_fraction;
    }
    if (grouped) {
      R.values(i, o.k) = out.group[static_cast<std::size_t>(i)];
      R.mask(i, o.k) = true;
    }
  }
  return out;
}

OrderedResponses generate_order_data(const OrderDataOptions& o) {
  if (o.n < 1 || o.k < 2) throw std::invalid_argument("order data needs n >= 1 and k >= 2");
  if (!o.position_drift.empty() && o.position_drift.size() != 1 && o.position_drift.size() != static_cast<std::size_t>(o.k))
    throw std::invalid_argument("position drift needs 1 or k entries");
  std::vector<std::vector<double>> pair_effect(static_cast<std::size_t>(o.k), std::vector<double>(static_cast<std::size_t>(o.k), 0.0));
  for (const auto& p : o.pairs) {
    if (p.question < 0 || p.question >= o.k || p.previous < 0 || p.previous >= o.k || p.question == p.previous)
      throw std::invalid_argument("invalid injected pair");
    pair_effect[static_cast<std::size_t>(p.question)][static_cast<std::size_t>(p.previous)] = p.effect;
  }
  auto drift = [&](int q) {
    if (o.position_drift.empty()) return 0.0;
    return o.position_drift.size() == 1 ? o.position_drift[0] : o.position_drift[static_cast<std::size_t>(q)];
  };

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> stop(1, o.k - 1);

  OrderedResponses out;
  for (int j = 0; j < o.k; ++j) out.question_ids.push_back("q" + std::to_string(j + 1));
  std::vector<int> order(static_cast<std::size_t>(o.k));
  for (int i = 0; i < o.n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    AdministeredSurvey s;
    const bool incomplete = o.incomplete_fraction > 0 && unit(rng) < o.incomplete_fraction;
    const int length = incomplete ? stop(rng) : o.k;
    for (int p = 0; p < length; ++p) {
      const int q = order[static_cast<std::size_t>(p)];
      double value = normal(rng) + drift(q) * p / (o.k - 1);
      if (p > 0) value += pair_effect[static_cast<std::size_t>(q)][static_cast<std::size_t>(order[static_cast<std::size_t>(p - 1)])];
      s.questions.push_back(q);
      s.values.push_back(value);
    }
    s.completed = !incomplete;
    out.users.push_back(std::move(s));
  }
  return out;
}

}  // namespace asurvey
