#include "asurvey/order_effects.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "asurvey/csv.hpp"

namespace asurvey {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double h = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double soft(double x, double t) { return x > t ? x - t : (x < -t ? x + t : 0.0); }

}  // namespace

void OrderedResponses::validate() const {
  const int k = num_questions();
  for (const auto& u : users) {
    if (u.questions.size() != u.values.size()) throw std::invalid_argument("questions and values differ in length");
    std::set<int> seen;
    for (int q : u.questions) {
      if (q < 0 || q >= k) throw std::invalid_argument("question index out of range");
      if (!seen.insert(q).second) throw std::invalid_argument("question repeated within one survey");
    }
  }
}

OrderedResponses load_ordered_responses(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw std::runtime_error("empty order file: " + path.string());
  const auto& header = rows.front();
  auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("order file lacks column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_user = column("user"), c_question = column("question"), c_position = column("position"),
             c_value = column("value");

  std::map<std::string, int> question_index;
  std::map<std::string, std::map<int, std::pair<int, double>>> by_user;  // user -> position -> (question, value)
  std::vector<std::string> user_order;
  OrderedResponses out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < header.size()) throw std::runtime_error("short row " + std::to_string(r + 1) + " in " + path.string());
    auto [qit, fresh] = question_index.emplace(row[c_question], static_cast<int>(out.question_ids.size()));
    if (fresh) out.question_ids.push_back(row[c_question]);
    const int position = std::stoi(row[c_position]);
    if (position < 1) throw std::runtime_error("positions start at 1");
    const double value = row[c_value].empty() ? kNaN : std::stod(row[c_value]);
    if (!by_user.count(row[c_user])) user_order.push_back(row[c_user]);
    if (!by_user[row[c_user]].emplace(position, std::pair{qit->second, value}).second)
      throw std::runtime_error("duplicate position for user " + row[c_user]);
  }

  const auto k = out.question_ids.size();
  for (const auto& name : user_order) {
    AdministeredSurvey s;
    int expected = 1;
    bool contiguous = true;
    for (const auto& [position, entry] : by_user[name]) {
      contiguous = contiguous && position == expected++;
      s.questions.push_back(entry.first);
      s.values.push_back(entry.second);
    }
    s.completed = contiguous && s.questions.size() == k &&
                  std::none_of(s.values.begin(), s.values.end(), [](double v) { return std::isnan(v); });
    out.users.push_back(std::move(s));
  }
  out.validate();
  return out;
}

void save_ordered_responses(const std::filesystem::path& path, const OrderedResponses& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  csv::write_row(out, {"user", "question", "position", "value"});
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    const auto& u = data.users[i];
    for (std::size_t p = 0; p < u.questions.size(); ++p)
      csv::write_row(out, {std::to_string(i), data.question_ids[static_cast<std::size_t>(u.questions[p])], std::to_string(p + 1),
                           std::isnan(u.values[p]) ? std::string() : csv::format_double(u.values[p])});
  }
}

std::vector<std::vector<double>> standardize_by_question(const OrderedResponses& data, bool completed_only) {
  const auto k = static_cast<std::size_t>(data.num_questions());
  std::vector<double> sum(k, 0.0), sq(k, 0.0);
  std::vector<std::size_t> n(k, 0);
  for (const auto& u : data.users) {
    if (completed_only && !u.completed) continue;
    for (std::size_t p = 0; p < u.questions.size(); ++p) {
      if (std::isnan(u.values[p])) continue;
      const auto q = static_cast<std::size_t>(u.questions[p]);
      sum[q] += u.values[p];
      ++n[q];
    }
  }
  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (std::size_t q = 0; q < k; ++q)
    if (n[q]) mean[q] = sum[q] / static_cast<double>(n[q]);
  for (const auto& u : data.users) {
    if (completed_only && !u.completed) continue;
    for (std::size_t p = 0; p < u.questions.size(); ++p) {
      if (std::isnan(u.values[p])) continue;
      const auto q = static_cast<std::size_t>(u.questions[p]);
      sq[q] += (u.values[p] - mean[q]) * (u.values[p] - mean[q]);
    }
  }
  for (std::size_t q = 0; q < k; ++q)
    if (n[q] > 1) sd[q] = std::sqrt(sq[q] / static_cast<double>(n[q] - 1));

  std::vector<std::vector<double>> z(data.users.size());
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    const auto& u = data.users[i];
    z[i].resize(u.values.size(), kNaN);
    if (completed_only && !u.completed) continue;
    for (std::size_t p = 0; p < u.values.size(); ++p) {
      if (std::isnan(u.values[p])) continue;
      const auto q = static_cast<std::size_t>(u.questions[p]);
      z[i][p] = sd[q] > 0 ? (u.values[p] - mean[q]) / sd[q] : 0.0;
    }
  }
  return z;
}

// ------------------------------------------------------------------ position

namespace {

struct SlopeSums {
  double n = 0, sp = 0, spp = 0, sz = 0, spz = 0;

  void add(double p, double z) {
    n += 1;
    sp += p;
    spp += p * p;
    sz += z;
    spz += p * z;
  }
  [[nodiscard]] double slope() const {
    const double var = spp - sp * sp / n;
    return var > 0 ? (spz - sp * sz / n) / var : 0.0;
  }
};

double relative_position(std::size_t p, std::size_t length) {
  return length > 1 ? static_cast<double>(p) / static_cast<double>(length - 1) : 0.0;
}

}  // namespace

PositionEffectResult position_effect_estimate(const OrderedResponses& data, int permutations, std::uint64_t seed) {
  data.validate();
  if (permutations < 1) throw std::invalid_argument("at least one permutation required");
  const auto k = static_cast<std::size_t>(data.num_questions());
  const auto z = standardize_by_question(data, true);

  std::vector<SlopeSums> observed(k);
  std::vector<std::set<std::size_t>> positions(k);
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    const auto& u = data.users[i];
    if (!u.completed) continue;
    for (std::size_t p = 0; p < u.questions.size(); ++p) {
      const auto q = static_cast<std::size_t>(u.questions[p]);
      observed[q].add(relative_position(p, u.questions.size()), z[i][p]);
      positions[q].insert(p);
    }
  }

  std::vector<std::vector<double>> null(k);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order;
  for (int b = 0; b < permutations; ++b) {
    std::vector<SlopeSums> sums(k);
    for (std::size_t i = 0; i < data.users.size(); ++i) {
      const auto& u = data.users[i];
      if (!u.completed) continue;
      order.resize(u.questions.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t p = 0; p < u.questions.size(); ++p)
        sums[static_cast<std::size_t>(u.questions[order[p]])].add(relative_position(p, u.questions.size()), z[i][order[p]]);
    }
    for (std::size_t q = 0; q < k; ++q) null[q].push_back(sums[q].slope());
  }

  PositionEffectResult result;
  result.permutations = permutations;
  for (std::size_t q = 0; q < k; ++q) {
    if (positions[q].size() < 3) {
      result.skipped.push_back(data.question_ids[q]);
      continue;
    }
    PositionEffect e;
    e.question = static_cast<int>(q);
    e.question_id = data.question_ids[q];
    e.effect = observed[q].slope();
    e.count = static_cast<std::size_t>(observed[q].n);
    e.null_low = quantile(null[q], 0.025);
    e.null_high = quantile(null[q], 0.975);
    e.flagged = e.effect < e.null_low || e.effect > e.null_high;
    result.effects.push_back(e);
  }
  return result;
}

// ------------------------------------------------------------------ pairwise

std::string_view to_string(PairParity parity) {
  switch (parity) {
    case PairParity::all: return "all";
    case PairParity::odd: return "odd";
    case PairParity::even: return "even";
  }
  return "all";
}

PairParity parse_pair_parity(std::string_view text) {
  if (text == "all") return PairParity::all;
  if (text == "odd") return PairParity::odd;
  if (text == "even") return PairParity::even;
  throw std::invalid_argument("unknown pair parity: " + std::string(text));
}

PairDesign build_pair_design(const OrderedResponses& data, PairParity parity) {
  data.validate();
  if (data.num_questions() < 2) throw std::invalid_argument("pairwise effects need at least 2 questions");
  const auto z = standardize_by_question(data, false);
  PairDesign d;
  d.num_questions = data.num_questions();
  std::map<std::pair<int, int>, int> index;
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    const auto& u = data.users[i];
    for (std::size_t p = 1; p < u.questions.size(); ++p) {
      const std::size_t position = p + 1;
      if (parity == PairParity::odd && position % 2 == 0) continue;
      if (parity == PairParity::even && position % 2 == 1) continue;
      if (std::isnan(z[i][p])) continue;
      const std::pair key{u.questions[p], u.questions[p - 1]};
      auto [it, fresh] = index.emplace(key, static_cast<int>(d.pair_keys.size()));
      if (fresh) d.pair_keys.push_back(key);
      d.user.push_back(static_cast<int>(i));
      d.question.push_back(key.first);
      d.pair.push_back(it->second);
      d.z.push_back(z[i][p]);
    }
  }
  return d;
}

namespace {

// Sufficient statistics of a row subset: the loss only depends on per-pair
// counts and sums.
struct PairStats {
  std::vector<double> n_pair, s_pair, n_q, s_q;
  std::vector<std::vector<int>> pairs_of_q;
  double N = 0;

  PairStats(const PairDesign& d, const std::vector<int>& rows) {
    const auto P = d.pair_keys.size();
    const auto k = static_cast<std::size_t>(d.num_questions);
    n_pair.assign(P, 0);
    s_pair.assign(P, 0);
    n_q.assign(k, 0);
    s_q.assign(k, 0);
    pairs_of_q.resize(k);
    auto take = [&](std::size_t r) {
      n_pair[static_cast<std::size_t>(d.pair[r])] += 1;
      s_pair[static_cast<std::size_t>(d.pair[r])] += d.z[r];
      n_q[static_cast<std::size_t>(d.question[r])] += 1;
      s_q[static_cast<std::size_t>(d.question[r])] += d.z[r];
      N += 1;
    };
    if (rows.empty())
      for (std::size_t r = 0; r < d.z.size(); ++r) take(r);
    else
      for (int r : rows) take(static_cast<std::size_t>(r));
    for (std::size_t g = 0; g < P; ++g)
      if (n_pair[g] > 0) pairs_of_q[static_cast<std::size_t>(d.pair_keys[g].first)].push_back(static_cast<int>(g));
  }
};

PairFit solve(const PairDesign& d, const PairStats& st, double lambda, double tol, int max_sweeps, const PairFit* warm) {
  const auto k = st.n_q.size();
  PairFit fit;
  fit.intercept.assign(k, 0.0);
  fit.beta.assign(d.pair_keys.size(), 0.0);
  if (warm) fit = *warm;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t q = 0; q < k; ++q) {
      if (st.n_q[q] == 0) continue;
      double s = st.s_q[q];
      for (int g : st.pairs_of_q[q]) s -= st.n_pair[static_cast<std::size_t>(g)] * fit.beta[static_cast<std::size_t>(g)];
      const double a = s / st.n_q[q];
      change = std::max(change, std::abs(a - fit.intercept[q]));
      fit.intercept[q] = a;
      for (int gi : st.pairs_of_q[q]) {
        const auto g = static_cast<std::size_t>(gi);
        const double b = soft(st.s_pair[g] - st.n_pair[g] * a, st.N * lambda) / st.n_pair[g];
        change = std::max(change, std::abs(b - fit.beta[g]) * std::sqrt(st.n_pair[g] / st.N));
        fit.beta[g] = b;
      }
    }
    if (change < tol) break;
  }
  return fit;
}

}  // namespace

PairFit fit_pair_lasso(const PairDesign& design, double lambda, const std::vector<int>& rows, double tol, int max_sweeps,
                       const PairFit* warm) {
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  return solve(design, PairStats(design, rows), lambda, tol, max_sweeps, warm);
}

PairwiseResult pairwise_order_effects(const OrderedResponses& data, const PairwiseOptions& options) {
  if (options.cv_folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (options.path_length < 2 || !(options.min_ratio > 0 && options.min_ratio < 1))
    throw std::invalid_argument("invalid penalty path");
  const PairDesign d = build_pair_design(data, options.parity);
  PairwiseResult result;
  result.pairs_observed = d.pair_keys.size();
  if (d.z.empty()) return result;

  const PairStats all(d, {});
  double lambda_max = 0.0;
  for (std::size_t g = 0; g < d.pair_keys.size(); ++g) {
    const auto q = static_cast<std::size_t>(d.pair_keys[g].first);
    lambda_max = std::max(lambda_max, std::abs(all.s_pair[g] - all.n_pair[g] * all.s_q[q] / all.n_q[q]) / all.N);
  }
  if (lambda_max <= 0) lambda_max = 1e-12;
  const auto L = static_cast<std::size_t>(options.path_length);
  for (std::size_t l = 0; l < L; ++l)
    result.lambdas.push_back(lambda_max * std::pow(options.min_ratio, static_cast<double>(l) / static_cast<double>(L - 1)));

  // Folds by respondent.
  std::vector<int> users;
  for (int u : d.user)
    if (users.empty() || users.back() != u) users.push_back(u);
  users.erase(std::unique(users.begin(), users.end()), users.end());
  std::mt19937_64 rng(options.seed);
  std::shuffle(users.begin(), users.end(), rng);
  std::map<int, int> fold_of;
  for (std::size_t p = 0; p < users.size(); ++p) fold_of[users[p]] = static_cast<int>(p % static_cast<std::size_t>(options.cv_folds));

  std::vector<std::vector<double>> fold_err(L);
  for (int f = 0; f < options.cv_folds; ++f) {
    std::vector<int> train, test;
    for (std::size_t r = 0; r < d.z.size(); ++r) (fold_of[d.user[r]] == f ? test : train).push_back(static_cast<int>(r));
    if (train.empty() || test.empty()) continue;
    const PairStats st(d, train);
    PairFit fit;
    for (std::size_t l = 0; l < L; ++l) {
      fit = solve(d, st, result.lambdas[l], options.tol, options.max_sweeps, l ? &fit : nullptr);
      double sse = 0.0;
      for (int r : test) {
        const auto rr = static_cast<std::size_t>(r);
        const double e = d.z[rr] - fit.intercept[static_cast<std::size_t>(d.question[rr])] - fit.beta[static_cast<std::size_t>(d.pair[rr])];
        sse += e * e;
      }
      fold_err[l].push_back(sse / static_cast<double>(test.size()));
    }
  }

  std::size_t best = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& e = fold_err[l];
    result.cv_error.push_back(std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size()));
    if (result.cv_error[l] < result.cv_error[best]) best = l;
  }
  // Standard error of each fold-wise difference from the minimum; the
  // between-fold spread common to every penalty cancels.
  const std::size_t F = fold_err[best].size();
  for (std::size_t l = 0; l < L; ++l) {
    const double mean = result.cv_error[l] - result.cv_error[best];
    double var = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const double x = fold_err[l][f] - fold_err[best][f] - mean;
      var += x * x;
    }
    result.cv_se.push_back(F > 1 ? std::sqrt(var / static_cast<double>(F - 1) / static_cast<double>(F)) : 0.0);
  }
  std::size_t chosen = best;
  if (options.one_se_rule) {
    for (std::size_t l = 0; l < best; ++l)
      if (result.cv_error[l] <= result.cv_error[best] + result.cv_se[l]) {
        chosen = l;
        break;
      }
  }
  result.lambda = result.lambdas[chosen];

  PairFit fit;
  for (std::size_t l = 0; l <= chosen; ++l) fit = solve(d, all, result.lambdas[l], options.tol, options.max_sweeps, l ? &fit : nullptr);

  // Least-squares refit: intercept from the question's unselected pairs,
  // selected pairs from their own means.
  for (std::size_t q = 0; q < all.n_q.size(); ++q) {
    double n0 = 0.0, s0 = 0.0;
    for (int gi : all.pairs_of_q[q]) {
      const auto g = static_cast<std::size_t>(gi);
      if (fit.beta[g] == 0.0) {
        n0 += all.n_pair[g];
        s0 += all.s_pair[g];
      }
    }
    const double a = n0 > 0 ? s0 / n0 : fit.intercept[q];
    for (int gi : all.pairs_of_q[q]) {
      const auto g = static_cast<std::size_t>(gi);
      if (fit.beta[g] == 0.0) continue;
      PairEffect e;
      e.question = d.pair_keys[g].first;
      e.previous = d.pair_keys[g].second;
      e.question_id = data.question_ids[static_cast<std::size_t>(e.question)];
      e.previous_id = data.question_ids[static_cast<std::size_t>(e.previous)];
      e.coefficient = fit.beta[g];
      e.refit = all.s_pair[g] / all.n_pair[g] - a;
      e.count = static_cast<std::size_t>(all.n_pair[g]);
      result.nonzero.push_back(e);
    }
  }
  std::sort(result.nonzero.begin(), result.nonzero.end(),
            [](const PairEffect& a, const PairEffect& b) { return std::pair{a.question, a.previous} < std::pair{b.question, b.previous}; });
  return result;
}

}  // namespace asurvey
