#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "asurvey/csv.hpp"
#include "asurvey/harness.hpp"

namespace asurvey {

void MetricAccumulator::add(double prediction, double truth) {
  const double diff = prediction - truth;
  abs_ += std::abs(diff);
  sq_ += diff * diff;
  diff_ += diff;
  ++count_;
  if (truth != 0.0) {
    ++signed_;
    if (prediction * truth <= 0.0) ++wrong_;
  }
}

MetricSet MetricAccumulator::result() const {
  MetricSet m;
  m.count = count_;
  if (count_ == 0) return m;
  const auto n = static_cast<double>(count_);
  m.mae = abs_ / n;
  m.mse = sq_ / n;
  m.bias = diff_ / n;
  m.wrong_sign = signed_ ? static_cast<double>(wrong_) / static_cast<double>(signed_) : 0.0;
  return m;
}

MetricSet compute_metrics(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("predictions and truths differ in length");
  if (predictions.empty()) throw std::invalid_argument("compute_metrics: empty input");
  MetricAccumulator acc;
  for (std::size_t i = 0; i < predictions.size(); ++i) acc.add(predictions[i], truths[i]);
  return acc.result();
}

std::string Strategy::name() const {
  if (!label.empty()) return label;
  std::string base = std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ActiveStrategy>) {
          return s.criterion == Criterion::A ? "active" : "active-" + std::string(to_string(s.criterion));
        } else if constexpr (std::is_same_v<S, RandomStrategy>) {
          return "random";
        } else if constexpr (std::is_same_v<S, FixedOrderStrategy>) {
          return "fixed";
        } else if constexpr (std::is_same_v<S, EpsilonGreedyStrategy>) {
          return "epsilon-" + csv::format_double(s.epsilon) +
                 (s.criterion == Criterion::A ? "" : "-" + std::string(to_string(s.criterion)));
        } else {
          return "adaptive";
        }
      },
      kind);
  switch (side_info) {
    case SideInfoMode::none: break;
    case SideInfoMode::subgroup_priors: base += "+subgroups"; break;
    case SideInfoMode::free_covariates: base += "+covariates"; break;
  }
  return base;
}

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <class T>
T parse_number(const std::string& text, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw std::invalid_argument(std::string("invalid ") + what + ": " + text);
  return value;
}

}  // namespace

Strategy parse_strategy(std::string_view text, std::uint64_t default_seed) {
  Strategy s;
  std::string body(text);
  for (const auto& [suffix, mode] : {std::pair{"+subgroups", SideInfoMode::subgroup_priors},
                                     std::pair{"+covariates", SideInfoMode::free_covariates}}) {
    const std::string sfx(suffix);
    if (body.size() > sfx.size() && body.compare(body.size() - sfx.size(), sfx.size(), sfx) == 0) {
      body.resize(body.size() - sfx.size());
      s.side_info = mode;
    }
  }
  const auto parts = split(body, ':');
  const std::string& head = parts[0];
  if (head == "active") {
    s.kind = ActiveStrategy{parts.size() > 1 ? parse_criterion(parts[1]) : Criterion::A};
  } else if (head == "random") {
    s.kind = RandomStrategy{parts.size() > 1 ? parse_number<std::uint64_t>(parts[1], "seed") : default_seed};
  } else if (head == "fixed") {
    if (parts.size() < 2) throw std::invalid_argument("fixed strategy needs an order, e.g. fixed:0,1,2");
    FixedOrderStrategy f;
    for (const auto& item : split(parts[1], ',')) f.order.push_back(parse_number<int>(item, "question index"));
    s.kind = std::move(f);
  } else if (head == "epsilon") {
    EpsilonGreedyStrategy e;
    e.seed = default_seed;
    if (parts.size() > 1) e.epsilon = parse_number<double>(parts[1], "epsilon");
    if (parts.size() > 2) e.criterion = parse_criterion(parts[2]);
    if (!(e.epsilon >= 0 && e.epsilon <= 1)) throw std::invalid_argument("epsilon must lie in [0,1]");
    s.kind = e;
  } else if (head == "adaptive") {
    s.kind = AdaptiveOrdLogitStrategy{};
  } else {
    throw std::invalid_argument("unknown strategy: " + std::string(text));
  }
  return s;
}

std::string_view to_string(ModelKind model) {
  return model == ModelKind::gaussian_pmf ? "gaussian" : "ordlogit";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "gaussian" || text == "gaussian_pmf") return ModelKind::gaussian_pmf;
  if (text == "ordlogit" || text == "ordered_logit") return ModelKind::ordered_logit;
  throw std::invalid_argument("unknown model: " + std::string(text));
}

}  // namespace asurvey
