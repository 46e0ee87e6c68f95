#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "asurvey/active.hpp"
#include "asurvey/csv.hpp"
#include "asurvey/harness.hpp"
#include "asurvey/model_io.hpp"
#include "asurvey/order_effects.hpp"
#include "asurvey/service.hpp"
#include "asurvey/synthetic.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace fs = std::filesystem;
using namespace asurvey;

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

std::vector<std::string> parse_ids(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

struct DataArgs {
  std::string data;
  std::string schema;
  bool real = false;

  void add(CLI::App* app) {
    app->add_option("--data", data, "respondents x questions CSV")->required();
    app->add_option("--schema", schema, "question schema CSV")->required();
    app->add_flag("--real", real, "read cells as real numbers instead of categories");
  }
  [[nodiscard]] ResponseMatrix load() const {
    return load_dataset(data, load_schema(schema), real ? ResponseScale::real : ResponseScale::categorical);
  }
};

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

// "sparse:0.2", "loocv", "kfold:5", "none"
HoldoutSpec parse_holdout(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "sparse") return SparseHoldout{arg.empty() ? 0.2 : std::stod(arg)};
  if (head == "loocv") return LooHoldout{};
  if (head == "kfold") return KFoldHoldout{arg.empty() ? 5 : std::stoi(arg), 0};
  if (head == "none") return NoHoldout{};
  throw std::invalid_argument("unknown holdout: " + text);
}

void write_curves(const fs::path& path, const SimulationReport& report) {
  const StrategyResult* random = nullptr;
  const StrategyResult* active = nullptr;
  for (const auto& s : report.strategies) {
    if (!random && s.strategy.rfind("random", 0) == 0) random = &s;
    if (!active && s.strategy.rfind("random", 0) != 0) active = &s;
  }
  if (!random || !active) {
    std::cerr << "warning: sample-complexity curve needs a random and a non-random strategy\n";
    return;
  }
  const auto curve = sample_complexity_curve(*random, *active);
  if (curve.empty()) std::cerr << "warning: error ranges do not overlap; empty sample-complexity curve\n";
  auto out = open_out(path);
  csv::write_row(out, {"mae", "questions_" + active->strategy, "questions_" + random->strategy});
  for (const auto& p : curve)
    csv::write_row(out, {csv::format_double(p.error), csv::format_double(p.questions_b), csv::format_double(p.questions_a)});
}

void write_reductions(const fs::path& path, const PerQuestionTable& table) {
  auto out = open_out(path);
  csv::write_row(out, {"strategy", "budget", "question", "percent_reduction"});
  std::set<std::string> names;
  for (const auto& row : table.rows) names.insert(row.strategy);
  for (const auto& name : names)
    for (int b : table.budgets) {
      if (b == 0) continue;
      const auto dist = error_reduction_distribution(table, name, b);
      for (const auto& id : dist.flagged) std::cerr << "warning: " << id << " has zero pre-survey error; excluded\n";
      for (const auto& v : dist.values) csv::write_row(out, {name, std::to_string(b), v.question_id, csv::format_double(v.percent)});
    }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active matrix-factorization surveys: fit, order, simulate, analyse order effects, serve"};
  app.require_subcommand(1);

  // fit -------------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "train question factors and priors");
  DataArgs fit_data;
  fit_data.add(fit);
  TrainOptions train;
  std::string fit_out = "model.json", fit_grid, fit_model = "gaussian", fit_covariates;
  std::optional<double> fit_lambda, fit_alpha;
  fit->add_option("--rank", train.rank, "latent rank")->capture_default_str();
  fit->add_option("--lambda", fit_lambda, "fixed nuclear-norm penalty");
  fit->add_option("--lambda-grid", fit_grid, "comma-separated penalty grid");
  fit->add_option("--alpha", fit_alpha, "response precision; estimated when absent");
  fit->add_option("--model", fit_model, "gaussian or ordlogit (adds the ordered-logit component)");
  fit->add_option("--covariates", fit_covariates, "comma-separated covariate question ids");
  fit->add_option("--epochs", train.variational.max_epochs, "variational epochs")->capture_default_str();
  fit->add_option("--seed", train.seed)->capture_default_str();
  fit->add_option("--out", fit_out)->capture_default_str();

  // order -----------------------------------------------------------------
  auto* order = app.add_subcommand("order", "emit the offline active question ordering");
  std::string order_model, order_criterion = "A", order_out = "order.csv";
  int order_budget = -1;
  order->add_option("--model-file", order_model)->required();
  order->add_option("--criterion", order_criterion, "A, D or E")->capture_default_str();
  order->add_option("--budget", order_budget, "number of questions (default: all)");
  order->add_option("--out", order_out)->capture_default_str();

  // simulate --------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "run survey strategies against a dataset");
  DataArgs sim_data;
  sim_data.add(sim);
  SimulationConfig config;
  std::vector<std::string> strategies;
  std::string sim_model = "gaussian", holdout = "sparse:0.2", sim_grid, sim_out = "report", sim_criterion = "A",
              sim_covariates;
  std::optional<double> sim_lambda, sim_epsilon;
  std::string sim_ranks = "4", sim_alphas;
  int budget = 10;
  std::uint64_t seed = 0;
  double train_fraction = 0.5;
  sim->add_option("--strategy", strategies, "active[:A|D|E], random[:seed], fixed:i,j,..., epsilon[:eps[:crit]], adaptive; "
                                            "suffix +subgroups or +covariates");
  sim->add_option("--model", sim_model, "gaussian or ordlogit")->capture_default_str();
  sim->add_option("--budget", budget)->capture_default_str();
  sim->add_option("--holdout", holdout, "sparse:F, loocv or kfold:K")->capture_default_str();
  sim->add_option("--rank", sim_ranks, "latent rank; a comma-separated list runs a sweep")->capture_default_str();
  sim->add_option("--alpha", sim_alphas, "response precision (default 1); a comma-separated list runs a sweep");
  sim->add_flag("--estimate-alpha", config.estimate_alpha, "alpha from training residuals");
  sim->add_option("--lambda", sim_lambda);
  sim->add_option("--lambda-grid", sim_grid);
  sim->add_option("--criterion", sim_criterion, "criterion for bare active/epsilon strategies")->capture_default_str();
  sim->add_option("--epsilon", sim_epsilon, "epsilon for bare epsilon strategies");
  sim->add_option("--covariates", sim_covariates, "comma-separated covariate question ids");
  sim->add_option("--train-fraction", train_fraction)->capture_default_str();
  sim->add_option("--epochs", config.variational.max_epochs, "variational epochs (ordlogit)")->capture_default_str();
  sim->add_option("--refit-epochs", config.refit_epochs)->capture_default_str();
  sim->add_option("--seed", seed)->capture_default_str();
  sim->add_option("--out", sim_out, "output prefix")->capture_default_str();

  // order-effects ---------------------------------------------------------
  auto* oe = app.add_subcommand("order-effects", "position and previous-question effects");
  std::string oe_data, oe_out = "order_effects", oe_parity = "all", cv_rule = "1se";
  int permutations = 200, folds = 10;
  std::uint64_t oe_seed = 0;
  oe->add_option("--data", oe_data, "long CSV: user, question, position, value")->required();
  oe->add_option("--permutations", permutations)->capture_default_str();
  oe->add_option("--folds", folds)->capture_default_str();
  oe->add_option("--parity", oe_parity, "all, odd or even positions")->capture_default_str();
  oe->add_option("--cv-rule", cv_rule, "penalty choice: 1se or min")->check(CLI::IsMember({"1se", "min"}))->capture_default_str();
  oe->add_option("--seed", oe_seed)->capture_default_str();
  oe->add_option("--out", oe_out, "output prefix")->capture_default_str();

  // synth -----------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate synthetic data");
  SyntheticOptions so;
  OrderDataOptions od;
  std::string synth_model = "gaussian", synth_out = "synthetic", drift, pairs;
  bool order_data = false;
  synth->add_option("--n", so.n)->capture_default_str();
  synth->add_option("--k", so.k)->capture_default_str();
  synth->add_option("--rank", so.r)->capture_default_str();
  synth->add_option("--noise", so.noise_sd)->capture_default_str();
  synth->add_option("--model", synth_model, "gaussian or ordlogit")->capture_default_str();
  synth->add_option("--categories", so.categories)->capture_default_str();
  synth->add_option("--observed", so.observed_fraction)->capture_default_str();
  synth->add_option("--groups", so.groups)->capture_default_str();
  synth->add_option("--group-shift", so.group_shift)->capture_default_str();
  synth->add_option("--seed", so.seed)->capture_default_str();
  synth->add_flag("--order-data", order_data, "generate administered-order data instead");
  synth->add_option("--drift", drift, "position drift (one value or one per question)");
  synth->add_option("--pairs", pairs, "injected pairs q:prev:effect;...");
  synth->add_option("--incomplete", od.incomplete_fraction)->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->capture_default_str();

  // serve -----------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "HTTP survey sessions");
  std::string serve_model = env_or("ASURVEY_MODEL", ""), bind = env_or("ASURVEY_BIND", "127.0.0.1:8080"),
              persist = env_or("ASURVEY_PERSIST_DIR", "");
  serve->add_option("--model-file", serve_model, "model JSON (env ASURVEY_MODEL)");
  serve->add_option("--bind", bind, "host:port (env ASURVEY_BIND)")->capture_default_str();
  serve->add_option("--persist-dir", persist, "session log directory (env ASURVEY_PERSIST_DIR)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      if (fit_lambda) train.lambda = *fit_lambda;
      if (fit_alpha) train.alpha = *fit_alpha;
      train.lambda_grid = parse_list(fit_grid);
      train.ordlogit = parse_model_kind(fit_model) == ModelKind::ordered_logit;
      train.covariates = parse_ids(fit_covariates);
      const auto model = train_survey_model(fit_data.load(), train);
      save_model(fit_out, model);
      std::cout << "rank " << model.rank() << ", lambda " << model.factors.lambda << ", alpha " << model.noise.alpha
                << " -> " << fit_out << '\n';
    } else if (*order) {
      const auto model = load_model(order_model);
      const int T = order_budget < 0 ? static_cast<int>(model.num_questions()) : order_budget;
      const auto ordering = offline_order(model.prior, model.factors.V, model.noise, parse_criterion(order_criterion), T);
      auto out = open_out(order_out);
      write_question_order(out, ordering, model.questions);
    } else if (*sim) {
      if (strategies.empty()) strategies = {"active", "random"};
      std::vector<Strategy> parsed;
      for (auto text : strategies) {
        if (text == "active") text += ":" + sim_criterion;
        if (text == "epsilon" && sim_epsilon) text += ":" + csv::format_double(*sim_epsilon) + ":" + sim_criterion;
        parsed.push_back(parse_strategy(text, seed));
      }
      if (sim_lambda) config.lambda = *sim_lambda;
      config.lambda_grid = parse_list(sim_grid);
      config.covariates = parse_ids(sim_covariates);
      config.variational.seed = seed;
      const auto data = sim_data.load();
      const auto model = parse_model_kind(sim_model);
      const auto spec = parse_holdout(holdout);
      const auto ranks = parse_list(sim_ranks);
      std::vector<std::optional<double>> alphas{std::nullopt};
      if (!sim_alphas.empty()) {
        alphas.clear();
        for (double a : parse_list(sim_alphas)) alphas.emplace_back(a);
      }
      if (ranks.empty()) throw std::invalid_argument("--rank needs at least one value");
      const bool sweep = ranks.size() > 1 || alphas.size() > 1;
      for (double r : ranks)
        for (const auto& a : alphas) {
          config.rank = static_cast<int>(r);
          if (config.rank != r || config.rank < 1) throw std::invalid_argument("rank must be a positive integer");
          if (a) config.alpha = *a;
          std::string prefix = sim_out;
          if (sweep) {
            prefix += "_r" + std::to_string(config.rank) + "_a" + csv::format_double(config.alpha);
            std::cout << "rank " << config.rank << ", alpha " << config.alpha << '\n';
          }
          if (std::holds_alternative<LooHoldout>(spec) || std::holds_alternative<KFoldHoldout>(spec)) {
            std::vector<int> budgets(static_cast<std::size_t>(budget) + 1);
            std::iota(budgets.begin(), budgets.end(), 0);
            const auto table = std::holds_alternative<LooHoldout>(spec)
                                   ? loocv_per_question(data, parsed, model, budgets, config, seed, train_fraction)
                                   : kfold_per_question(data, parsed, model, budgets, std::get<KFoldHoldout>(spec).folds, config,
                                                        seed, train_fraction);
            for (const auto& id : table.skipped) std::cerr << "warning: question " << id << " has no observations; skipped\n";
            auto out = open_out(prefix + "_per_question.csv");
            write_per_question_csv(out, table);
            write_reductions(prefix + "_reduction.csv", table);
            std::cout << table.runs << " simulation runs -> " << prefix << "_per_question.csv\n";
          } else {
            const auto report = simulate_survey(data, SplitSpec{seed, train_fraction, spec}, parsed, model, budget, config);
            {
              auto out = open_out(prefix + "_report.csv");
              write_report_csv(out, report);
            }
            {
              auto out = open_out(prefix + "_paths.csv");
              write_paths_csv(out, report);
            }
            write_curves(prefix + "_complexity.csv", report);
            for (const auto& s : report.strategies)
              std::cout << s.strategy << ": pre-survey MAE " << s.pre_survey().mae << ", MAE at " << budget << " "
                        << s.overall.back().mae << ", oracle " << s.oracle.mae << '\n';
          }
        }
    } else if (*oe) {
      const auto data = load_ordered_responses(oe_data);
      const auto position = position_effect_estimate(data, permutations, oe_seed);
      {
        auto out = open_out(oe_out + "_position.csv");
        csv::write_row(out, {"question", "effect", "null_low", "null_high", "n", "flagged"});
        for (const auto& e : position.effects)
          csv::write_row(out, {e.question_id, csv::format_double(e.effect), csv::format_double(e.null_low),
                               csv::format_double(e.null_high), std::to_string(e.count), e.flagged ? "1" : "0"});
        for (const auto& id : position.skipped) std::cerr << "warning: " << id << " seen at fewer than 3 positions; skipped\n";
      }
      PairwiseOptions po;
      po.cv_folds = folds;
      po.parity = parse_pair_parity(oe_parity);
      po.one_se_rule = cv_rule == "1se";
      po.seed = oe_seed;
      const auto pairwise = pairwise_order_effects(data, po);
      auto out = open_out(oe_out + "_pairwise.csv");
      csv::write_row(out, {"question", "previous", "coefficient", "refit", "n"});
      for (const auto& e : pairwise.nonzero)
        csv::write_row(out, {e.question_id, e.previous_id, csv::format_double(e.coefficient), csv::format_double(e.refit),
                             std::to_string(e.count)});
      std::cout << pairwise.nonzero.size() << " of " << pairwise.pairs_observed << " pairs nonzero at lambda "
                << pairwise.lambda << '\n';
    } else if (*synth) {
      fs::create_directories(synth_out);
      if (order_data) {
        od.n = so.n;
        od.k = so.k;
        od.seed = so.seed;
        od.position_drift = parse_list(drift);
        std::stringstream ss(pairs);
        std::string item;
        while (std::getline(ss, item, ';')) {
          if (item.empty()) continue;
          int q = 0, p = 0;
          double e = 0;
          char c1 = 0, c2 = 0;
          std::istringstream is(item);
          if (!(is >> q >> c1 >> p >> c2 >> e) || c1 != ':' || c2 != ':') throw std::invalid_argument("bad pair: " + item);
          od.pairs.push_back({q, p, e});
        }
        save_ordered_responses(fs::path(synth_out) / "order.csv", generate_order_data(od));
      } else {
        so.model = synth_model == "ordlogit" ? SyntheticModel::ordered_logit : SyntheticModel::gaussian;
        const auto s = generate_synthetic(so);
        save_dataset(fs::path(synth_out) / "data.csv", s.data);
        save_schema(fs::path(synth_out) / "schema.csv", s.data.questions);
        for (const auto& [name, m] : {std::pair{"U.csv", &s.U}, std::pair{"V.csv", &s.V}}) {
          auto out = open_out(fs::path(synth_out) / name);
          for (Eigen::Index i = 0; i < m->rows(); ++i) {
            csv::Row row;
            for (Eigen::Index j = 0; j < m->cols(); ++j) row.push_back(csv::format_double((*m)(i, j)));
            csv::write_row(out, row);
          }
        }
      }
      std::cout << "wrote " << synth_out << '\n';
    } else if (*serve) {
      if (serve_model.empty()) throw std::invalid_argument("--model-file or ASURVEY_MODEL is required");
      auto model = std::make_shared<const SurveyModel>(load_model(serve_model));
      service::SurveyService svc(model, {persist, std::nullopt});
      const auto recovered = svc.recover();
      httplib::Server server;
      server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
      server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
      });
      service::register_routes(server, svc);
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) throw std::invalid_argument("--bind must be host:port");
      const std::string host = bind.substr(0, colon);
      const int port = std::stoi(bind.substr(colon + 1));
      std::cerr << "serving " << model->num_questions() << " questions on " << bind << " (" << recovered
                << " sessions recovered)\n";
      if (!server.listen(host, port)) throw std::runtime_error("cannot bind " + bind);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
