#include "asurvey/model_io.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include "asurvey/harness.hpp"

namespace asurvey {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "asurvey-model";
constexpr int kVersion = 1;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw std::runtime_error("matrix row count mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = data.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw std::runtime_error("matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

std::string_view scale_name(ResponseScale s) {
  switch (s) {
    case ResponseScale::categorical: return "categorical";
    case ResponseScale::scaled: return "scaled";
    case ResponseScale::real: return "real";
  }
  return "scaled";
}

ResponseScale parse_scale(std::string_view s) {
  if (s == "categorical") return ResponseScale::categorical;
  if (s == "scaled") return ResponseScale::scaled;
  if (s == "real") return ResponseScale::real;
  throw std::runtime_error("unknown response scale: " + std::string(s));
}

json question_to_json(const QuestionMeta& q) {
  return json{{"id", q.id},         {"num_categories", q.num_categories}, {"kind", to_string(q.kind)},
              {"source", q.source_column}, {"text", q.text},             {"labels", q.labels}};
}

QuestionMeta question_from_json(const json& j) {
  QuestionMeta q;
  q.id = j.at("id").get<std::string>();
  q.num_categories = j.at("num_categories").get<int>();
  q.kind = parse_question_kind(j.at("kind").get<std::string>());
  q.source_column = j.value("source", std::string());
  q.text = j.value("text", std::string());
  q.labels = j.value("labels", std::vector<std::string>{});
  return q;
}

}  // namespace

json belief_to_json(const GaussianBelief& belief) {
  return json{{"mean", vector_to_json(belief.mean)}, {"precision", matrix_to_json(belief.precision)}};
}

GaussianBelief belief_from_json(const json& j) {
  return GaussianBelief{vector_from_json(j.at("mean")), matrix_from_json(j.at("precision"))};
}

int SurveyModel::question_index(std::string_view id) const {
  for (std::size_t j = 0; j < questions.size(); ++j)
    if (questions[j].id == id) return static_cast<int>(j);
  return -1;
}

void SurveyModel::validate() const {
  const auto k = num_questions();
  if (k == 0) throw std::invalid_argument("model has no questions");
  if (scale == ResponseScale::categorical) throw std::invalid_argument("Gaussian model scale must be scaled or real");
  factors.validate();
  if (factors.V.rows() != k) throw std::invalid_argument("factor rows differ from the question count");
  if (prior.dim() != rank()) throw std::invalid_argument("prior dimension differs from rank");
  prior.validate();
  noise.validate();
  for (const auto& [key, belief] : subgroup_priors) {
    if (belief.dim() != rank()) throw std::invalid_argument("subgroup prior dimension differs from rank");
    belief.validate();
  }
  for (const auto& c : covariates)
    if (question_index(c) < 0) throw std::invalid_argument("unknown covariate id: " + c);
  if (ordlogit) {
    const auto& o = *ordlogit;
    if (o.V.rows() != k || o.V.cols() != o.prior.dim() || o.V_sd.rows() != k || o.V_sd.cols() != o.V.cols())
      throw std::invalid_argument("ordered-logit factors have the wrong shape");
    if (static_cast<Eigen::Index>(o.cutpoints.size()) != k) throw std::invalid_argument("one cutpoint set per question required");
    for (std::size_t j = 0; j < o.cutpoints.size(); ++j) {
      o.cutpoints[j].validate();
      if (o.cutpoints[j].num_categories() != questions[j].num_categories)
        throw std::invalid_argument("cutpoints disagree with the category count of " + questions[j].id);
    }
    o.prior.validate();
    for (const auto& [key, belief] : o.subgroup_priors) {
      if (belief.dim() != o.prior.dim()) throw std::invalid_argument("subgroup prior dimension differs from rank");
      belief.validate();
    }
  }
}

json model_to_json(const SurveyModel& m) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["questions"] = json::array();
  for (const auto& q : m.questions) j["questions"].push_back(question_to_json(q));
  j["scale"] = scale_name(m.scale);
  j["factors"] = {{"U", matrix_to_json(m.factors.U)},
                  {"d", vector_to_json(m.factors.d)},
                  {"V", matrix_to_json(m.factors.V)},
                  {"lambda", m.factors.lambda},
                  {"method", m.factors.method == FactorMethod::als ? "als" : "softimpute"},
                  {"iterations", m.factors.iterations},
                  {"converged", m.factors.converged}};
  j["prior"] = belief_to_json(m.prior);
  j["alpha"] = m.noise.alpha;
  j["covariates"] = m.covariates;
  j["subgroup_priors"] = json::object();
  for (const auto& [key, belief] : m.subgroup_priors) j["subgroup_priors"][key] = belief_to_json(belief);
  if (m.ordlogit) {
    json cuts = json::array();
    for (const auto& c : m.ordlogit->cutpoints) cuts.push_back(vector_to_json(c.beta));
    j["ordlogit"] = {{"V", matrix_to_json(m.ordlogit->V)},
                     {"V_sd", matrix_to_json(m.ordlogit->V_sd)},
                     {"cutpoints", std::move(cuts)},
                     {"prior", belief_to_json(m.ordlogit->prior)},
                     {"subgroup_priors", json::object()}};
    for (const auto& [key, belief] : m.ordlogit->subgroup_priors) j["ordlogit"]["subgroup_priors"][key] = belief_to_json(belief);
  }
  return j;
}

SurveyModel model_from_json(const json& j) {
  if (j.value("format", std::string()) != kFormat) throw std::runtime_error("not an asurvey model file");
  if (j.value("version", 0) != kVersion) throw std::runtime_error("unsupported model version");
  SurveyModel m;
  for (const auto& q : j.at("questions")) m.questions.push_back(question_from_json(q));
  m.scale = parse_scale(j.at("scale").get<std::string>());
  const auto& f = j.at("factors");
  m.factors.U = matrix_from_json(f.at("U"));
  m.factors.d = vector_from_json(f.at("d"));
  m.factors.V = matrix_from_json(f.at("V"));
  m.factors.lambda = f.at("lambda").get<double>();
  m.factors.method = f.at("method").get<std::string>() == "als" ? FactorMethod::als : FactorMethod::softimpute;
  m.factors.iterations = f.value("iterations", 0);
  m.factors.converged = f.value("converged", true);
  m.prior = belief_from_json(j.at("prior"));
  m.noise.alpha = j.at("alpha").get<double>();
  m.covariates = j.value("covariates", std::vector<std::string>{});
  if (j.contains("subgroup_priors"))
    for (const auto& [key, value] : j.at("subgroup_priors").items()) m.subgroup_priors.emplace(key, belief_from_json(value));
  if (j.contains("ordlogit")) {
    const auto& o = j.at("ordlogit");
    OrdLogitComponent c;
    c.V = matrix_from_json(o.at("V"));
    c.V_sd = matrix_from_json(o.at("V_sd"));
    for (const auto& beta : o.at("cutpoints")) c.cutpoints.push_back(Cutpoints{vector_from_json(beta)});
    c.prior = belief_from_json(o.at("prior"));
    if (o.contains("subgroup_priors"))
      for (const auto& [key, value] : o.at("subgroup_priors").items()) c.subgroup_priors.emplace(key, belief_from_json(value));
    m.ordlogit = std::move(c);
  }
  return m;
}

void save_model(const std::filesystem::path& path, const SurveyModel& model) {
  model.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model).dump(1) << '\n';
}

SurveyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  SurveyModel m;
  try {
    m = model_from_json(json::parse(in));
    m.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error("invalid model file " + path.string() + ": " + e.what());
  }
  return m;
}

SurveyModel train_survey_model(const ResponseMatrix& data, const TrainOptions& o) {
  data.validate();
  SurveyModel m;
  m.questions = data.questions;
  const ResponseMatrix R = data.scale == ResponseScale::categorical ? rescale_responses(data) : data;
  m.scale = R.scale;

  double lambda = 0.0;
  if (o.lambda) {
    lambda = *o.lambda;
  } else {
    const auto grid = o.lambda_grid.empty() ? default_lambda_grid(R) : o.lambda_grid;
    lambda = lambda_grid_search(R, grid, o.val_fraction, o.rank, o.seed, o.tol, o.max_iter).best_lambda;
  }
  m.factors = softimpute_fit(R, {lambda, o.rank, o.tol, o.max_iter}).model;
  const Matrix user_factors = m.factors.user_factors();
  m.prior = empirical_bayes_prior(user_factors, o.jitter);
  m.noise.alpha = o.alpha ? *o.alpha : 1.0 / std::max(estimate_noise_variance(m.factors, R), 1e-6);

  std::vector<int> covariate_columns;
  for (const auto& id : o.covariates) {
    const int c = data.question_index(id);
    if (c < 0) throw std::invalid_argument("unknown covariate id: " + id);
    covariate_columns.push_back(c);
  }
  m.covariates = o.covariates;

  auto fill_subgroups = [&](const Matrix& factors) {
    std::map<std::string, GaussianBelief> out;
    if (covariate_columns.empty()) return out;
    std::map<std::string, std::vector<Eigen::Index>> groups;
    for (Eigen::Index i = 0; i < data.rows(); ++i) groups[subgroup_key(data, i, covariate_columns)].push_back(i);
    for (const auto& [key, members] : groups) {
      if (static_cast<int>(members.size()) < std::max(o.subgroup_min_users, 2)) continue;
      Matrix rows(static_cast<Eigen::Index>(members.size()), factors.cols());
      for (std::size_t r = 0; r < members.size(); ++r) rows.row(static_cast<Eigen::Index>(r)) = factors.row(members[r]);
      try {
        out.emplace(key, empirical_bayes_prior(rows, o.jitter));
      } catch (const std::invalid_argument&) {
      }
    }
    return out;
  };
  m.subgroup_priors = fill_subgroups(user_factors);

  if (o.ordlogit) {
    if (data.scale != ResponseScale::categorical) throw std::invalid_argument("ordered-logit training needs categorical data");
    OrdLogitComponent c;
    c.cutpoints = cutpoints_from_data(data);
    const GaussianBelief unit = standard_normal_belief(o.rank);
    VariationalConfig vc = o.variational;
    vc.seed = o.seed;
    const VariationalFit fit = fit_variational(data, c.cutpoints, o.rank, unit, unit, vc);
    c.V = fit.params.question_mean;
    c.V_sd = fit.params.question_sd;
    c.prior = empirical_bayes_prior(fit.params.user_mean, o.jitter);
    c.subgroup_priors = fill_subgroups(fit.params.user_mean);
    m.ordlogit = std::move(c);
  }
  m.validate();
  return m;
}

}  // namespace asurvey
