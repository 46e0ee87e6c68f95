#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asurvey/completion.hpp"
#include "asurvey/data.hpp"
#include "asurvey/ordlogit.hpp"
#include "asurvey/pmf.hpp"

namespace asurvey {

struct OrdLogitComponent {
  Matrix V;     // variational question means, k x r
  Matrix V_sd;  // k x r
  std::vector<Cutpoints> cutpoints;
  GaussianBelief prior;  // empirical Bayes over the training user means
  std::map<std::string, GaussianBelief> subgroup_priors;
};

// Everything a live survey needs: question metadata, trained factors and
// priors.
struct SurveyModel {
  std::vector<QuestionMeta> questions;
  ResponseScale scale = ResponseScale::scaled;  // scale of Gaussian-model responses
  FactorModel factors;
  GaussianBelief prior;
  NoiseModel noise;
  std::optional<OrdLogitComponent> ordlogit;
  std::vector<std::string> covariates;
  std::map<std::string, GaussianBelief> subgroup_priors;  // keyed by subgroup_key

  [[nodiscard]] int rank() const { return factors.rank(); }
  [[nodiscard]] Eigen::Index num_questions() const { return static_cast<Eigen::Index>(questions.size()); }
  [[nodiscard]] int question_index(std::string_view id) const;
  void validate() const;
};

nlohmann::json model_to_json(const SurveyModel& model);
SurveyModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const SurveyModel& model);
// Throws std::runtime_error on unreadable or invalid files.
SurveyModel load_model(const std::filesystem::path& path);

nlohmann::json belief_to_json(const GaussianBelief& belief);
GaussianBelief belief_from_json(const nlohmann::json& j);

struct TrainOptions {
  int rank = 4;
  std::optional<double> lambda;
  std::vector<double> lambda_grid;
  double val_fraction = 0.2;
  std::optional<double> alpha;  // estimated from residuals when absent
  double tol = 1e-5;
  int max_iter = 500;
  double jitter = 1e-6;
  std::uint64_t seed = 0;
  bool ordlogit = false;
  VariationalConfig variational;
  std::vector<std::string> covariates;
  int subgroup_min_users = 10;
};

// Fits factors, priors and (optionally) the ordered-logit component on a
// full training matrix. Categorical input is rescaled for the Gaussian part.
SurveyModel train_survey_model(const ResponseMatrix& data, const TrainOptions& options);

}  // namespace asurvey
