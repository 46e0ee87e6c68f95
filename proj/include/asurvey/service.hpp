#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "asurvey/harness.hpp"
#include "asurvey/model_io.hpp"

namespace httplib {
class Server;
}

namespace asurvey::service {

enum class SessionStatus { active, completed, abandoned };

std::string_view to_string(SessionStatus status);

// Error carrying the HTTP status and a stable machine-readable code.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int http_status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(http_status), code_(std::move(code)) {}
  [[nodiscard]] int http_status() const { return status_; }
  [[nodiscard]] const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct SessionRequest {
  std::string strategy = "active";  // parse_strategy syntax
  int budget = 5;
  // Defaults to ordered_logit for the adaptive strategy, gaussian otherwise.
  std::optional<ModelKind> model;
  std::map<std::string, double> covariates;  // raw covariate answers
  std::uint64_t seed = 0;
};

struct QuestionView {
  std::string id;
  int index = 0;
  std::string text;
  std::vector<std::string> labels;
  int num_categories = 0;
};

struct NextResult {
  SessionStatus status = SessionStatus::active;
  std::optional<QuestionView> question;  // empty once the session is over
  int step = 0;                          // questions already asked
  int budget = 0;
};

struct Progress {
  SessionStatus status = SessionStatus::active;
  int asked = 0;
  int budget = 0;
};

// Predictions are in response units: categories for categorical schemas,
// raw values for real-valued models.
struct QuestionPrediction {
  std::string question_id;
  double value = 0.0;
  double variance = 0.0;
  bool asked = false;
  bool skipped = false;
};

struct AskedItem {
  int question = 0;
  std::optional<double> value;  // empty for a skip
};

// Single-threaded session state machine. Every mutation is an event; the
// same events replayed onto a fresh session reproduce the state exactly.
class Session {
 public:
  Session(std::shared_ptr<const SurveyModel> model, std::string id, const SessionRequest& request);

  static Session replay(std::shared_ptr<const SurveyModel> model, const std::vector<nlohmann::json>& events);

  NextResult next();
  Progress submit(std::string_view question_id, std::optional<double> value);
  Progress end(bool abandoned = false);
  [[nodiscard]] std::vector<QuestionPrediction> predictions() const;
  [[nodiscard]] nlohmann::json snapshot() const;
  [[nodiscard]] Progress progress() const;

  [[nodiscard]] const std::string& id() const { return id_; }
  [[nodiscard]] ModelKind model_kind() const { return kind_; }
  [[nodiscard]] SessionStatus status() const { return status_; }
  [[nodiscard]] const std::vector<AskedItem>& asked() const { return asked_; }
  [[nodiscard]] std::optional<int> pending() const { return pending_; }
  // Gaussian posterior, or the Laplace belief (mode, precision) for ordered logit.
  [[nodiscard]] GaussianBelief belief() const;
  [[nodiscard]] const std::vector<nlohmann::json>& events() const { return events_; }

 private:
  Session(std::shared_ptr<const SurveyModel> model, const nlohmann::json& created);

  void apply(const nlohmann::json& event);
  [[nodiscard]] int choose() const;
  [[nodiscard]] std::vector<int> remaining() const;
  [[nodiscard]] const Matrix& question_factors() const;
  [[nodiscard]] double response_for_update(int question, double value) const;
  void check_value(int question, double value) const;
  void record_answer(int question, double value);

  std::shared_ptr<const SurveyModel> model_;
  std::string id_;
  Strategy strategy_;
  ModelKind kind_ = ModelKind::gaussian_pmf;
  int budget_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::string, double> covariates_;
  SessionStatus status_ = SessionStatus::active;
  std::vector<AskedItem> asked_;
  std::optional<int> pending_;
  std::vector<bool> excluded_;  // covariates are never asked
  std::vector<int> random_plan_;

  GaussianBelief gaussian_;  // posterior (Gaussian) or design precision (ordered logit)
  std::optional<InformationState> info_;
  Vector u_hat_;
  GaussianBelief ordlogit_prior_;

  std::vector<nlohmann::json> events_;
};

struct ServiceOptions {
  std::filesystem::path persist_dir;  // empty disables persistence
  std::optional<std::uint64_t> id_seed;
};

// Thread-safe registry of sessions with per-session serialization.
class SurveyService {
 public:
  explicit SurveyService(std::shared_ptr<const SurveyModel> model, ServiceOptions options = {});

  std::string create_session(const SessionRequest& request);
  NextResult next_question(const std::string& id);
  Progress submit_response(const std::string& id, std::string_view question_id, std::optional<double> value);
  Progress end_session(const std::string& id, bool abandoned = false);
  std::vector<QuestionPrediction> predictions(const std::string& id);
  nlohmann::json snapshot(const std::string& id);
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] const SurveyModel& model() const { return *model_; }

  // Replays every event log in the persistence directory.
  std::size_t recover();

 private:
  struct Entry {
    std::mutex mutex;
    Session session;
    std::size_t persisted = 0;  // events already on disk
    explicit Entry(Session s) : session(std::move(s)) {}
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist(Entry& entry) const;
  std::string fresh_id();

  std::shared_ptr<const SurveyModel> model_;
  ServiceOptions options_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mutex id_mutex_;
  std::mt19937_64 id_rng_;
};

std::vector<nlohmann::json> read_event_log(const std::filesystem::path& path);
std::filesystem::path event_log_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path snapshot_path(const std::filesystem::path& dir, const std::string& id);

// JSON wire format shared by the HTTP layer and its tests.
nlohmann::json to_json(const NextResult& next);
nlohmann::json to_json(const Progress& progress);
nlohmann::json to_json(const std::vector<QuestionPrediction>& predictions);
SessionRequest session_request_from_json(const nlohmann::json& body);

// Installs the HTTP routes on `server`.
void register_routes(httplib::Server& server, SurveyService& service);

}  // namespace asurvey::service
