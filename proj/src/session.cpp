#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "asurvey/csv.hpp"
#include "asurvey/service.hpp"

namespace asurvey::service {

using nlohmann::json;

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::active: return "active";
    case SessionStatus::completed: return "completed";
    case SessionStatus::abandoned: return "abandoned";
  }
  return "active";
}

namespace {

ServiceError bad_request(const std::string& message) { return {400, "bad_request", message}; }
ServiceError conflict(std::string code, const std::string& message) { return {409, std::move(code), message}; }

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Vector row = m.row(i).transpose();
    rows.push_back(vector_json(row));
  }
  return rows;
}

}  // namespace

Session::Session(std::shared_ptr<const SurveyModel> model, std::string id, const SessionRequest& request)
    : Session(std::move(model), [&] {
        json covariates = json::object();
        for (const auto& [key, value] : request.covariates) covariates[key] = value;
        std::string kind;
        if (request.model) {
          kind = std::string(asurvey::to_string(*request.model));
        } else {
          const bool adaptive = request.strategy.rfind("adaptive", 0) == 0;
          kind = std::string(asurvey::to_string(adaptive ? ModelKind::ordered_logit : ModelKind::gaussian_pmf));
        }
        return json{{"event", "created"},    {"session", id},     {"strategy", request.strategy}, {"model", kind},
                    {"budget", request.budget}, {"seed", request.seed}, {"covariates", covariates}};
      }()) {}

Session::Session(std::shared_ptr<const SurveyModel> model, const json& created) : model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("session needs a model");
  if (created.value("event", std::string()) != "created") throw bad_request("event log must start with a created event");
  const auto& m = *model_;
  const auto k = static_cast<int>(m.num_questions());

  id_ = created.at("session").get<std::string>();
  seed_ = created.at("seed").get<std::uint64_t>();
  budget_ = created.at("budget").get<int>();
  try {
    strategy_ = parse_strategy(created.at("strategy").get<std::string>(), seed_);
    kind_ = parse_model_kind(created.at("model").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw bad_request(e.what());
  }
  if (kind_ == ModelKind::ordered_logit && !m.ordlogit) throw bad_request("model file has no ordered-logit component");
  if (std::holds_alternative<AdaptiveOrdLogitStrategy>(strategy_.kind) && kind_ != ModelKind::ordered_logit)
    throw bad_request("adaptive strategy requires the ordered_logit model");

  excluded_.assign(static_cast<std::size_t>(k), false);
  for (const auto& c : m.covariates) excluded_[static_cast<std::size_t>(m.question_index(c))] = true;
  const auto askable = static_cast<int>(std::count(excluded_.begin(), excluded_.end(), false));
  if (budget_ < 1) throw bad_request("budget must be at least 1");
  if (budget_ > askable)
    throw bad_request("budget " + std::to_string(budget_) + " exceeds the " + std::to_string(askable) + " askable questions");

  if (const auto* f = std::get_if<FixedOrderStrategy>(&strategy_.kind)) {
    std::vector<int> sorted = f->order;
    std::sort(sorted.begin(), sorted.end());
    for (int j = 0; j < k; ++j)
      if (static_cast<int>(sorted.size()) != k || sorted[static_cast<std::size_t>(j)] != j)
        throw bad_request("fixed order must be a permutation of the question indices");
  }
  if (const auto* r = std::get_if<RandomStrategy>(&strategy_.kind)) {
    for (int j = 0; j < k; ++j)
      if (!excluded_[static_cast<std::size_t>(j)]) random_plan_.push_back(j);
    std::mt19937_64 rng(r->seed);
    std::shuffle(random_plan_.begin(), random_plan_.end(), rng);
  }

  std::string key;
  for (std::size_t c = 0; c < m.covariates.size(); ++c) {
    if (c) key += '|';
    const auto it = created.at("covariates").find(m.covariates[c]);
    key += it == created.at("covariates").end() ? std::string("NA") : csv::format_double(it->get<double>());
  }
  for (const auto& [name, value] : created.at("covariates").items()) {
    const int j = m.question_index(name);
    if (j < 0 || !excluded_[static_cast<std::size_t>(j)]) throw bad_request("unknown covariate id: " + name);
    covariates_[name] = value.get<double>();
  }

  auto pick_prior = [&](const GaussianBelief& global, const std::map<std::string, GaussianBelief>& groups) {
    if (covariates_.empty()) return global;
    const auto it = groups.find(key);
    return it == groups.end() ? global : it->second;
  };
  if (kind_ == ModelKind::gaussian_pmf) {
    gaussian_ = pick_prior(m.prior, m.subgroup_priors);
  } else {
    ordlogit_prior_ = pick_prior(m.ordlogit->prior, m.ordlogit->subgroup_priors);
    gaussian_ = ordlogit_prior_;
    info_.emplace(ordlogit_prior_.precision, k);
    u_hat_ = ordlogit_prior_.mean;
  }

  if (strategy_.side_info == SideInfoMode::free_covariates) {
    for (const auto& [name, value] : covariates_) {
      const int j = m.question_index(name);
      check_value(j, value);
      record_answer(j, value);
    }
  }
  events_.push_back(created);
}

Session Session::replay(std::shared_ptr<const SurveyModel> model, const std::vector<json>& events) {
  if (events.empty()) throw bad_request("empty event log");
  Session s(std::move(model), events.front());
  for (std::size_t e = 1; e < events.size(); ++e) s.apply(events[e]);
  return s;
}

const Matrix& Session::question_factors() const {
  return kind_ == ModelKind::gaussian_pmf ? model_->factors.V : model_->ordlogit->V;
}

std::vector<int> Session::remaining() const {
  std::vector<int> out;
  std::vector<bool> asked(excluded_);
  for (const auto& a : asked_) asked[static_cast<std::size_t>(a.question)] = true;
  for (std::size_t j = 0; j < asked.size(); ++j)
    if (!asked[j]) out.push_back(static_cast<int>(j));
  return out;
}

int Session::choose() const {
  const auto rem = remaining();
  if (rem.empty()) throw conflict("exhausted", "no askable questions remain");
  const Matrix& V = question_factors();
  auto is_remaining = [&](int j) { return std::binary_search(rem.begin(), rem.end(), j); };
  return std::visit(
      [&](const auto& s) -> int {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ActiveStrategy>) {
          return select_next(gaussian_, rem, V, model_->noise, s.criterion);
        } else if constexpr (std::is_same_v<S, RandomStrategy>) {
          for (int j : random_plan_)
            if (is_remaining(j)) return j;
          throw conflict("exhausted", "no askable questions remain");
        } else if constexpr (std::is_same_v<S, FixedOrderStrategy>) {
          for (int j : s.order)
            if (is_remaining(j)) return j;
          throw conflict("exhausted", "no askable questions remain");
        } else if constexpr (std::is_same_v<S, EpsilonGreedyStrategy>) {
          const auto step = static_cast<std::uint32_t>(asked_.size());
          std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32), step};
          std::mt19937_64 rng(seq);
          return epsilon_greedy_select(gaussian_, rem, V, model_->noise, s.criterion, s.epsilon, rng);
        } else {
          return select_next_adaptive(u_hat_, *info_, rem, V, model_->ordlogit->cutpoints);
        }
      },
      strategy_.kind);
}

void Session::check_value(int question, double value) const {
  const auto& q = model_->questions[static_cast<std::size_t>(question)];
  if (!std::isfinite(value)) throw bad_request("response must be a finite number");
  const bool categorical = kind_ == ModelKind::ordered_logit || model_->scale == ResponseScale::scaled;
  if (categorical && (value != std::round(value) || value < 1 || value > q.num_categories))
    throw bad_request("response to " + q.id + " must be a category in 1.." + std::to_string(q.num_categories));
}

double Session::response_for_update(int question, double value) const {
  if (model_->scale == ResponseScale::real) return value;
  return scale_category(static_cast<int>(value), model_->questions[static_cast<std::size_t>(question)].num_categories);
}

void Session::record_answer(int question, double value) {
  const Vector v = question_factors().row(question).transpose();
  if (kind_ == ModelKind::gaussian_pmf) {
    gaussian_ = posterior_update(gaussian_, v, response_for_update(question, value), model_->noise);
    return;
  }
  const auto& cuts = model_->ordlogit->cutpoints;
  info_->record(question, static_cast<int>(value), u_hat_, v, cuts[static_cast<std::size_t>(question)]);
  u_hat_ = ordlogit_map_estimate(ordlogit_prior_, info_->answered(), model_->ordlogit->V, cuts, &u_hat_);
  info_->rebase(u_hat_, model_->ordlogit->V, cuts);
  gaussian_.precision += model_->noise.alpha * v * v.transpose();
}

void Session::apply(const json& event) {
  const auto type = event.at("event").get<std::string>();
  if (type == "asked") {
    if (status_ != SessionStatus::active) throw conflict("session_closed", "session is " + std::string(to_string(status_)));
    if (pending_) throw conflict("pending_question", "a question is already pending");
    const int j = model_->question_index(event.at("question").get<std::string>());
    const auto rem = remaining();
    if (j < 0 || !std::binary_search(rem.begin(), rem.end(), j)) throw conflict("invalid_question", "question cannot be asked");
    pending_ = j;
  } else if (type == "answered" || type == "skipped") {
    if (status_ != SessionStatus::active) throw conflict("session_closed", "session is " + std::string(to_string(status_)));
    if (!pending_) throw conflict("no_pending_question", "no question has been served");
    const int j = *pending_;
    if (event.at("question").get<std::string>() != model_->questions[static_cast<std::size_t>(j)].id)
      throw conflict("out_of_order", "expected a response to " + model_->questions[static_cast<std::size_t>(j)].id);
    std::optional<double> value;
    if (type == "answered") {
      value = event.at("value").get<double>();
      check_value(j, *value);
      record_answer(j, *value);
    } else if (info_) {
      info_->consume(j);
    }
    asked_.push_back({j, value});
    pending_.reset();
    if (static_cast<int>(asked_.size()) == budget_) status_ = SessionStatus::completed;
  } else if (type == "ended") {
    if (status_ != SessionStatus::active) throw conflict("session_closed", "session is " + std::string(to_string(status_)));
    pending_.reset();
    status_ = event.value("abandoned", false) ? SessionStatus::abandoned : SessionStatus::completed;
  } else {
    throw bad_request("unknown event type: " + type);
  }
  events_.push_back(event);
}

NextResult Session::next() {
  NextResult out;
  out.budget = budget_;
  if (status_ == SessionStatus::active && !pending_) {
    const int j = choose();
    apply(json{{"event", "asked"}, {"question", model_->questions[static_cast<std::size_t>(j)].id}});
  }
  out.status = status_;
  out.step = static_cast<int>(asked_.size());
  if (pending_) {
    const auto& q = model_->questions[static_cast<std::size_t>(*pending_)];
    out.question = QuestionView{q.id, *pending_, q.text, q.labels, q.num_categories};
  }
  return out;
}

Progress Session::submit(std::string_view question_id, std::optional<double> value) {
  json event{{"event", value ? "answered" : "skipped"}, {"question", std::string(question_id)}};
  if (value) event["value"] = *value;
  apply(event);
  return progress();
}

Progress Session::end(bool abandoned) {
  apply(json{{"event", "ended"}, {"abandoned", abandoned}});
  return progress();
}

Progress Session::progress() const { return Progress{status_, static_cast<int>(asked_.size()), budget_}; }

GaussianBelief Session::belief() const {
  if (kind_ == ModelKind::gaussian_pmf) return gaussian_;
  return GaussianBelief{u_hat_, info_->precision()};
}

std::vector<QuestionPrediction> Session::predictions() const {
  const auto& m = *model_;
  std::vector<QuestionPrediction> out;
  std::map<int, std::optional<double>> known;
  for (const auto& a : asked_) known[a.question] = a.value;
  for (const auto& [name, value] : covariates_) known[m.question_index(name)] = value;

  for (int j = 0; j < static_cast<int>(m.num_questions()); ++j) {
    const auto& q = m.questions[static_cast<std::size_t>(j)];
    QuestionPrediction p;
    p.question_id = q.id;
    const auto it = known.find(j);
    if (it != known.end()) {
      p.asked = true;
      if (it->second) {
        p.value = *it->second;
        out.push_back(p);
        continue;
      }
      p.skipped = true;
    }
    if (kind_ == ModelKind::gaussian_pmf) {
      const auto r = predict_response(gaussian_, m.factors.V.row(j).transpose(), m.noise);
      if (m.scale == ResponseScale::scaled) {
        const double half = (q.num_categories - 1) / 2.0;
        p.value = 1.0 + (r.clamped + 1.0) * half;
        p.variance = r.variance * half * half;
      } else {
        p.value = r.mean;
        p.variance = r.variance;
      }
    } else {
      const Vector probs = category_probs(u_hat_.dot(m.ordlogit->V.row(j)), m.ordlogit->cutpoints[static_cast<std::size_t>(j)]);
      double mean = 0.0, second = 0.0;
      for (Eigen::Index c = 0; c < probs.size(); ++c) {
        const auto cat = static_cast<double>(c + 1);
        mean += cat * probs(c);
        second += cat * cat * probs(c);
      }
      p.value = mean;
      p.variance = std::max(second - mean * mean, 0.0);
    }
    out.push_back(p);
  }
  return out;
}

json Session::snapshot() const {
  const auto& created = events_.front();
  json asked = json::array();
  for (const auto& a : asked_) {
    json item{{"question", model_->questions[static_cast<std::size_t>(a.question)].id}};
    item["value"] = a.value ? json(*a.value) : json(nullptr);
    asked.push_back(item);
  }
  json j{{"session", id_},
         {"strategy", created.at("strategy")},
         {"model", asurvey::to_string(kind_)},
         {"budget", budget_},
         {"seed", seed_},
         {"covariates", created.at("covariates")},
         {"status", to_string(status_)},
         {"asked", asked},
         {"pending", pending_ ? json(model_->questions[static_cast<std::size_t>(*pending_)].id) : json(nullptr)},
         {"events", events_.size()}};
  const auto b = belief();
  j["belief"] = {{"mean", vector_json(b.mean)}, {"precision", matrix_json(b.precision)}};
  if (info_) {
    j["information"] = matrix_json(info_->accumulated());
    j["design_precision"] = matrix_json(gaussian_.precision);
  }
  return j;
}

// ------------------------------------------------------------------ service

std::filesystem::path event_log_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".events.jsonl");
}

std::filesystem::path snapshot_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".snapshot.json");
}

std::vector<json> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open event log " + path.string());
  std::vector<json> events;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) events.push_back(json::parse(line));
  return events;
}

SurveyService::SurveyService(std::shared_ptr<const SurveyModel> model, ServiceOptions options)
    : model_(std::move(model)), options_(std::move(options)), id_rng_(options_.id_seed ? *options_.id_seed : std::random_device{}()) {
  if (!model_) throw std::invalid_argument("service needs a model");
  model_->validate();
  if (!options_.persist_dir.empty()) std::filesystem::create_directories(options_.persist_dir);
}

std::string SurveyService::fresh_id() {
  std::lock_guard lock(id_mutex_);
  for (;;) {
    std::ostringstream id;
    id << std::hex << id_rng_();
    std::shared_lock map_lock(map_mutex_);
    if (!sessions_.count(id.str())) return id.str();
  }
}

std::shared_ptr<SurveyService::Entry> SurveyService::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "not_found", "unknown session " + id);
  return it->second;
}

void SurveyService::persist(Entry& entry) const {
  if (options_.persist_dir.empty()) return;
  const auto& events = entry.session.events();
  const auto& id = entry.session.id();
  if (entry.persisted < events.size()) {
    std::ofstream log(event_log_path(options_.persist_dir, id), std::ios::app);
    for (std::size_t e = entry.persisted; e < events.size(); ++e) log << events[e].dump() << '\n';
    log.flush();
    if (!log) throw std::runtime_error("failed to append to the event log of " + id);
    entry.persisted = events.size();
  }
  const auto target = snapshot_path(options_.persist_dir, id);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << entry.session.snapshot().dump() << '\n';
    if (!out) throw std::runtime_error("failed to write the snapshot of " + id);
  }
  std::filesystem::rename(tmp, target);
}

std::string SurveyService::create_session(const SessionRequest& request) {
  const std::string id = fresh_id();
  auto entry = std::make_shared<Entry>(Session(model_, id, request));
  std::lock_guard entry_lock(entry->mutex);
  {
    std::unique_lock lock(map_mutex_);
    sessions_.emplace(id, entry);
  }
  persist(*entry);
  return id;
}

NextResult SurveyService::next_question(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  auto out = entry->session.next();
  persist(*entry);
  return out;
}

Progress SurveyService::submit_response(const std::string& id, std::string_view question_id, std::optional<double> value) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  auto out = entry->session.submit(question_id, value);
  persist(*entry);
  return out;
}

Progress SurveyService::end_session(const std::string& id, bool abandoned) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  auto out = entry->session.end(abandoned);
  persist(*entry);
  return out;
}

std::vector<QuestionPrediction> SurveyService::predictions(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session.predictions();
}

json SurveyService::snapshot(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session.snapshot();
}

std::size_t SurveyService::size() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

std::size_t SurveyService::recover() {
  if (options_.persist_dir.empty()) return 0;
  std::size_t loaded = 0;
  const std::string suffix = ".events.jsonl";
  for (const auto& file : std::filesystem::directory_iterator(options_.persist_dir)) {
    const auto name = file.path().filename().string();
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    auto session = Session::replay(model_, read_event_log(file.path()));
    const auto id = session.id();
    auto entry = std::make_shared<Entry>(std::move(session));
    entry->persisted = entry->session.events().size();
    std::unique_lock lock(map_mutex_);
    if (sessions_.emplace(id, entry).second) ++loaded;
  }
  return loaded;
}

// ------------------------------------------------------------------ wire

json to_json(const NextResult& next) {
  json j{{"status", to_string(next.status)}, {"step", next.step}, {"budget", next.budget}, {"question", nullptr}};
  if (next.question) {
    const auto& q = *next.question;
    j["question"] = {{"id", q.id}, {"index", q.index}, {"text", q.text}, {"labels", q.labels}, {"num_categories", q.num_categories}};
  }
  return j;
}

json to_json(const Progress& progress) {
  return json{{"status", to_string(progress.status)}, {"asked", progress.asked}, {"budget", progress.budget}};
}

json to_json(const std::vector<QuestionPrediction>& predictions) {
  json out = json::array();
  for (const auto& p : predictions)
    out.push_back({{"question_id", p.question_id}, {"value", p.value}, {"variance", p.variance}, {"asked", p.asked}, {"skipped", p.skipped}});
  return out;
}

SessionRequest session_request_from_json(const json& body) {
  if (!body.is_object()) throw bad_request("request body must be a JSON object");
  SessionRequest r;
  try {
    r.strategy = body.value("strategy", r.strategy);
    if (!body.contains("budget")) throw bad_request("budget is required");
    r.budget = body.at("budget").get<int>();
    if (body.contains("model")) r.model = parse_model_kind(body.at("model").get<std::string>());
    r.seed = body.value("seed", std::uint64_t{0});
    if (body.contains("covariates"))
      for (const auto& [key, value] : body.at("covariates").items()) r.covariates[key] = value.get<double>();
  } catch (const json::exception& e) {
    throw bad_request(e.what());
  } catch (const std::invalid_argument& e) {
    throw bad_request(e.what());
  }
  return r;
}

}  // namespace asurvey::service
