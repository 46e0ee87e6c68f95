#include "asurvey/service.hpp"

#include <httplib.h>

namespace asurvey::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, json{{"code", code}, {"message", message}});
}

template <class Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.http_status(), e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "bad_json", e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

}  // namespace

void register_routes(httplib::Server& server, SurveyService& service) {
  server.Get("/healthz", guarded([&service](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, json{{"status", "ok"}, {"sessions", service.size()}, {"questions", service.model().num_questions()}});
             }));

  server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto request = session_request_from_json(parse_body(req));
                const auto id = service.create_session(request);
                json body = to_json(Progress{SessionStatus::active, 0, request.budget});
                body["session_id"] = id;
                send_json(res, 201, body);
              }));

  server.Get(R"(/sessions/([A-Za-z0-9_-]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service.snapshot(req.matches[1]));
             }));

  server.Get(R"(/sessions/([A-Za-z0-9_-]+)/next)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, to_json(service.next_question(req.matches[1])));
             }));

  server.Post(R"(/sessions/([A-Za-z0-9_-]+)/responses)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                if (!body.is_object() || !body.contains("question_id") || !body.at("question_id").is_string())
                  throw ServiceError(400, "bad_request", "question_id is required");
                const bool skip = body.value("skip", false);
                std::optional<double> value;
                if (!skip) {
                  if (!body.contains("value") || !body.at("value").is_number())
                    throw ServiceError(400, "bad_request", "a numeric value or skip=true is required");
                  value = body.at("value").get<double>();
                }
                send_json(res, 200, to_json(service.submit_response(req.matches[1], body.at("question_id").get<std::string>(), value)));
              }));

  server.Post(R"(/sessions/([A-Za-z0-9_-]+)/end)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                send_json(res, 200, to_json(service.end_session(req.matches[1], body.value("abandoned", false))));
              }));

  server.Get(R"(/sessions/([A-Za-z0-9_-]+)/predictions)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               send_json(res, 200, json{{"session_id", id}, {"predictions", to_json(service.predictions(id))}});
             }));
}

}  // namespace asurvey::service
