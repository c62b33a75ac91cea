#pragma once

// JSON-over-HTTP front end for graders and proctors.
//
//   GET  /sessions                         summaries of every session
//   POST /sessions                         {subject_id, paper?|seed?, cohort?, session_id?}
//   GET  /sessions/{id}                    one session with its records
//   GET  /sessions/{id}/pending            manual records awaiting a verdict
//   POST /sessions/{id}/grades             {request_id, question_id, verdict, grader_id}
//   GET  /sessions/{id}/proctor/next       the question currently out (204 if none)
//   POST /sessions/{id}/proctor/answer     {request_id, question_id, answer | cannot_ask}
//   GET  /leaderboard/{cohort}             ranked complete sessions
//
// Errors come back as {"error": code, "message": text} with 404 for unknown
// ids, 409 for state conflicts and 422 for malformed requests. A POST that
// repeats a request_id gets the first response again without side effects.

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "aiq/harness.hpp"

namespace httplib {
class Server;
}

namespace aiq {

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

int http_status_for(const std::string& error_code);

class Service {
 public:
  explicit Service(Harness& harness);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); blocks.
  void serve();
  void stop();

  // Handlers, callable without a socket.
  ServiceResponse list_sessions();
  ServiceResponse start_session(const nlohmann::json& body);
  ServiceResponse get_session(const std::string& session_id);
  ServiceResponse pending(const std::string& session_id);
  ServiceResponse post_grade(const std::string& session_id, const nlohmann::json& body);
  ServiceResponse proctor_next(const std::string& session_id);
  ServiceResponse proctor_answer(const std::string& session_id, const nlohmann::json& body);
  ServiceResponse leaderboard(const std::string& cohort_id);

 private:
  template <typename Fn>
  ServiceResponse idempotent(const std::string& scope, const nlohmann::json& body, Fn&& fn);

  Harness& harness_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex cache_mutex_;
  std::map<std::string, ServiceResponse> replies_;  // scope + request_id
};

}  // namespace aiq
