#include "aiq/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "aiq/error.hpp"

namespace aiq {

namespace {

using nlohmann::json;

ServiceResponse error_response(const std::string& code, const std::string& message) {
  return {http_status_for(code), {{"error", code}, {"message", message}}};
}

ServiceResponse unprocessable(const std::string& message) { return error_response("invalid_request", message); }

std::string required_string(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key) || !body.at(key).is_string() ||
      body.at(key).get<std::string>().empty()) {
    throw Error("invalid_request", std::string("missing string field '") + key + "'");
  }
  return body.at(key).get<std::string>();
}

template <typename Fn>
ServiceResponse guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    return error_response(e.code(), e.what());
  } catch (const json::exception& e) {
    return unprocessable(e.what());
  } catch (const std::exception& e) {
    spdlog::error("request failed: {}", e.what());
    return {500, {{"error", "internal"}, {"message", e.what()}}};
  }
}

json proctor_question_json(const ProctorQuestion& q) {
  return {{"sequence", q.sequence},
          {"question_id", q.question_id},
          {"prompt", q.prompt},
          {"modality", to_string(q.modality)},
          {"attachments", q.attachments},
          {"issued_at_ms", q.issued_at_ms},
          {"deadline_ms", q.deadline_ms}};
}

}  // namespace

int http_status_for(const std::string& code) {
  if (code.rfind("unknown_", 0) == 0 || code == "empty_cohort" || code == "no_proctor") return 404;
  if (code == "already_graded" || code == "auto_graded" || code == "session_exists" ||
      code == "incomplete_session" || code == "mixed_scales" || code == "stale_question" ||
      code == "channel_closed" || code == "request_conflict") {
    return 409;
  }
  if (code.rfind("invalid_", 0) == 0) return 422;
  return 500;
}

Service::Service(Harness& harness) : harness_(harness), server_(std::make_unique<httplib::Server>()) {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    if (r.status != 204) res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req) -> std::optional<json> {
    try {
      return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::exception&) {
      return std::nullopt;
    }
  };
  auto with_body = [=](auto handler) {
    return [=](const httplib::Request& req, httplib::Response& res) {
      auto body = parse(req);
      reply(res, body ? handler(req, *body) : unprocessable("request body is not JSON"));
    };
  };

  server_->Get("/sessions", [=, this](const httplib::Request&, httplib::Response& res) {
    reply(res, list_sessions());
  });
  server_->Post("/sessions", with_body([this](const httplib::Request&, const json& body) {
    return start_session(body);
  }));
  server_->Get(R"(/sessions/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_session(req.matches[1]));
  });
  server_->Get(R"(/sessions/([^/]+)/pending)", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, pending(req.matches[1]));
  });
  server_->Post(R"(/sessions/([^/]+)/grades)", with_body([this](const httplib::Request& req, const json& body) {
    return post_grade(req.matches[1], body);
  }));
  server_->Get(R"(/sessions/([^/]+)/proctor/next)",
               [=, this](const httplib::Request& req, httplib::Response& res) {
                 reply(res, proctor_next(req.matches[1]));
               });
  server_->Post(R"(/sessions/([^/]+)/proctor/answer)",
                with_body([this](const httplib::Request& req, const json& body) {
                  return proctor_answer(req.matches[1], body);
                }));
  server_->Get(R"(/leaderboard/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, leaderboard(req.matches[1]));
  });
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error("io_error", "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw Error("io_error", fmt::format("cannot bind {}:{}", host, port));
  return port;
}

void Service::serve() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

template <typename Fn>
ServiceResponse Service::idempotent(const std::string& scope, const json& body, Fn&& fn) {
  std::string request_id;
  try {
    request_id = required_string(body, "request_id");
  } catch (const Error& e) {
    return unprocessable(e.what());
  }
  const std::string key = scope + "\n" + request_id;
  // Held across the handler so a retry racing its original waits for it.
  std::lock_guard lock(cache_mutex_);
  if (auto it = replies_.find(key); it != replies_.end()) return it->second;
  ServiceResponse r = guarded(std::forward<Fn>(fn));
  // Server faults are not remembered; the client may retry them.
  if (r.status < 500) replies_[key] = r;
  return r;
}

ServiceResponse Service::list_sessions() {
  return guarded([&] {
    json out = json::array();
    for (const auto& s : harness_.sessions()) out.push_back(session_summary_json(s));
    return ServiceResponse{200, {{"sessions", out}}};
  });
}

ServiceResponse Service::start_session(const json& body) {
  auto run = [&] {
    RunRequest req;
    req.subject_id = required_string(body, "subject_id");
    if (body.contains("paper")) req.paper = body.at("paper").get<std::string>();
    if (body.contains("seed")) req.seed = body.at("seed").get<std::uint64_t>();
    if (body.contains("cohort")) req.cohort = body.at("cohort").get<std::string>();
    if (body.contains("session_id")) req.session_id = body.at("session_id").get<std::string>();
    const std::string id = harness_.start(req);
    return ServiceResponse{201, {{"session_id", id}}};
  };
  if (body.is_object() && body.contains("request_id")) return idempotent("start", body, run);
  return guarded(run);
}

ServiceResponse Service::get_session(const std::string& session_id) {
  return guarded([&] { return ServiceResponse{200, session_detail_json(harness_.live(session_id)->snapshot())}; });
}

ServiceResponse Service::pending(const std::string& session_id) {
  return guarded([&] {
    const Session s = harness_.live(session_id)->snapshot();
    const QuestionBank& bank = harness_.bank();
    json items = json::array();
    for (const auto& r : s.records) {
      if (r.grade != Grade::pending || !r.outcome) continue;
      json j = record_to_json(r);
      if (bank.contains(r.question_id)) {
        const Question& q = bank.at(r.question_id);
        j["prompt"] = q.prompt;
        j["rubric"] = q.rubric;
        j["attachments"] = q.attachments;
      }
      items.push_back(std::move(j));
    }
    return ServiceResponse{200, {{"session_id", s.session_id}, {"status", to_string(s.status)}, {"pending", items}}};
  });
}

ServiceResponse Service::post_grade(const std::string& session_id, const json& body) {
  return idempotent("grade\n" + session_id, body, [&] {
    const std::string question_id = required_string(body, "question_id");
    const Verdict verdict = verdict_from_string(required_string(body, "verdict"));
    const std::string grader = required_string(body, "grader_id");
    const bool regrade = body.value("allow_regrade", false);
    const Session s = harness_.grade(session_id, question_id, verdict, grader, regrade);
    return ServiceResponse{200, {{"session", session_summary_json(s)}, {"record", record_to_json(*s.find(question_id))}}};
  });
}

ServiceResponse Service::proctor_next(const std::string& session_id) {
  return guarded([&] {
    auto ch = harness_.channel(session_id);
    if (!ch) throw Error("no_proctor", "session '" + session_id + "' has no proctor channel");
    if (auto q = ch->current()) return ServiceResponse{200, proctor_question_json(*q)};
    return ServiceResponse{204, nullptr};
  });
}

ServiceResponse Service::proctor_answer(const std::string& session_id, const json& body) {
  return idempotent("proctor\n" + session_id, body, [&] {
    auto ch = harness_.channel(session_id);
    if (!ch) throw Error("no_proctor", "session '" + session_id + "' has no proctor channel");
    const std::string question_id = required_string(body, "question_id");
    ProctorSubmit r;
    if (body.value("cannot_ask", false)) {
      r = ch->cannot_ask(question_id);
    } else {
      if (!body.contains("answer") || !body.at("answer").is_string()) {
        throw Error("invalid_request", "need 'answer' or 'cannot_ask'");
      }
      r = ch->submit_answer(question_id, body.at("answer").get<std::string>());
    }
    if (r == ProctorSubmit::stale) throw Error("stale_question", "'" + question_id + "' is not the question out");
    if (r == ProctorSubmit::closed) throw Error("channel_closed", "proctor channel is closed");
    return ServiceResponse{200, {{"accepted", true}, {"question_id", question_id}}};
  });
}

ServiceResponse Service::leaderboard(const std::string& cohort_id) {
  return guarded([&] {
    std::vector<Session> complete;
    json excluded = json::array();
    for (auto& s : harness_.cohort(cohort_id)) {
      if (s.status == SessionStatus::complete) {
        complete.push_back(std::move(s));
      } else {
        excluded.push_back({{"session_id", s.session_id}, {"status", to_string(s.status)}});
      }
    }
    if (complete.empty()) throw Error("empty_cohort", "no complete sessions in cohort '" + cohort_id + "'");
    json out = stats::cohort_to_json(
        stats::leaderboard(complete, harness_.scale(), [&](const Session& s) { return harness_.describe(s); }));
    out["cohort"] = cohort_id;
    out["excluded"] = excluded;
    return ServiceResponse{200, out};
  });
}

}  // namespace aiq
