#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "aiq/harness.hpp"
#include "aiq/service.hpp"
#include "fixtures.hpp"

using namespace aiq;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

HarnessConfig test_config(const std::filesystem::path& dir) {
  HarnessConfig c;
  c.data_dir = dir;
  c.bank_path = testing::data_path("sample_bank.json");
  c.registry_path = testing::data_path("subjects.json");
  return c;
}

// Waits until a background session has stopped asking questions.
Session settle(Harness& h, const std::string& id) {
  h.join_all();
  return h.live(id)->snapshot();
}

struct RunningService {
  explicit RunningService(Harness& h) : service(h) {
    port = service.bind("127.0.0.1", 0);
    thread = std::thread([this] { service.serve(); });
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    for (int i = 0; i < 100 && !client->Get("/sessions"); ++i) std::this_thread::sleep_for(10ms);
  }
  ~RunningService() {
    service.stop();
    thread.join();
  }
  Service service;
  int port = 0;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;
};

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("error codes map to HTTP statuses") {
    CHECK(http_status_for("unknown_session") == 404);
    CHECK(http_status_for("empty_cohort") == 404);
    CHECK(http_status_for("already_graded") == 409);
    CHECK(http_status_for("incomplete_session") == 409);
    CHECK(http_status_for("invalid_request") == 422);
    CHECK(http_status_for("io_error") == 500);
  }

  TEST_CASE("start, list, pending and grade through the handlers") {
    testing::TempDir dir;
    Harness h(test_config(dir.path()));
    Service svc(h);

    auto started = svc.start_session({{"subject_id", "oracle"}, {"seed", 3}, {"cohort", "lab"}});
    REQUIRE(started.status == 201);
    const std::string id = started.body["session_id"];
    settle(h, id);

    CHECK(svc.list_sessions().body["sessions"].size() == 1);
    auto detail = svc.get_session(id);
    CHECK(detail.status == 200);
    CHECK(detail.body["records"].size() == 60);

    auto pend = svc.pending(id);
    REQUIRE(pend.status == 200);
    REQUIRE(pend.body["pending"].size() > 0);
    const auto& first = pend.body["pending"][0];
    CHECK(first.contains("prompt"));
    CHECK(first.contains("rubric"));
    const std::string qid = first["question_id"];

    json grade = {{"request_id", "r1"}, {"question_id", qid}, {"verdict", "correct"}, {"grader_id", "g1"}};
    auto ok = svc.post_grade(id, grade);
    CHECK(ok.status == 200);
    CHECK(ok.body["record"]["points"] == 25);
    // Same request id: same answer, no second grading attempt.
    auto replay = svc.post_grade(id, grade);
    CHECK(replay.status == 200);
    CHECK(replay.body == ok.body);
    // New request id on a graded record is a conflict.
    grade["request_id"] = "r2";
    CHECK(svc.post_grade(id, grade).status == 409);

    CHECK(svc.post_grade(id, {{"question_id", qid}}).status == 422);
    CHECK(svc.post_grade(id, {{"request_id", "r3"}, {"question_id", qid}, {"verdict", "maybe"}, {"grader_id", "g"}})
              .status == 422);
    CHECK(svc.post_grade("ghost", {{"request_id", "r4"}, {"question_id", qid}, {"verdict", "correct"},
                                   {"grader_id", "g"}})
              .status == 404);
    CHECK(svc.get_session("ghost").status == 404);
    CHECK(svc.start_session({{"subject_id", "nobody"}, {"seed", 1}}).status == 404);
    CHECK(svc.start_session({{"seed", 1}}).status == 422);
    CHECK(svc.start_session({{"subject_id", "oracle"}, {"seed", 3}, {"cohort", "lab"}}).status == 409);
  }

  TEST_CASE("leaderboard lists unfinished sessions as excluded") {
    testing::TempDir dir;
    Harness h(test_config(dir.path()));
    Service svc(h);
    const Session a = h.run({"oracle", std::nullopt, 42, "lab", ""});
    for (const auto& r : a.records) {
      if (r.grade == Grade::pending) h.grade(a.session_id, r.question_id, Verdict::correct, "g");
    }
    const Session b = h.run({"blank", std::nullopt, 42, "lab", ""});
    auto lb = svc.leaderboard("lab");
    REQUIRE(lb.status == 200);
    CHECK(lb.body["count"] == 1);
    CHECK(lb.body["rows"][0]["subject_id"] == "oracle");
    CHECK(lb.body["excluded"].size() == 1);
    CHECK(lb.body["excluded"][0]["session_id"] == b.session_id);
    CHECK(svc.leaderboard("nobody").status == 404);
  }

  TEST_CASE("proctor flow over real HTTP") {
    testing::TempDir dir;
    Harness h(test_config(dir.path()));
    RunningService rs(h);
    auto& cli = *rs.client;

    auto res = cli.Post("/sessions", json{{"subject_id", "volunteer"}, {"seed", 2}, {"session_id", "vol"}, {"request_id", "s1"}}.dump(),
                        "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 201);
    auto again = cli.Post("/sessions", json{{"subject_id", "volunteer"}, {"seed", 2}, {"session_id", "vol"}, {"request_id", "s1"}}.dump(),
                          "application/json");
    REQUIRE(again);
    CHECK(again->status == 201);

    CHECK(cli.Get("/sessions/other/proctor/next")->status == 404);
    const auto& bank = h.bank();
    int answered = 0;
    for (int i = 0; i < 200 && answered < 60; ++i) {
      auto next = cli.Get("/sessions/vol/proctor/next");
      REQUIRE(next);
      if (next->status == 204) {
        std::this_thread::sleep_for(5ms);
        continue;
      }
      REQUIRE(next->status == 200);
      const auto q = json::parse(next->body);
      const std::string qid = q["question_id"];
      json body = {{"request_id", "a" + std::to_string(answered)}, {"question_id", qid}};
      if (q["modality"] == "image") {
        body["cannot_ask"] = true;
      } else {
        const auto& accepted = bank.at(qid).accepted_answers;
        body["answer"] = accepted.empty() ? "see sheet" : accepted.front();
      }
      auto ans = cli.Post("/sessions/vol/proctor/answer", body.dump(), "application/json");
      REQUIRE(ans);
      CHECK(ans->status == 200);
      if (answered == 0) {
        // A retry of the accepted answer replays; a fresh id for the same question is stale.
        CHECK(cli.Post("/sessions/vol/proctor/answer", body.dump(), "application/json")->status == 200);
        body["request_id"] = "late";
        CHECK(cli.Post("/sessions/vol/proctor/answer", body.dump(), "application/json")->status == 409);
      }
      ++answered;
    }
    CHECK(answered == 60);
    const Session s = settle(h, "vol");
    CHECK(s.records.size() == 60);

    auto pending = cli.Get("/sessions/vol/pending");
    REQUIRE(pending);
    CHECK(pending->status == 200);
    CHECK(cli.Post("/sessions/vol/grades", "{not json", "application/json")->status == 422);
    CHECK(cli.Get("/sessions/ghost")->status == 404);
    // Manual records are still pending, so nothing in the cohort is rankable yet.
    CHECK(cli.Get("/leaderboard/" + s.cohort)->status == 404);
    const auto err = json::parse(cli.Get("/sessions/ghost")->body);
    CHECK(err["error"] == "unknown_session");
  }
}
