#include <doctest.h>

#include <thread>

#include "aiq/error.hpp"
#include "aiq/harness.hpp"
#include "fixtures.hpp"

using namespace aiq;
using namespace std::chrono_literals;

namespace {

HarnessConfig test_config(const std::filesystem::path& dir) {
  HarnessConfig c;
  c.data_dir = dir;
  c.bank_path = testing::data_path("sample_bank.json");
  c.registry_path = testing::data_path("subjects.json");
  return c;
}

std::string error_code(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

void grade_everything(Harness& h, const Session& s, Verdict v) {
  for (const auto& r : s.records) {
    if (r.grade == Grade::pending) h.grade(s.session_id, r.question_id, v, "tester");
  }
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config fills paths from the data directory") {
    const auto c = HarnessConfig::from_json({{"data_dir", "/tmp/x"}, {"timeout_ms", 5000}, {"seed_policy", "per_subject"}});
    CHECK(c.bank_path == std::filesystem::path("/tmp/x/bank.json"));
    CHECK(c.registry_path == std::filesystem::path("/tmp/x/subjects.json"));
    CHECK(c.timeout == 5000ms);
    CHECK(c.seed_policy == SeedPolicy::per_subject);
    CHECK(error_code([] { HarnessConfig::from_json({{"timeout_ms", 0}}); }) == "invalid_config");
    CHECK(error_code([] { HarnessConfig::from_json({{"seed_policy", "random"}}); }) == "invalid_config");
    CHECK(HarnessConfig::from_json(c.to_json()).to_json() == c.to_json());
  }

  TEST_CASE("seed policy") {
    testing::TempDir dir;
    auto c = test_config(dir.path());
    Harness shared(c);
    CHECK(shared.seed_for("a") == 42);
    CHECK(shared.seed_for("b") == 42);
    c.seed_policy = SeedPolicy::per_subject;
    Harness own(c);
    CHECK(own.seed_for("a") != own.seed_for("b"));
    CHECK(own.seed_for("a") == own.seed_for("a"));
  }

  TEST_CASE("run, grade, reload from disk") {
    testing::TempDir dir;
    std::string id;
    SubtestScoreVector before;
    {
      Harness h(test_config(dir.path()));
      const Session s = h.run({"oracle", std::nullopt, 7, "c1", ""});
      id = s.session_id;
      CHECK(s.status == SessionStatus::awaiting_grades);
      CHECK(s.cohort == "c1");
      CHECK(id == "oracle@" + s.paper_id);
      grade_everything(h, s, Verdict::correct);
      const Session done = h.live(id)->snapshot();
      CHECK(done.status == SessionStatus::complete);
      before = subtest_scores(done, h.scale());
      CHECK(error_code([&] { h.run({"oracle", std::nullopt, 7, "c1", ""}); }) == "session_exists");
    }
    Harness again(test_config(dir.path()));
    const Session reloaded = again.live(id)->snapshot();
    CHECK(subtest_scores(reloaded, again.scale()) == before);
    CHECK(error_code([&] { again.grade(id, "ic-01", Verdict::incorrect, "x"); }) == "already_graded");
  }

  TEST_CASE("papers are saved and reused by id") {
    testing::TempDir dir;
    Harness h(test_config(dir.path()));
    const auto paper = h.sample(5);
    const auto path = h.save_paper(paper);
    CHECK(std::filesystem::exists(path));
    CHECK(h.load_paper(paper.paper_id) == paper);
    CHECK(h.load_paper(path.string()) == paper);
    CHECK(error_code([&] { h.load_paper("nope"); }) == "unknown_paper");
    const Session s = h.run({"blank", paper.paper_id, std::nullopt, "", "blank-run"});
    CHECK(s.paper_id == paper.paper_id);
    CHECK(s.cohort == paper.paper_id);
  }

  TEST_CASE("unknown subject") {
    testing::TempDir dir;
    Harness h(test_config(dir.path()));
    CHECK(error_code([&] { h.run({"nobody", std::nullopt, 1, "", ""}); }) == "unknown_subject");
    CHECK(error_code([&] { h.live("ghost"); }) == "unknown_session");
  }

  TEST_CASE("cohort leaderboard from the shipped subjects") {
    testing::TempDir dir;
    Harness h(test_config(dir.path()));
    for (const char* who : {"oracle", "blank", "text-machine"}) {
      const Session s = h.run({who, std::nullopt, 42, "lab", ""});
      grade_everything(h, s, std::string(who) == "oracle" ? Verdict::correct : Verdict::incorrect);
    }
    const auto r = h.leaderboard("lab");
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].subject_id == "oracle");
    CHECK(r.rows[0].absolute_iq == doctest::Approx(100.0));
    CHECK(r.rows[2].subject_id == "blank");
    CHECK(r.rows[2].absolute_iq == 0.0);
    CHECK(h.cohort("lab").size() == 3);
    CHECK(error_code([&] { h.leaderboard("nobody"); }) == "empty_cohort");
  }

  TEST_CASE("unfinished sessions block a strict leaderboard only") {
    testing::TempDir dir;
    Harness h(test_config(dir.path()));
    const Session a = h.run({"oracle", std::nullopt, 42, "lab", ""});
    grade_everything(h, a, Verdict::correct);
    h.run({"blank", std::nullopt, 42, "lab", ""});
    CHECK(error_code([&] { h.leaderboard("lab"); }) == "incomplete_session");
    CHECK(h.leaderboard("lab", true).rows.size() == 1);
  }

  TEST_CASE("human subject is driven through its channel in the background") {
    testing::TempDir dir;
    Harness h(test_config(dir.path()));
    const std::string id = h.start({"volunteer", std::nullopt, 1, "", "vol"});
    auto ch = h.channel(id);
    REQUIRE(ch);
    const auto& bank = h.bank();
    for (int i = 0; i < 60; ++i) {
      auto q = ch->wait_for_question(5s);
      REQUIRE(q);
      const Question& question = bank.at(q->question_id);
      const std::string answer = question.accepted_answers.empty() ? "see sheet" : question.accepted_answers.front();
      CHECK(ch->submit_answer(q->question_id, answer) == ProctorSubmit::accepted);
    }
    h.join_all();
    const Session s = h.live(id)->snapshot();
    CHECK(s.records.size() == 60);
    CHECK(s.status == SessionStatus::awaiting_grades);
    for (const auto& r : s.records) CHECK(r.grade != Grade::incorrect);
  }
}
