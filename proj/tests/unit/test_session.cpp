#include <doctest.h>

#include <thread>

#include "aiq/error.hpp"
#include "aiq/session.hpp"
#include "fixtures.hpp"

using namespace aiq;
using namespace std::chrono_literals;
using aiq::testing::sample_bank;

namespace {

TestPaper whole_bank_paper() { return sample_paper(sample_bank(), default_scale(), 1); }

struct MemorySink : EventSink {
  std::vector<StoreEvent> events;
  void append(const StoreEvent& ev) override { events.push_back(ev); }
};

QuestionRecord delivered_record(const Question& q, std::vector<std::string> items) {
  QuestionRecord r;
  r.question_id = q.id;
  r.grading = q.grading;
  ResponseOutcome o;
  o.status = ResponseStatus::delivered;
  o.items = std::move(items);
  r.outcome = o;
  r.evaluated_item = r.outcome->items.front();
  return r;
}

}  // namespace

TEST_SUITE("session") {
  TEST_CASE("all-correct scripted subject completes with full points") {
    auto s = testing::answer_key_subject("key", true);
    MemorySink sink;
    Session session = run_session(s, whole_bank_paper(), sample_bank(), default_scale(), {}, &sink);
    CHECK(session.status == SessionStatus::awaiting_grades);
    testing::grade_all_pending(session, [](const std::string&) { return Verdict::correct; }, &sink);
    CHECK(session.status == SessionStatus::complete);
    for (const auto& r : session.records) CHECK(r.points == 25);
    const auto f = subtest_scores(session, default_scale());
    for (int v : f.scores) CHECK(v == 100);
    CHECK(replay(sink.events) == session);
  }

  TEST_CASE("subject without image input scores zero on image questions") {
    auto s = std::make_shared<ScriptedSubject>(testing::descriptor("blind", {Modality::text, Modality::sound}),
                                               std::map<std::string, ScriptedReply>{});
    for (const auto& q : sample_bank().questions()) {
      if (!q.accepted_answers.empty()) s->set_reply_for_question(q.id, {{q.accepted_answers.front()}, 0ms});
    }
    Session session = run_session(s, whole_bank_paper(), sample_bank(), default_scale());
    for (const char* id : {"ai-01", "ai-02", "ai-03", "ai-04"}) {
      const auto* r = session.find(id);
      REQUIRE(r);
      CHECK(r->outcome->status == ResponseStatus::input_rejected);
      CHECK(r->grade == Grade::incorrect);
      CHECK(r->points == 0);
    }
  }

  TEST_CASE("pending manual question keeps the session awaiting grades") {
    auto s = testing::answer_key_subject("key", true);
    Session session = run_session(s, whole_bank_paper(), sample_bank(), default_scale());
    CHECK(session.status == SessionStatus::awaiting_grades);
    CHECK(session.pending_count() > 0);
    CHECK_THROWS_AS(subtest_scores(session, default_scale()), Error);
  }

  TEST_CASE("auto grading follows the first item") {
    const Question& q = sample_bank().at("as-01");
    CHECK(auto_grade(delivered_record(q, {"nine plus twelve is 21."}), q) == Grade::correct);
    CHECK(auto_grade(delivered_record(q, {"Twenty-one"}), q) == Grade::correct);
    CHECK(auto_grade(delivered_record(q, {"it is 20"}), q) == Grade::incorrect);
    const Question& nile = sample_bank().at("mg-01");
    CHECK(auto_grade(delivered_record(nile, {"Amazon", "The Nile"}), nile) == Grade::incorrect);
    CHECK(auto_grade(delivered_record(nile, {"The NILE."}), nile) == Grade::correct);

    QuestionRecord late;
    late.outcome = ResponseOutcome{ResponseStatus::timed_out, {}, 181'000, ""};
    CHECK(auto_grade(late, nile) == Grade::incorrect);
  }

  TEST_CASE("manual grading rules") {
    auto s = testing::answer_key_subject("key", true);
    Session session = run_session(s, whole_bank_paper(), sample_bank(), default_scale());

    submit_manual_grade(session, "ic-01", Verdict::correct, "grader-1");
    const auto* r = session.find("ic-01");
    CHECK(r->points == 25);
    CHECK(r->grade_source == GradeSource::manual);
    CHECK(r->grader_id == "grader-1");

    auto code_of = [&](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return std::string("none");
    };
    CHECK(code_of([&] { submit_manual_grade(session, "ic-01", Verdict::incorrect, "g"); }) == "already_graded");
    CHECK(code_of([&] { submit_manual_grade(session, "mg-01", Verdict::incorrect, "g"); }) == "auto_graded");
    CHECK(code_of([&] { submit_manual_grade(session, "zz-99", Verdict::incorrect, "g"); }) == "unknown_record");

    submit_manual_grade(session, "ic-01", Verdict::incorrect, "grader-2", true);
    CHECK(session.find("ic-01")->points == 0);
    CHECK(session.find("ic-01")->grader_id == "grader-2");
  }

  TEST_CASE("last pending verdict completes the session") {
    auto s = testing::answer_key_subject("key", false);
    Session session = run_session(s, whole_bank_paper(), sample_bank(), default_scale());
    std::vector<std::string> pending;
    for (const auto& r : session.records) {
      if (r.grade == Grade::pending) pending.push_back(r.question_id);
    }
    REQUIRE(pending.size() > 1);
    for (std::size_t i = 0; i + 1 < pending.size(); ++i) {
      submit_manual_grade(session, pending[i], Verdict::incorrect, "g");
      CHECK(session.status == SessionStatus::awaiting_grades);
    }
    submit_manual_grade(session, pending.back(), Verdict::correct, "g");
    CHECK(session.status == SessionStatus::complete);
  }

  TEST_CASE("sub-test scores count 25 per correct answer") {
    auto s = std::make_shared<ScriptedSubject>(testing::descriptor("partial"), std::map<std::string, ScriptedReply>{},
                                               ScriptedReply{{"wrong"}, 0ms});
    // Two of four right in calculation, four of four in general knowledge.
    for (const char* id : {"mc-01", "mc-02"}) {
      s->set_reply_for_question(id, {{sample_bank().at(id).accepted_answers.front()}, 0ms});
    }
    for (const auto& qid : sample_bank().subtest_questions("master.general_knowledge")) {
      s->set_reply_for_question(qid, {{sample_bank().at(qid).accepted_answers.front()}, 0ms});
    }
    Session session = run_session(s, whole_bank_paper(), sample_bank(), default_scale());
    testing::grade_all_pending(session, [](const std::string&) { return Verdict::incorrect; });
    const auto f = subtest_scores(session, default_scale());
    CHECK(f.at("master.calculation") == 50);
    CHECK(f.at("master.general_knowledge") == 100);
    CHECK(f.at("innovate.creation") == 0);
  }

  TEST_CASE("transport errors are graded incorrect and flagged") {
    class Broken : public Subject {
     public:
      Broken() : Subject(testing::descriptor("broken")) {}

     protected:
      ResponseOutcome respond(const Question&, milliseconds) override {
        return {ResponseStatus::transport_error, {}, 5, "connection reset"};
      }
    };
    Session session = run_session(std::make_shared<Broken>(), whole_bank_paper(), sample_bank(), default_scale());
    CHECK(session.status == SessionStatus::complete);
    CHECK(session.flagged());
    for (const auto& r : session.records) {
      CHECK(r.flagged);
      CHECK(r.grade == Grade::incorrect);
    }
  }

  TEST_CASE("events that do not fit are rejected") {
    auto s = testing::answer_key_subject("key", true);
    MemorySink sink;
    run_session(s, whole_bank_paper(), sample_bank(), default_scale(), {}, &sink);
    auto events = sink.events;

    auto gap = events;
    gap[3].sequence += 1;
    CHECK_THROWS_AS(replay(gap), Error);

    auto bad_points = events;
    for (auto& ev : bad_points) {
      if (ev.kind == EventKind::graded) {
        ev.payload["points"] = 10;
        break;
      }
    }
    CHECK_THROWS_AS(replay(bad_points), Error);

    auto twice = events;
    twice.insert(twice.begin() + 1, events[0]);
    for (std::size_t i = 0; i < twice.size(); ++i) twice[i].sequence = i + 1;
    CHECK_THROWS_AS(replay(twice), Error);
  }

  TEST_CASE("concurrent graders on a live session keep a gap-free log") {
    auto s = testing::answer_key_subject("key", true);
    MemorySink sink;
    LiveSession live;
    run_session(live, s, whole_bank_paper(), sample_bank(), default_scale(), {}, &sink);
    std::vector<std::string> pending;
    for (const auto& r : live.snapshot().records) {
      if (r.grade == Grade::pending) pending.push_back(r.question_id);
    }
    std::vector<std::thread> graders;
    for (const auto& qid : pending) {
      graders.emplace_back([&, qid] {
        live.mutate([&](Session& session) { submit_manual_grade(session, qid, Verdict::correct, "g", false, &sink); });
      });
    }
    for (auto& t : graders) t.join();
    const Session done = live.snapshot();
    CHECK(done.status == SessionStatus::complete);
    for (std::size_t i = 0; i < sink.events.size(); ++i) CHECK(sink.events[i].sequence == i + 1);
    CHECK(replay(sink.events) == done);
  }
}
