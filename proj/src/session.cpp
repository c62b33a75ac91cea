#include "aiq/session.hpp"

#include <chrono>

#include <fmt/format.h>

#include "aiq/answer_matching.hpp"
#include "aiq/error.hpp"

namespace aiq {

std::string_view to_string(Grade g) noexcept {
  switch (g) {
    case Grade::pending: return "pending";
    case Grade::correct: return "correct";
    case Grade::incorrect: return "incorrect";
  }
  return "pending";
}

std::string_view to_string(GradeSource s) noexcept {
  return s == GradeSource::manual ? "manual" : "auto";
}

std::string_view to_string(SessionStatus s) noexcept {
  switch (s) {
    case SessionStatus::running: return "running";
    case SessionStatus::awaiting_grades: return "awaiting_grades";
    case SessionStatus::complete: return "complete";
  }
  return "running";
}

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::dispatched: return "dispatched";
    case EventKind::outcome: return "outcome";
    case EventKind::graded: return "graded";
    case EventKind::completed: return "completed";
  }
  return "dispatched";
}

Grade grade_from_string(std::string_view name) {
  for (Grade g : {Grade::pending, Grade::correct, Grade::incorrect}) {
    if (to_string(g) == name) return g;
  }
  throw Error("invalid_grade", "unknown grade '" + std::string(name) + "'");
}

GradeSource grade_source_from_string(std::string_view name) {
  if (name == "auto") return GradeSource::automatic;
  if (name == "manual") return GradeSource::manual;
  throw Error("invalid_grade_source", "unknown grade source '" + std::string(name) + "'");
}

EventKind event_kind_from_string(std::string_view name) {
  for (EventKind k : {EventKind::dispatched, EventKind::outcome, EventKind::graded, EventKind::completed}) {
    if (to_string(k) == name) return k;
  }
  throw Error("invalid_event", "unknown event kind '" + std::string(name) + "'");
}

Verdict verdict_from_string(std::string_view name) {
  if (name == "correct") return Verdict::correct;
  if (name == "incorrect") return Verdict::incorrect;
  throw Error("invalid_verdict", "verdict must be 'correct' or 'incorrect', got '" + std::string(name) + "'");
}

const QuestionRecord* Session::find(const std::string& question_id) const {
  for (const auto& r : records) {
    if (r.question_id == question_id) return &r;
  }
  return nullptr;
}

QuestionRecord* Session::find(const std::string& question_id) {
  return const_cast<QuestionRecord*>(std::as_const(*this).find(question_id));
}

std::size_t Session::pending_count() const {
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.outcome && r.grade == Grade::pending) ++n;
  }
  return n;
}

bool Session::flagged() const {
  for (const auto& r : records) {
    if (r.flagged) return true;
  }
  return false;
}

// --- events ---------------------------------------------------------------------

nlohmann::json event_to_json(const StoreEvent& ev) {
  return {{"seq", ev.sequence},
          {"session_id", ev.session_id},
          {"kind", to_string(ev.kind)},
          {"at_ms", ev.at_ms},
          {"payload", ev.payload}};
}

StoreEvent event_from_json(const nlohmann::json& j) {
  try {
    StoreEvent ev;
    ev.sequence = j.at("seq").get<std::uint64_t>();
    ev.session_id = j.at("session_id").get<std::string>();
    ev.kind = event_kind_from_string(j.at("kind").get<std::string>());
    ev.at_ms = j.at("at_ms").get<std::int64_t>();
    ev.payload = j.at("payload");
    return ev;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_event", std::string("malformed event: ") + e.what());
  }
}

namespace {

[[noreturn]] void reject(const StoreEvent& ev, const std::string& why) {
  throw Error("invalid_event", fmt::format("event {} ({}): {}", ev.sequence, to_string(ev.kind), why));
}

void refresh_status(Session& s) {
  if (s.status == SessionStatus::complete) return;
  std::size_t answered = 0;
  for (const auto& r : s.records) {
    if (r.outcome) ++answered;
  }
  s.status = answered == s.paper_size && s.pending_count() > 0 ? SessionStatus::awaiting_grades
                                                               : SessionStatus::running;
}

ResponseOutcome outcome_from_json(const nlohmann::json& p) {
  ResponseOutcome o;
  o.status = response_status_from_string(p.at("status").get<std::string>());
  o.items = p.value("items", std::vector<std::string>{});
  o.latency_ms = p.value("latency_ms", std::int64_t{0});
  o.diagnostic = p.value("diagnostic", "");
  return o;
}

nlohmann::json outcome_to_json(const std::string& question_id, const ResponseOutcome& o) {
  return {{"question_id", question_id},
          {"status", to_string(o.status)},
          {"items", o.items},
          {"latency_ms", o.latency_ms},
          {"diagnostic", o.diagnostic}};
}

}  // namespace

void apply_event(Session& s, const StoreEvent& ev) {
  if (ev.sequence != s.last_sequence + 1) {
    reject(ev, fmt::format("expected sequence {}", s.last_sequence + 1));
  }
  if (s.last_sequence > 0 && ev.session_id != s.session_id) reject(ev, "belongs to another session");
  if (s.status == SessionStatus::complete && ev.kind != EventKind::graded) {
    reject(ev, "session already complete");
  }

  try {
    const auto& p = ev.payload;
    switch (ev.kind) {
      case EventKind::dispatched: {
        const std::string qid = p.at("question_id").get<std::string>();
        if (s.records.empty()) {
          s.session_id = ev.session_id;
          s.subject_id = p.at("subject_id").get<std::string>();
          s.paper_id = p.at("paper_id").get<std::string>();
          s.cohort = p.value("cohort", s.paper_id);
          s.scale_id = p.value("scale_id", std::string(kDefaultScaleId));
          s.paper_size = p.at("paper_size").get<std::size_t>();
          s.started_at_ms = ev.at_ms;
        }
        if (s.find(qid)) reject(ev, "question '" + qid + "' dispatched twice");
        if (s.records.size() >= s.paper_size) reject(ev, "more dispatches than paper entries");
        if (!s.records.empty() && !s.records.back().outcome) reject(ev, "previous question still out");
        QuestionRecord r;
        r.question_id = qid;
        r.subtest_id = p.at("subtest_id").get<std::string>();
        r.grading = grading_mode_from_string(p.at("grading").get<std::string>());
        s.records.push_back(std::move(r));
        break;
      }
      case EventKind::outcome: {
        QuestionRecord* r = s.find(p.at("question_id").get<std::string>());
        if (!r) reject(ev, "outcome for undispatched question");
        if (r->outcome) reject(ev, "outcome recorded twice");
        ResponseOutcome o = outcome_from_json(p);
        if ((o.status == ResponseStatus::delivered) == o.items.empty()) {
          reject(ev, "items must be non-empty exactly when delivered");
        }
        if (o.status == ResponseStatus::delivered) r->evaluated_item = o.items.front();
        r->outcome = std::move(o);
        break;
      }
      case EventKind::graded: {
        QuestionRecord* r = s.find(p.at("question_id").get<std::string>());
        if (!r) reject(ev, "grade for unknown question");
        if (!r->outcome) reject(ev, "grade before outcome");
        const Grade g = grade_from_string(p.at("grade").get<std::string>());
        const int points = p.at("points").get<int>();
        if (g == Grade::pending) reject(ev, "grade event cannot set pending");
        if (points != 0 && points != kPointsPerCorrect) reject(ev, fmt::format("points {} not in {{0, 25}}", points));
        if ((points == kPointsPerCorrect) != (g == Grade::correct)) reject(ev, "points disagree with grade");
        r->grade = g;
        r->points = points;
        r->grade_source = grade_source_from_string(p.at("source").get<std::string>());
        r->grader_id = p.value("grader_id", "");
        r->flagged = p.value("flagged", false);
        break;
      }
      case EventKind::completed:
        if (s.records.size() != s.paper_size || s.pending_count() > 0) {
          reject(ev, "completion before every record is graded");
        }
        for (const auto& r : s.records) {
          if (!r.outcome) reject(ev, "completion with a question still out");
        }
        s.status = SessionStatus::complete;
        s.finished_at_ms = ev.at_ms;
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    reject(ev, std::string("malformed payload: ") + e.what());
  }
  s.last_sequence = ev.sequence;
  refresh_status(s);
}

Session replay(const std::vector<StoreEvent>& events) {
  Session s;
  for (const auto& ev : events) apply_event(s, ev);
  return s;
}

// --- administering ----------------------------------------------------------------

namespace {

std::int64_t system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class Recorder {
 public:
  Recorder(Session& session, EventSink* sink, std::function<std::int64_t()> clock)
      : session_(session), sink_(sink), clock_(clock ? std::move(clock) : system_now_ms) {}

  void emit(EventKind kind, nlohmann::json payload) {
    StoreEvent ev;
    ev.sequence = session_.last_sequence + 1;
    ev.session_id = session_.session_id;
    ev.kind = kind;
    ev.at_ms = clock_();
    ev.payload = std::move(payload);
    apply_event(session_, ev);
    // Applied first so a rejected event never reaches the log.
    if (sink_) sink_->append(ev);
  }

  void grade(const QuestionRecord& r, Grade g, GradeSource source, const std::string& grader, bool flagged) {
    emit(EventKind::graded, {{"question_id", r.question_id},
                             {"grade", to_string(g)},
                             {"points", g == Grade::correct ? kPointsPerCorrect : 0},
                             {"source", to_string(source)},
                             {"grader_id", grader},
                             {"flagged", flagged}});
  }

 private:
  Session& session_;
  EventSink* sink_;
  std::function<std::int64_t()> clock_;
};

}  // namespace

Grade auto_grade(const QuestionRecord& record, const Question& question) {
  if (!record.outcome || record.outcome->status != ResponseStatus::delivered || !record.evaluated_item) {
    return Grade::incorrect;
  }
  const std::string& item = *record.evaluated_item;
  if (question.grading == GradingMode::auto_numeric) {
    const auto mentioned = text::extract_numbers(item);
    for (const auto& accepted : question.accepted_answers) {
      if (auto value = text::parse_number(accepted)) {
        for (double m : mentioned) {
          if (std::abs(m - *value) < 1e-9) return Grade::correct;
        }
      } else if (text::contains_normalized(item, accepted)) {
        return Grade::correct;
      }
    }
    return Grade::incorrect;
  }
  for (const auto& accepted : question.accepted_answers) {
    if (text::contains_normalized(item, accepted)) return Grade::correct;
  }
  return Grade::incorrect;
}

void run_session(LiveSession& live, const std::shared_ptr<Subject>& subject, const TestPaper& paper,
                 const QuestionBank& bank, const IntelligenceScale& scale, const SessionOptions& options,
                 EventSink* sink) {
  if (paper.scale_id != scale.scale_id) {
    throw Error("scale_mismatch", "paper was sampled for scale '" + paper.scale_id + "'");
  }
  for (const auto& qid : paper.entries) {
    if (!bank.contains(qid)) throw Error("unknown_question", "paper references '" + qid + "' not in bank");
  }
  const std::string& subject_id = subject->descriptor().subject_id;
  live.mutate([&](Session& s) {
    if (s.session_id.empty()) {
      s.session_id = options.session_id.empty() ? subject_id + "@" + paper.paper_id : options.session_id;
    }
  });

  for (const auto& qid : paper.entries) {
    const Question& q = bank.at(qid);
    live.mutate([&](Session& s) {
      Recorder(s, sink, options.clock)
          .emit(EventKind::dispatched, {{"question_id", qid},
                                        {"subtest_id", q.subtest_id},
                                        {"grading", to_string(q.grading)},
                                        {"subject_id", subject_id},
                                        {"paper_id", paper.paper_id},
                                        {"cohort", options.cohort.empty() ? paper.paper_id : options.cohort},
                                        {"scale_id", scale.scale_id},
                                        {"paper_size", paper.entries.size()}});
    });

    const ResponseOutcome outcome = ask(subject, q, options.timeout);

    live.mutate([&](Session& s) {
      Recorder rec(s, sink, options.clock);
      rec.emit(EventKind::outcome, outcome_to_json(qid, outcome));
      const QuestionRecord& r = *s.find(qid);
      if (outcome.status == ResponseStatus::transport_error) {
        rec.grade(r, Grade::incorrect, GradeSource::automatic, "", true);
      } else if (is_auto(q.grading) || outcome.status != ResponseStatus::delivered) {
        rec.grade(r, auto_grade(r, q), GradeSource::automatic, "", false);
      }
    });
  }
  live.mutate([&](Session& s) { finalize_if_ready(s, sink, options.clock); });
}

Session run_session(const std::shared_ptr<Subject>& subject, const TestPaper& paper,
                    const QuestionBank& bank, const IntelligenceScale& scale,
                    const SessionOptions& options, EventSink* sink) {
  LiveSession live;
  run_session(live, subject, paper, bank, scale, options, sink);
  return live.snapshot();
}

bool finalize_if_ready(Session& session, EventSink* sink, std::function<std::int64_t()> clock) {
  if (session.status == SessionStatus::complete || session.records.size() != session.paper_size ||
      session.records.empty() || session.pending_count() > 0) {
    return false;
  }
  for (const auto& r : session.records) {
    if (!r.outcome) return false;
  }
  Recorder(session, sink, std::move(clock)).emit(EventKind::completed, nlohmann::json::object());
  return true;
}

void submit_manual_grade(Session& session, const std::string& question_id, Verdict verdict,
                         const std::string& grader_id, bool allow_regrade, EventSink* sink,
                         std::function<std::int64_t()> clock) {
  const QuestionRecord* r = session.find(question_id);
  if (!r || !r->outcome) {
    throw Error("unknown_record", "no answered record '" + question_id + "' in session " + session.session_id);
  }
  if (is_auto(r->grading) || (r->grade != Grade::pending && r->grade_source == GradeSource::automatic)) {
    throw Error("auto_graded", "record '" + question_id + "' is graded automatically");
  }
  if (r->grade != Grade::pending && !allow_regrade) {
    throw Error("already_graded", "record '" + question_id + "' already graded");
  }
  Recorder rec(session, sink, clock);
  rec.grade(*r, verdict == Verdict::correct ? Grade::correct : Grade::incorrect, GradeSource::manual,
            grader_id, false);
  finalize_if_ready(session, sink, std::move(clock));
}

int SubtestScoreVector::at(const std::string& subtest_id) const {
  for (std::size_t i = 0; i < subtest_ids.size(); ++i) {
    if (subtest_ids[i] == subtest_id) return scores[i];
  }
  throw Error("unknown_subtest", "no score for sub-test '" + subtest_id + "'");
}

std::vector<double> SubtestScoreVector::as_doubles() const {
  return {scores.begin(), scores.end()};
}

SubtestScoreVector subtest_scores(const Session& session, const IntelligenceScale& scale) {
  if (session.status != SessionStatus::complete) {
    throw Error("incomplete_session", "session " + session.session_id + " is " +
                                          std::string(to_string(session.status)));
  }
  if (session.scale_id != scale.scale_id) {
    throw Error("scale_mismatch", "session scored on '" + session.scale_id + "'");
  }
  SubtestScoreVector v;
  for (const auto& s : scale.subtests) {
    int correct = 0;
    for (const auto& r : session.records) {
      if (r.subtest_id == s.id && r.grade == Grade::correct) ++correct;
    }
    v.subtest_ids.push_back(s.id);
    v.scores.push_back(kPointsPerCorrect * correct);
  }
  return v;
}

nlohmann::json session_summary_json(const Session& s) {
  return {{"session_id", s.session_id},
          {"subject_id", s.subject_id},
          {"paper_id", s.paper_id},
          {"cohort", s.cohort},
          {"status", to_string(s.status)},
          {"questions", s.paper_size},
          {"answered", std::count_if(s.records.begin(), s.records.end(), [](const auto& r) { return r.outcome.has_value(); })},
          {"pending", s.pending_count()},
          {"flagged", s.flagged()},
          {"started_at_ms", s.started_at_ms},
          {"finished_at_ms", s.finished_at_ms}};
}

nlohmann::json record_to_json(const QuestionRecord& r) {
  nlohmann::json j = {{"question_id", r.question_id},
                      {"subtest_id", r.subtest_id},
                      {"grading", to_string(r.grading)},
                      {"grade", to_string(r.grade)},
                      {"grade_source", to_string(r.grade_source)},
                      {"grader_id", r.grader_id},
                      {"points", r.points},
                      {"flagged", r.flagged}};
  if (r.outcome) {
    j["status"] = to_string(r.outcome->status);
    j["items"] = r.outcome->items;
    j["latency_ms"] = r.outcome->latency_ms;
    j["diagnostic"] = r.outcome->diagnostic;
  }
  j["evaluated_item"] = r.evaluated_item ? nlohmann::json(*r.evaluated_item) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json session_detail_json(const Session& s) {
  nlohmann::json j = session_summary_json(s);
  j["records"] = nlohmann::json::array();
  for (const auto& r : s.records) j["records"].push_back(record_to_json(r));
  return j;
}

}  // namespace aiq
