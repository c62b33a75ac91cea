#pragma once

// One subject's sitting of a test paper. The session is event sourced: every
// state change is a StoreEvent applied through apply_event(), and the same
// events are what the store persists, so a replayed log rebuilds exactly the
// in-memory session.

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aiq/question_bank.hpp"
#include "aiq/scale.hpp"
#include "aiq/subjects.hpp"

namespace aiq {

enum class Grade { pending, correct, incorrect };
enum class GradeSource { automatic, manual };
enum class SessionStatus { running, awaiting_grades, complete };
enum class EventKind { dispatched, outcome, graded, completed };

std::string_view to_string(Grade g) noexcept;
std::string_view to_string(GradeSource s) noexcept;
std::string_view to_string(SessionStatus s) noexcept;
std::string_view to_string(EventKind k) noexcept;
Grade grade_from_string(std::string_view name);
GradeSource grade_source_from_string(std::string_view name);
EventKind event_kind_from_string(std::string_view name);

inline constexpr int kPointsPerCorrect = 25;

struct QuestionRecord {
  std::string question_id;
  std::string subtest_id;
  GradingMode grading = GradingMode::auto_contains;
  std::optional<ResponseOutcome> outcome;  // absent while the question is out
  std::optional<std::string> evaluated_item;
  Grade grade = Grade::pending;
  GradeSource grade_source = GradeSource::automatic;
  std::string grader_id;
  int points = 0;
  // Set when a transport failure, not the subject, decided the grade.
  bool flagged = false;

  friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

struct Session {
  std::string session_id;
  std::string subject_id;
  std::string paper_id;
  std::string cohort;
  std::string scale_id;
  std::int64_t started_at_ms = 0;
  std::int64_t finished_at_ms = 0;
  std::size_t paper_size = 0;
  std::vector<QuestionRecord> records;
  SessionStatus status = SessionStatus::running;
  std::uint64_t last_sequence = 0;

  const QuestionRecord* find(const std::string& question_id) const;
  QuestionRecord* find(const std::string& question_id);
  std::size_t pending_count() const;
  bool flagged() const;

  friend bool operator==(const Session&, const Session&) = default;
};

struct StoreEvent {
  std::uint64_t sequence = 0;
  std::string session_id;
  EventKind kind = EventKind::dispatched;
  std::int64_t at_ms = 0;
  nlohmann::json payload;
};

nlohmann::json event_to_json(const StoreEvent& ev);
StoreEvent event_from_json(const nlohmann::json& j);

// Applies one event; throws aiq::Error("invalid_event") if the event does not
// fit the session (wrong sequence, unknown record, points outside {0, 25}).
void apply_event(Session& session, const StoreEvent& ev);
Session replay(const std::vector<StoreEvent>& events);

class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void append(const StoreEvent& ev) = 0;
};

struct SessionOptions {
  milliseconds timeout = kDefaultTimeout;
  bool allow_regrade = false;
  std::string session_id;  // defaults to "<subject>@<paper>"
  std::string cohort;      // defaults to the paper id
  std::function<std::int64_t()> clock;  // epoch ms; system clock when empty
};

// A session shared between the thread administering it and concurrent
// graders. Every mutation happens under one lock, so event sequence numbers
// stay gap-free whichever side writes.
class LiveSession {
 public:
  LiveSession() = default;
  explicit LiveSession(Session initial) : session_(std::move(initial)) {}

  template <typename Fn>
  decltype(auto) mutate(Fn&& fn) {
    std::lock_guard lock(mutex_);
    return std::forward<Fn>(fn)(session_);
  }
  Session snapshot() const {
    std::lock_guard lock(mutex_);
    return session_;
  }

 private:
  mutable std::mutex mutex_;
  Session session_;
};

// Administers the paper in order, one question at a time. Auto-gradable
// records are graded at once; manual ones stay pending. The subject is asked
// outside the session lock.
void run_session(LiveSession& live, const std::shared_ptr<Subject>& subject, const TestPaper& paper,
                 const QuestionBank& bank, const IntelligenceScale& scale,
                 const SessionOptions& options = {}, EventSink* sink = nullptr);

Session run_session(const std::shared_ptr<Subject>& subject, const TestPaper& paper,
                    const QuestionBank& bank, const IntelligenceScale& scale,
                    const SessionOptions& options = {}, EventSink* sink = nullptr);

Grade auto_grade(const QuestionRecord& record, const Question& question);

enum class Verdict { correct, incorrect };
Verdict verdict_from_string(std::string_view name);

// Records a human verdict on a pending record. Throws aiq::Error with code
// "unknown_record", "auto_graded" or "already_graded".
void submit_manual_grade(Session& session, const std::string& question_id, Verdict verdict,
                         const std::string& grader_id, bool allow_regrade = false,
                         EventSink* sink = nullptr, std::function<std::int64_t()> clock = {});

// Appends the completion event if every record is answered and graded but the
// log stops short of it (e.g. after a crash).
bool finalize_if_ready(Session& session, EventSink* sink = nullptr,
                       std::function<std::int64_t()> clock = {});

struct SubtestScoreVector {
  std::vector<std::string> subtest_ids;  // scale order
  std::vector<int> scores;               // F_i in {0, 25, 50, 75, 100}

  int at(const std::string& subtest_id) const;
  std::vector<double> as_doubles() const;
  friend bool operator==(const SubtestScoreVector&, const SubtestScoreVector&) = default;
};

// Throws aiq::Error("incomplete_session") unless the session is complete.
SubtestScoreVector subtest_scores(const Session& session, const IntelligenceScale& scale);

nlohmann::json session_summary_json(const Session& session);
nlohmann::json record_to_json(const QuestionRecord& record);
// Summary plus every record.
nlohmann::json session_detail_json(const Session& session);

}  // namespace aiq
