#pragma once

// Shared test helpers and independent oracles. Nothing here calls into the
// code under test for the values it checks.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "aiq/question_bank.hpp"
#include "aiq/scale.hpp"
#include "aiq/session.hpp"
#include "aiq/subjects.hpp"

namespace aiq::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(AIQ_DATA_SOURCE_DIR) / name;
}

inline const QuestionBank& sample_bank() {
  static const QuestionBank bank = load_bank_file(data_path("sample_bank.json"), default_scale());
  return bank;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "aiq") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

// Weights of the published scale in whole percent, written out by hand.
inline const std::map<std::string, int>& published_weight_percent() {
  static const std::map<std::string, int> w = {
      {"acquire.words", 3},         {"acquire.sound", 3},        {"acquire.image", 4},
      {"master.general_knowledge", 6}, {"master.translation", 3}, {"master.calculation", 6},
      {"innovate.arrangement", 5},  {"innovate.association", 12}, {"innovate.creation", 12},
      {"innovate.speculation", 12}, {"innovate.selection", 12},  {"innovate.finding_laws", 12},
      {"feedback.word", 3},         {"feedback.sound", 3},       {"feedback.image", 4},
  };
  return w;
}

// Absolute IQ by hand: 25 points per correct answer, weighted in percent.
inline double oracle_absolute_iq(const std::map<std::string, int>& correct_per_subtest) {
  long long hundredths = 0;  // exact: points * percent
  for (const auto& [id, pct] : published_weight_percent()) {
    auto it = correct_per_subtest.find(id);
    const int correct = it == correct_per_subtest.end() ? 0 : it->second;
    hundredths += 25LL * correct * pct;
  }
  return static_cast<double>(hundredths) / 100.0;
}

// Direct two-pass summation, population form.
struct OracleMoments {
  double mean = 0.0;
  double s = 0.0;
};

inline OracleMoments oracle_moments(const std::vector<double>& xs) {
  long double sum = 0;
  for (double x : xs) sum += x;
  const long double mean = sum / static_cast<long double>(xs.size());
  long double sq = 0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(sq / static_cast<long double>(xs.size())))};
}

inline double oracle_deviation(double x, const OracleMoments& m) {
  return m.s == 0.0 ? 100.0 : 100.0 + (x - m.mean) / m.s;
}

inline SubjectDescriptor descriptor(const std::string& id, ModalitySet in = {Modality::text, Modality::sound, Modality::image},
                                    ModalitySet out = {Modality::text, Modality::sound, Modality::image}) {
  SubjectDescriptor d;
  d.subject_id = id;
  d.display_name = id;
  d.kind = SubjectKind::scripted;
  d.input_modalities = std::move(in);
  d.output_modalities = std::move(out);
  d.label = id;
  return d;
}

// A first accepted answer for every auto question, free text for manual ones.
inline std::shared_ptr<ScriptedSubject> answer_key_subject(const std::string& id, bool correct) {
  auto s = std::make_shared<ScriptedSubject>(descriptor(id), std::map<std::string, ScriptedReply>{});
  for (const auto& q : sample_bank().questions()) {
    std::string reply = "zzz no idea";
    if (correct && !q.accepted_answers.empty()) reply = q.accepted_answers.front();
    if (correct && q.accepted_answers.empty()) reply = "a considered answer";
    s->set_reply_for_question(q.id, {{reply}, std::chrono::milliseconds(0)});
  }
  return s;
}

// Grades every pending manual record with a verdict chosen per question.
template <typename Fn>
void grade_all_pending(Session& s, Fn&& verdict_for, EventSink* sink = nullptr) {
  std::vector<std::string> pending;
  for (const auto& r : s.records) {
    if (r.grade == Grade::pending) pending.push_back(r.question_id);
  }
  for (const auto& qid : pending) submit_manual_grade(s, qid, verdict_for(qid), "tester", false, sink);
}

}  // namespace aiq::testing
