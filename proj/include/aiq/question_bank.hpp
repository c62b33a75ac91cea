#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aiq/error.hpp"
#include "aiq/modality.hpp"
#include "aiq/scale.hpp"

namespace aiq {

enum class GradingMode { auto_contains, auto_numeric, manual };

std::string_view to_string(GradingMode g) noexcept;
GradingMode grading_mode_from_string(std::string_view name);
inline bool is_auto(GradingMode g) noexcept { return g != GradingMode::manual; }

struct Question {
  std::string id;
  std::string subtest_id;
  std::string prompt;
  Modality prompt_modality = Modality::text;
  GradingMode grading = GradingMode::auto_contains;
  std::vector<std::string> accepted_answers;
  std::string rubric;
  // Paths relative to the bank file (audio for read-aloud prompts, images).
  std::vector<std::string> attachments;

  friend bool operator==(const Question&, const Question&) = default;
};

// Each problem names the offending question (or sub-test) and the reason.
struct BankProblem {
  std::string question_id;
  std::string reason;
};

class BankError : public Error {
 public:
  explicit BankError(std::vector<BankProblem> problems);
  const std::vector<BankProblem>& problems() const noexcept { return problems_; }

 private:
  std::vector<BankProblem> problems_;
};

inline constexpr std::size_t kQuestionsPerSubtest = 4;
inline constexpr std::size_t kCanonicalBankPerSubtest = 40;

class QuestionBank {
 public:
  const std::string& scale_id() const noexcept { return scale_id_; }
  const std::vector<Question>& questions() const noexcept { return questions_; }
  const Question& at(const std::string& question_id) const;
  bool contains(const std::string& question_id) const { return index_.contains(question_id); }
  // Question ids of one sub-test in bank order.
  const std::vector<std::string>& subtest_questions(const std::string& subtest_id) const;
  const std::map<std::string, std::vector<std::string>>& by_subtest() const noexcept { return by_subtest_; }
  // True for the canonical shape: 40 questions in every sub-test of the scale.
  bool conforming() const noexcept { return conforming_; }

  friend QuestionBank build_bank(std::string scale_id, std::vector<Question> questions,
                                 const IntelligenceScale& scale);

 private:
  std::string scale_id_;
  std::vector<Question> questions_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::string>> by_subtest_;
  bool conforming_ = false;
};

// Validates and indexes questions. Throws BankError listing every problem.
QuestionBank build_bank(std::string scale_id, std::vector<Question> questions,
                        const IntelligenceScale& scale);

QuestionBank load_bank(const nlohmann::json& document, const IntelligenceScale& scale);
QuestionBank load_bank_file(const std::filesystem::path& path, const IntelligenceScale& scale);

nlohmann::json question_to_json(const Question& q);
Question question_from_json(const nlohmann::json& j);
nlohmann::json bank_to_json(const QuestionBank& bank);

struct TestPaper {
  std::string paper_id;
  std::uint64_t seed = 0;
  std::string scale_id;
  std::vector<std::string> entries;

  friend bool operator==(const TestPaper&, const TestPaper&) = default;
};

// Four distinct questions per sub-test by a seeded shuffle without
// replacement; entries follow the scale's sub-test order.
TestPaper sample_paper(const QuestionBank& bank, const IntelligenceScale& scale, std::uint64_t seed);

nlohmann::json paper_to_json(const TestPaper& paper);
TestPaper paper_from_json(const nlohmann::json& j);

}  // namespace aiq
