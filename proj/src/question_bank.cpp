#include "aiq/question_bank.hpp"

#include <fstream>
#include <limits>
#include <random>
#include <set>

#include <fmt/format.h>

namespace aiq {

std::string_view to_string(GradingMode g) noexcept {
  switch (g) {
    case GradingMode::auto_contains: return "auto_contains";
    case GradingMode::auto_numeric: return "auto_numeric";
    case GradingMode::manual: return "manual";
  }
  return "manual";
}

GradingMode grading_mode_from_string(std::string_view name) {
  for (GradingMode g : {GradingMode::auto_contains, GradingMode::auto_numeric, GradingMode::manual}) {
    if (to_string(g) == name) return g;
  }
  throw Error("invalid_grading", "unknown grading mode '" + std::string(name) + "'");
}

namespace {

std::string summarize(const std::vector<BankProblem>& problems) {
  std::string msg = fmt::format("question bank rejected ({} problem{})", problems.size(),
                                problems.size() == 1 ? "" : "s");
  for (const auto& p : problems) msg += fmt::format("\n  {}: {}", p.question_id, p.reason);
  return msg;
}

}  // namespace

BankError::BankError(std::vector<BankProblem> problems)
    : Error("invalid_bank", summarize(problems)), problems_(std::move(problems)) {}

const Question& QuestionBank::at(const std::string& question_id) const {
  auto it = index_.find(question_id);
  if (it == index_.end()) throw Error("unknown_question", "no question '" + question_id + "' in bank");
  return questions_[it->second];
}

const std::vector<std::string>& QuestionBank::subtest_questions(const std::string& subtest_id) const {
  static const std::vector<std::string> empty;
  auto it = by_subtest_.find(subtest_id);
  return it == by_subtest_.end() ? empty : it->second;
}

QuestionBank build_bank(std::string scale_id, std::vector<Question> questions,
                        const IntelligenceScale& scale) {
  std::vector<BankProblem> problems;
  if (scale_id != scale.scale_id) {
    problems.push_back({"<bank>", "scale_id '" + scale_id + "' does not match active scale '" +
                                      scale.scale_id + "'"});
  }

  QuestionBank bank;
  bank.scale_id_ = std::move(scale_id);
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const Question& q = questions[i];
    const std::string qid = q.id.empty() ? fmt::format("<index {}>", i) : q.id;
    if (q.id.empty()) problems.push_back({qid, "missing id"});
    if (!q.id.empty() && !bank.index_.emplace(q.id, i).second) {
      problems.push_back({qid, "duplicate id"});
    }
    if (!scale.find(q.subtest_id)) {
      problems.push_back({qid, "unknown subtest_id '" + q.subtest_id + "'"});
    }
    if (q.prompt.empty()) problems.push_back({qid, "empty prompt"});
    if (is_auto(q.grading) && q.accepted_answers.empty()) {
      problems.push_back({qid, "auto-graded question has no accepted answers"});
    }
    if (q.grading == GradingMode::manual) {
      if (q.rubric.empty()) problems.push_back({qid, "manual question has no rubric"});
      if (!q.accepted_answers.empty()) {
        problems.push_back({qid, "manual question must not list accepted answers"});
      }
    }
    bank.by_subtest_[q.subtest_id].push_back(q.id);
  }

  bool conforming = true;
  for (const auto& s : scale.subtests) {
    const std::size_t n = bank.subtest_questions(s.id).size();
    if (n < kQuestionsPerSubtest) {
      problems.push_back({s.id, fmt::format("insufficient questions ({} < {})", n, kQuestionsPerSubtest)});
    }
    if (n != kCanonicalBankPerSubtest) conforming = false;
  }
  if (!problems.empty()) throw BankError(std::move(problems));

  bank.questions_ = std::move(questions);
  bank.conforming_ = conforming;
  return bank;
}

nlohmann::json question_to_json(const Question& q) {
  nlohmann::json j = {{"id", q.id},
                      {"subtest_id", q.subtest_id},
                      {"prompt", q.prompt},
                      {"prompt_modality", to_string(q.prompt_modality)},
                      {"grading", to_string(q.grading)},
                      {"accepted_answers", q.accepted_answers},
                      {"rubric", q.rubric}};
  if (!q.attachments.empty()) j["attachments"] = q.attachments;
  return j;
}

Question question_from_json(const nlohmann::json& j) {
  Question q;
  q.id = j.at("id").get<std::string>();
  q.subtest_id = j.at("subtest_id").get<std::string>();
  q.prompt = j.at("prompt").get<std::string>();
  q.prompt_modality = modality_from_string(j.value("prompt_modality", "text"));
  q.grading = grading_mode_from_string(j.at("grading").get<std::string>());
  q.accepted_answers = j.value("accepted_answers", std::vector<std::string>{});
  q.rubric = j.value("rubric", "");
  q.attachments = j.value("attachments", std::vector<std::string>{});
  return q;
}

nlohmann::json bank_to_json(const QuestionBank& bank) {
  nlohmann::json doc = {{"scale_id", bank.scale_id()}, {"questions", nlohmann::json::array()}};
  for (const auto& q : bank.questions()) doc["questions"].push_back(question_to_json(q));
  return doc;
}

QuestionBank load_bank(const nlohmann::json& document, const IntelligenceScale& scale) {
  if (!document.is_object() || !document.contains("questions") || !document["questions"].is_array()) {
    throw BankError(std::vector<BankProblem>{{"<bank>", "document must be an object with a 'questions' array"}});
  }
  std::vector<Question> questions;
  std::vector<BankProblem> problems;
  std::size_t index = 0;
  for (const auto& item : document["questions"]) {
    try {
      questions.push_back(question_from_json(item));
    } catch (const std::exception& e) {
      std::string id = item.is_object() && item.contains("id") && item["id"].is_string()
                           ? item["id"].get<std::string>()
                           : fmt::format("<index {}>", index);
      problems.push_back({id, std::string("malformed question: ") + e.what()});
    }
    ++index;
  }
  if (!problems.empty()) throw BankError(std::move(problems));
  return build_bank(document.value("scale_id", ""), std::move(questions), scale);
}

QuestionBank load_bank_file(const std::filesystem::path& path, const IntelligenceScale& scale) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open bank file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw BankError(std::vector<BankProblem>{{"<bank>", std::string("parse failure: ") + e.what()}});
  }
  return load_bank(doc, scale);
}

namespace {

// Unbiased draw in [0, bound) from a generator whose output sequence is fixed
// by the standard, so papers are identical across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::uint32_t fnv1a32(std::string_view s, std::uint32_t h = 2166136261u) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

}  // namespace

TestPaper sample_paper(const QuestionBank& bank, const IntelligenceScale& scale, std::uint64_t seed) {
  TestPaper paper;
  paper.seed = seed;
  paper.scale_id = scale.scale_id;
  std::mt19937_64 rng(seed);
  std::uint32_t digest = fnv1a32(scale.scale_id);
  for (const auto& subtest : scale.subtests) {
    std::vector<std::string> pool = bank.subtest_questions(subtest.id);
    if (pool.size() < kQuestionsPerSubtest) {
      throw Error("insufficient_questions", "sub-test '" + subtest.id + "' has fewer than 4 questions");
    }
    for (std::size_t i = 0; i < kQuestionsPerSubtest; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(bounded(rng, pool.size() - i));
      std::swap(pool[i], pool[j]);
      paper.entries.push_back(pool[i]);
    }
    for (const auto& id : bank.subtest_questions(subtest.id)) digest = fnv1a32(id, digest);
  }
  paper.paper_id = fmt::format("paper-{}-{:08x}", seed, digest);
  return paper;
}

nlohmann::json paper_to_json(const TestPaper& paper) {
  return {{"paper_id", paper.paper_id},
          {"seed", paper.seed},
          {"scale_id", paper.scale_id},
          {"entries", paper.entries}};
}

TestPaper paper_from_json(const nlohmann::json& j) {
  try {
    TestPaper p;
    p.paper_id = j.at("paper_id").get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.scale_id = j.value("scale_id", std::string(kDefaultScaleId));
    p.entries = j.at("entries").get<std::vector<std::string>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_paper", std::string("malformed paper document: ") + e.what());
  }
}

}  // namespace aiq
