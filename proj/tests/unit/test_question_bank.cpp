#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "aiq/question_bank.hpp"
#include "fixtures.hpp"

using namespace aiq;
using aiq::testing::sample_bank;

namespace {

std::vector<Question> synthetic_questions(std::size_t per_subtest) {
  std::vector<Question> qs;
  for (const auto& s : default_scale().subtests) {
    for (std::size_t i = 0; i < per_subtest; ++i) {
      Question q;
      q.id = s.id + "#" + std::to_string(i);
      q.subtest_id = s.id;
      q.prompt = "prompt " + q.id;
      q.prompt_modality = s.expected_modality;
      q.accepted_answers = {"answer"};
      qs.push_back(q);
    }
  }
  return qs;
}

bool has_problem(const BankError& e, const std::string& id, const std::string& fragment) {
  return std::any_of(e.problems().begin(), e.problems().end(), [&](const BankProblem& p) {
    return p.question_id == id && p.reason.find(fragment) != std::string::npos;
  });
}

}  // namespace

TEST_SUITE("question_bank") {
  TEST_CASE("shipped sample bank loads and is not conforming") {
    const auto& bank = sample_bank();
    CHECK(bank.questions().size() == 60);
    CHECK_FALSE(bank.conforming());
    for (const auto& s : default_scale().subtests) CHECK(bank.subtest_questions(s.id).size() == 4);
  }

  TEST_CASE("sample bank carries the published example questions") {
    const auto& bank = sample_bank();
    CHECK(bank.at("as-01").prompt == "What is nine plus twelve?");
    CHECK(bank.at("as-01").prompt_modality == Modality::sound);
    CHECK(bank.at("as-01").grading == GradingMode::auto_numeric);
    CHECK(bank.at("mg-01").prompt == "Which river is the longest in the world?");
    CHECK(bank.at("ic-01").grading == GradingMode::manual);
    CHECK(bank.at("fi-01").prompt == "please draw a rectangle in any size");
    CHECK(bank.at("fi-01").grading == GradingMode::manual);
  }

  TEST_CASE("a 40-per-subtest bank is conforming") {
    const auto bank = build_bank("aiq-2014", synthetic_questions(40), default_scale());
    CHECK(bank.questions().size() == 600);
    CHECK(bank.conforming());
  }

  TEST_CASE("three questions in a sub-test is an error naming the sub-test") {
    auto qs = synthetic_questions(4);
    std::erase_if(qs, [](const Question& q) { return q.id == "master.translation#3"; });
    try {
      build_bank("aiq-2014", qs, default_scale());
      FAIL("expected BankError");
    } catch (const BankError& e) {
      CHECK(has_problem(e, "master.translation", "insufficient questions"));
    }
  }

  TEST_CASE("every problem is reported with its question id") {
    auto qs = synthetic_questions(4);
    qs[1].id = qs[0].id;          // duplicate
    qs[5].subtest_id = "bogus";   // unknown sub-test
    qs[9].accepted_answers.clear();  // auto without answers
    qs[13].grading = GradingMode::manual;  // manual with answers, no rubric
    try {
      build_bank("aiq-2014", qs, default_scale());
      FAIL("expected BankError");
    } catch (const BankError& e) {
      CHECK(e.code() == "invalid_bank");
      CHECK(has_problem(e, qs[0].id, "duplicate"));
      CHECK(has_problem(e, qs[5].id, "unknown"));
      CHECK(has_problem(e, qs[9].id, "answer"));
      CHECK(has_problem(e, qs[13].id, "rubric"));
    }
  }

  TEST_CASE("parse failure is a bank error") {
    testing::TempDir dir;
    const auto path = dir.path() / "broken.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_bank_file(path, default_scale()), BankError);
  }

  TEST_CASE("bank json round trip") {
    const auto doc = bank_to_json(sample_bank());
    const auto again = load_bank(doc, default_scale());
    CHECK(again.questions() == sample_bank().questions());
  }

  TEST_CASE("four per sub-test gives the whole bank for any seed") {
    const auto& bank = sample_bank();
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 987654321ULL}) {
      const auto paper = sample_paper(bank, default_scale(), seed);
      std::set<std::string> ids(paper.entries.begin(), paper.entries.end());
      CHECK(ids.size() == 60);
    }
  }

  TEST_CASE("papers follow scale order, are deterministic and stratified") {
    const auto bank = build_bank("aiq-2014", synthetic_questions(40), default_scale());
    const auto scale = default_scale();
    const auto a = sample_paper(bank, scale, 42);
    const auto b = sample_paper(bank, scale, 42);
    CHECK(a == b);
    REQUIRE(a.entries.size() == 60);
    for (std::size_t i = 0; i < 15; ++i) {
      std::set<std::string> block;
      for (std::size_t j = 0; j < 4; ++j) {
        const auto& q = bank.at(a.entries[i * 4 + j]);
        CHECK(q.subtest_id == scale.subtests[i].id);
        block.insert(q.id);
      }
      CHECK(block.size() == 4);
    }
    CHECK(a.paper_id.rfind("paper-42-", 0) == 0);
    CHECK(sample_paper(bank, scale, 43).entries != a.entries);
  }

  TEST_CASE("paper json round trip") {
    const auto paper = sample_paper(sample_bank(), default_scale(), 9);
    CHECK(paper_from_json(paper_to_json(paper)) == paper);
  }

  TEST_CASE("selection frequencies are roughly uniform") {
    // Statistical sanity check: 8 questions per sub-test, count how often each
    // is chosen for one sub-test across many seeds; chi-square with 7 degrees
    // of freedom should sit far below 30 (p < 1e-4 territory).
    const auto bank = build_bank("aiq-2014", synthetic_questions(8), default_scale());
    const auto scale = default_scale();
    std::map<std::string, int> counts;
    const int trials = 4000;
    for (int seed = 0; seed < trials; ++seed) {
      const auto paper = sample_paper(bank, scale, static_cast<std::uint64_t>(seed));
      for (std::size_t j = 0; j < 4; ++j) ++counts[paper.entries[j]];
    }
    REQUIRE(counts.size() == 8);
    const double expected = trials * 4.0 / 8.0;
    double chi2 = 0.0;
    for (const auto& [id, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
    CHECK(chi2 < 30.0);
  }
}
