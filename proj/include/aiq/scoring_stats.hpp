#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aiq/scale.hpp"
#include "aiq/session.hpp"

namespace aiq::stats {

struct ScoreVector {
  std::vector<double> scores;   // F_i in [0, 100]
  std::vector<double> weights;  // W_i, summing to 1

  std::size_t indicator_count() const noexcept { return scores.size(); }
  static ScoreVector from_session(const SubtestScoreVector& f, const IntelligenceScale& scale);
};

// Weighted sum of indicator scores. Throws aiq::Error("length_mismatch").
double absolute_iq(const ScoreVector& v);
double absolute_iq(std::span<const double> scores, std::span<const double> weights);

double cohort_mean(std::span<const double> values);
// Population form (divisor = count). Throws aiq::Error("empty_cohort").
double population_std_dev(std::span<const double> values);
// Same, with the cohort size stated by the caller; it must match.
double population_std_dev(std::span<const double> values, std::size_t count);

// 100 + (iq_a - mean) / s, and exactly 100 when s = 0.
double deviation_iq(double iq_a, double mean, double s);

struct CohortMember {
  std::string subject_id;
  std::string label;
  std::string region;
  double absolute_iq = 0.0;
  bool flagged = false;
};

struct CohortRow {
  std::size_t rank = 0;
  std::string subject_id;
  std::string label;
  std::string region;
  double absolute_iq = 0.0;
  double deviation_iq = 0.0;
  bool flagged = false;
};

struct CohortResult {
  std::vector<CohortRow> rows;  // rank order
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t count = 0;
};

// Ranks by absolute IQ, highest first; equal scores keep their input order.
CohortResult rank_cohort(const std::vector<CohortMember>& members);

// Scores every complete session, ordered by subject id before ranking.
// Throws on an incomplete session or on sessions scored under another scale.
CohortResult leaderboard(const std::vector<Session>& sessions, const IntelligenceScale& scale,
                         const std::function<CohortMember(const Session&)>& describe = {});

nlohmann::json cohort_to_json(const CohortResult& result);
std::string cohort_to_csv(const CohortResult& result);
std::string cohort_to_table(const CohortResult& result);

// One row of the published 53-subject leaderboard.
struct GoldenRow {
  std::size_t position = 0;
  std::string region;
  std::string country;
  std::string label;
  double absolute_iq = 0.0;
  double published_deviation_iq = 0.0;
};

std::vector<GoldenRow> load_golden_csv(const std::filesystem::path& path);
std::vector<GoldenRow> parse_golden_csv(const std::string& text);
std::vector<CohortMember> golden_members(const std::vector<GoldenRow>& rows);

}  // namespace aiq::stats
