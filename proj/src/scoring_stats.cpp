#include "aiq/scoring_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "aiq/cohort_kernels.hpp"
#include "aiq/error.hpp"

namespace aiq::stats {

ScoreVector ScoreVector::from_session(const SubtestScoreVector& f, const IntelligenceScale& scale) {
  ScoreVector v;
  for (const auto& s : scale.subtests) {
    v.scores.push_back(static_cast<double>(f.at(s.id)));
    v.weights.push_back(s.weight.to_double());
  }
  return v;
}

double absolute_iq(std::span<const double> scores, std::span<const double> weights) {
  if (scores.size() != weights.size() || scores.empty()) {
    throw Error("length_mismatch", fmt::format("{} scores against {} weights", scores.size(), weights.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) acc += scores[i] * weights[i];
  return acc;
}

double absolute_iq(const ScoreVector& v) { return absolute_iq(v.scores, v.weights); }

double cohort_mean(std::span<const double> values) { return kernels::cohort_moments(values).mean; }

double population_std_dev(std::span<const double> values) {
  return kernels::cohort_moments(values).std_dev;
}

double population_std_dev(std::span<const double> values, std::size_t count) {
  if (count != values.size()) {
    throw Error("length_mismatch", fmt::format("cohort size {} but {} values", count, values.size()));
  }
  return population_std_dev(values);
}

double deviation_iq(double iq_a, double mean, double s) {
  if (s < 0.0) throw Error("invalid_std_dev", "standard deviation must be non-negative");
  return s == 0.0 ? 100.0 : 100.0 + (iq_a - mean) / s;
}

CohortResult rank_cohort(const std::vector<CohortMember>& members) {
  if (members.empty()) throw Error("empty_cohort", "cohort has no subjects");
  std::vector<double> absolute(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) absolute[i] = members[i].absolute_iq;

  const kernels::Moments m = kernels::cohort_moments(absolute);
  std::vector<double> deviation(members.size());
  kernels::deviation_iq_batch(absolute, m, deviation);

  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return absolute[a] > absolute[b]; });

  CohortResult result;
  result.mean = m.mean;
  result.std_dev = m.std_dev;
  result.count = m.count;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& member = members[order[r]];
    result.rows.push_back({r + 1, member.subject_id, member.label, member.region, member.absolute_iq,
                           deviation[order[r]], member.flagged});
  }
  return result;
}

CohortResult leaderboard(const std::vector<Session>& sessions, const IntelligenceScale& scale,
                         const std::function<CohortMember(const Session&)>& describe) {
  if (sessions.empty()) throw Error("empty_cohort", "cohort has no sessions");
  std::vector<const Session*> ordered;
  for (const auto& s : sessions) {
    if (s.scale_id != scale.scale_id) {
      throw Error("mixed_scales", "session " + s.session_id + " was scored under '" + s.scale_id + "'");
    }
    if (s.status != SessionStatus::complete) {
      throw Error("incomplete_session", "session " + s.session_id + " is " + std::string(to_string(s.status)));
    }
    ordered.push_back(&s);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Session* a, const Session* b) { return a->subject_id < b->subject_id; });

  const std::vector<double> weights = scale.weights();
  std::vector<double> matrix;
  matrix.reserve(ordered.size() * weights.size());
  for (const Session* s : ordered) {
    const auto f = subtest_scores(*s, scale);
    matrix.insert(matrix.end(), f.scores.begin(), f.scores.end());
  }
  std::vector<double> absolute(ordered.size());
  kernels::absolute_iq_batch(matrix, weights, absolute);

  std::vector<CohortMember> members;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    CohortMember m = describe ? describe(*ordered[i]) : CohortMember{};
    m.subject_id = ordered[i]->subject_id;
    if (m.label.empty()) m.label = m.subject_id;
    m.absolute_iq = absolute[i];
    m.flagged = ordered[i]->flagged();
    members.push_back(std::move(m));
  }
  return rank_cohort(members);
}

namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

nlohmann::json cohort_to_json(const CohortResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"rank", r.rank},
                    {"subject_id", r.subject_id},
                    {"label", r.label},
                    {"region", r.region},
                    {"absolute_iq", round2(r.absolute_iq)},
                    {"deviation_iq", round2(r.deviation_iq)},
                    {"flagged", r.flagged}});
  }
  return {{"count", result.count}, {"mean", result.mean}, {"std_dev", result.std_dev}, {"rows", rows}};
}

std::string cohort_to_csv(const CohortResult& result) {
  std::string out = "rank,subject_id,label,region,absolute_iq,deviation_iq,flagged\n";
  for (const auto& r : result.rows) {
    out += fmt::format("{},{},{},{},{:.2f},{:.2f},{}\n", r.rank, csv_field(r.subject_id), csv_field(r.label),
                       csv_field(r.region), r.absolute_iq, r.deviation_iq, r.flagged ? "yes" : "no");
  }
  return out;
}

std::string cohort_to_table(const CohortResult& result) {
  std::string out = fmt::format("{:>4}  {:<24} {:<14} {:>11} {:>12}\n", "rank", "label", "region",
                                "absolute IQ", "deviation IQ");
  for (const auto& r : result.rows) {
    out += fmt::format("{:>4}  {:<24} {:<14} {:>11.2f} {:>12.2f}{}\n", r.rank, r.label, r.region,
                       r.absolute_iq, r.deviation_iq, r.flagged ? "  [flagged]" : "");
  }
  out += fmt::format("subjects={} mean={:.4f} S={:.4f}\n", result.count, result.mean, result.std_dev);
  return out;
}

std::vector<GoldenRow> parse_golden_csv(const std::string& text) {
  std::vector<GoldenRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw Error("invalid_golden", fmt::format("line {}: expected 6 fields", line_no));
    try {
      rows.push_back({static_cast<std::size_t>(std::stoul(f[0])), f[1], f[2], f[3], std::stod(f[4]),
                      std::stod(f[5])});
    } catch (const std::logic_error&) {
      throw Error("invalid_golden", fmt::format("line {}: non-numeric field", line_no));
    }
  }
  return rows;
}

std::vector<GoldenRow> load_golden_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open golden file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_golden_csv(buffer.str());
}

std::vector<CohortMember> golden_members(const std::vector<GoldenRow>& rows) {
  std::vector<CohortMember> members;
  for (const auto& r : rows) {
    CohortMember m;
    m.subject_id = fmt::format("row{:02}", r.position);
    m.label = r.country == "Human" ? "Human " + r.label : r.label;
    m.region = r.region.empty() ? r.country : r.region + "/" + r.country;
    m.absolute_iq = r.absolute_iq;
    members.push_back(std::move(m));
  }
  return members;
}

}  // namespace aiq::stats
