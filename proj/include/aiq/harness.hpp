#pragma once

// The operational core shared by the CLI and the HTTP service: configuration,
// lazily loaded bank/registry, paper storage, live sessions and the store.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "aiq/question_bank.hpp"
#include "aiq/scale.hpp"
#include "aiq/scoring_stats.hpp"
#include "aiq/session.hpp"
#include "aiq/session_store.hpp"
#include "aiq/subjects.hpp"

namespace aiq {

enum class SeedPolicy { cohort, per_subject };

struct HarnessConfig {
  std::filesystem::path data_dir = "aiq-data";
  std::filesystem::path bank_path;
  std::filesystem::path registry_path;
  std::filesystem::path scale_path;  // empty: built-in scale
  milliseconds timeout = kDefaultTimeout;
  SeedPolicy seed_policy = SeedPolicy::cohort;
  std::uint64_t cohort_seed = 42;
  std::string listen = "127.0.0.1:8080";

  // Fills unspecified fields from AIQ_DATA_DIR and the data directory layout.
  static HarnessConfig from_json(const nlohmann::json& doc);
  static HarnessConfig from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  // Throws aiq::Error("invalid_config").
  void validate(bool require_paths) const;
};

struct RunRequest {
  std::string subject_id;
  std::optional<std::string> paper;        // paper id or path
  std::optional<std::uint64_t> seed;       // sample a fresh paper with this seed
  std::string cohort;
  std::string session_id;
};

class Harness {
 public:
  explicit Harness(HarnessConfig config);
  ~Harness();

  const HarnessConfig& config() const noexcept { return config_; }
  const IntelligenceScale& scale() const noexcept { return scale_; }
  const QuestionBank& bank();
  const SubjectRegistry& registry();
  SessionStore& store() noexcept { return store_; }

  // Seed a subject's paper is drawn with under the configured policy.
  std::uint64_t seed_for(const std::string& subject_id) const;
  TestPaper sample(std::uint64_t seed);
  std::filesystem::path save_paper(const TestPaper& paper);
  TestPaper load_paper(const std::string& id_or_path);

  // Runs a whole session on the calling thread.
  Session run(const RunRequest& request, std::shared_ptr<ProctorChannel> channel = nullptr);
  // Starts a session on a background thread and returns its id at once.
  std::string start(const RunRequest& request);

  std::shared_ptr<LiveSession> live(const std::string& session_id);
  std::shared_ptr<ProctorChannel> channel(const std::string& session_id);
  Session grade(const std::string& session_id, const std::string& question_id, Verdict verdict,
                const std::string& grader_id, bool allow_regrade = false);

  std::vector<Session> sessions();
  std::vector<Session> cohort(const std::string& cohort_id);
  // With complete_only, unfinished sessions are left out instead of failing.
  stats::CohortResult leaderboard(const std::string& cohort_id, bool complete_only = false);
  stats::CohortMember describe(const Session& session);

  // Waits for background sessions (service shutdown, tests).
  void join_all();

 private:
  struct Prepared {
    std::shared_ptr<Subject> subject;
    TestPaper paper;
    SessionOptions options;
    std::shared_ptr<LiveSession> live;
  };
  Prepared prepare(const RunRequest& request, std::shared_ptr<ProctorChannel> channel);

  HarnessConfig config_;
  IntelligenceScale scale_;
  SessionStore store_;
  std::mutex mutex_;
  std::optional<QuestionBank> bank_;
  std::optional<SubjectRegistry> registry_;
  std::map<std::string, std::shared_ptr<LiveSession>> live_;
  std::map<std::string, std::shared_ptr<ProctorChannel>> channels_;
  std::vector<std::thread> workers_;
};

}  // namespace aiq
