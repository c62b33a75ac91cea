#include "aiq/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "aiq/error.hpp"

namespace aiq {

namespace fs = std::filesystem;

namespace {

SeedPolicy seed_policy_from_string(const std::string& name) {
  if (name == "cohort") return SeedPolicy::cohort;
  if (name == "per_subject") return SeedPolicy::per_subject;
  throw Error("invalid_config", "seed_policy must be 'cohort' or 'per_subject', got '" + name + "'");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_json", path.string() + ": " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

HarnessConfig HarnessConfig::from_json(const nlohmann::json& doc) {
  HarnessConfig c;
  if (const char* env = std::getenv("AIQ_DATA_DIR"); env && *env) c.data_dir = env;
  try {
    if (doc.contains("data_dir")) c.data_dir = doc.at("data_dir").get<std::string>();
    if (doc.contains("bank")) c.bank_path = doc.at("bank").get<std::string>();
    if (doc.contains("registry")) c.registry_path = doc.at("registry").get<std::string>();
    if (doc.contains("scale")) c.scale_path = doc.at("scale").get<std::string>();
    if (doc.contains("timeout_ms")) c.timeout = milliseconds(doc.at("timeout_ms").get<std::int64_t>());
    if (doc.contains("seed_policy")) c.seed_policy = seed_policy_from_string(doc.at("seed_policy").get<std::string>());
    if (doc.contains("cohort_seed")) c.cohort_seed = doc.at("cohort_seed").get<std::uint64_t>();
    if (doc.contains("listen")) c.listen = doc.at("listen").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_config", e.what());
  }
  if (c.bank_path.empty()) c.bank_path = c.data_dir / "bank.json";
  if (c.registry_path.empty()) c.registry_path = c.data_dir / "subjects.json";
  c.validate(false);
  return c;
}

HarnessConfig HarnessConfig::from_file(const fs::path& path) {
  HarnessConfig c = from_json(read_json(path));
  return c;
}

nlohmann::json HarnessConfig::to_json() const {
  return {{"data_dir", data_dir.string()},
          {"bank", bank_path.string()},
          {"registry", registry_path.string()},
          {"scale", scale_path.string()},
          {"timeout_ms", timeout.count()},
          {"seed_policy", seed_policy == SeedPolicy::cohort ? "cohort" : "per_subject"},
          {"cohort_seed", cohort_seed},
          {"listen", listen}};
}

void HarnessConfig::validate(bool require_paths) const {
  if (timeout.count() <= 0) throw Error("invalid_config", "timeout_ms must be positive");
  if (data_dir.empty()) throw Error("invalid_config", "data_dir is empty");
  if (require_paths) {
    if (!fs::exists(bank_path)) throw Error("invalid_config", "bank not found: " + bank_path.string());
    if (!fs::exists(registry_path)) {
      throw Error("invalid_config", "subject registry not found: " + registry_path.string());
    }
  }
}

Harness::Harness(HarnessConfig config)
    : config_(std::move(config)),
      scale_(config_.scale_path.empty() ? default_scale() : scale_from_json(read_json(config_.scale_path))),
      store_(config_.data_dir / "sessions") {
  if (auto problems = validate_scale(scale_); !problems.empty()) {
    throw Error("invalid_scale", problems.front());
  }
}

Harness::~Harness() {
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, ch] : channels_) ch->close();
  }
  join_all();
}

const QuestionBank& Harness::bank() {
  std::lock_guard lock(mutex_);
  if (!bank_) bank_ = load_bank_file(config_.bank_path, scale_);
  return *bank_;
}

const SubjectRegistry& Harness::registry() {
  std::lock_guard lock(mutex_);
  if (!registry_) registry_ = SubjectRegistry::load_file(config_.registry_path);
  return *registry_;
}

std::uint64_t Harness::seed_for(const std::string& subject_id) const {
  if (config_.seed_policy == SeedPolicy::cohort) return config_.cohort_seed;
  return config_.cohort_seed ^ fnv1a(subject_id);
}

TestPaper Harness::sample(std::uint64_t seed) { return sample_paper(bank(), scale_, seed); }

fs::path Harness::save_paper(const TestPaper& paper) {
  const fs::path dir = config_.data_dir / "papers";
  fs::create_directories(dir);
  const fs::path path = dir / (paper.paper_id + ".json");
  std::ofstream out(path, std::ios::trunc);
  out << paper_to_json(paper).dump(2) << '\n';
  if (!out) throw Error("io_error", "cannot write " + path.string());
  return path;
}

TestPaper Harness::load_paper(const std::string& id_or_path) {
  fs::path path = id_or_path;
  if (!fs::exists(path)) path = config_.data_dir / "papers" / (id_or_path + ".json");
  if (!fs::exists(path)) throw Error("unknown_paper", "no paper '" + id_or_path + "'");
  try {
    return paper_from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_paper", path.string() + ": " + e.what());
  }
}

Harness::Prepared Harness::prepare(const RunRequest& request, std::shared_ptr<ProctorChannel> channel) {
  const auto& reg = registry();
  if (!reg.contains(request.subject_id)) {
    throw Error("unknown_subject", "no subject '" + request.subject_id + "' in registry");
  }
  Prepared p;
  if (request.paper) {
    p.paper = load_paper(*request.paper);
  } else {
    p.paper = sample(request.seed.value_or(seed_for(request.subject_id)));
    save_paper(p.paper);
  }
  const auto& entry = reg.at(request.subject_id);
  if (entry.descriptor.kind == SubjectKind::human && !channel) channel = std::make_shared<ProctorChannel>();

  p.options.timeout = config_.timeout;
  p.options.session_id =
      request.session_id.empty() ? request.subject_id + "@" + p.paper.paper_id : request.session_id;
  p.options.cohort = request.cohort.empty() ? p.paper.paper_id : request.cohort;

  std::lock_guard lock(mutex_);
  if (live_.contains(p.options.session_id) || store_.exists(p.options.session_id)) {
    throw Error("session_exists", "session '" + p.options.session_id + "' already exists");
  }
  p.subject = reg.instantiate(request.subject_id, channel);
  Session initial;
  initial.session_id = p.options.session_id;
  p.live = std::make_shared<LiveSession>(std::move(initial));
  live_[p.options.session_id] = p.live;
  if (channel) channels_[p.options.session_id] = channel;
  return p;
}

Session Harness::run(const RunRequest& request, std::shared_ptr<ProctorChannel> channel) {
  Prepared p = prepare(request, std::move(channel));
  run_session(*p.live, p.subject, p.paper, bank(), scale_, p.options, &store_);
  return p.live->snapshot();
}

std::string Harness::start(const RunRequest& request) {
  Prepared p = prepare(request, nullptr);
  const std::string id = p.options.session_id;
  const QuestionBank& b = bank();
  std::lock_guard lock(mutex_);
  workers_.emplace_back([this, p = std::move(p), &b]() {
    try {
      run_session(*p.live, p.subject, p.paper, b, scale_, p.options, &store_);
    } catch (const std::exception& e) {
      spdlog::error("session {} stopped: {}", p.options.session_id, e.what());
    }
  });
  return id;
}

std::shared_ptr<LiveSession> Harness::live(const std::string& session_id) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = live_.find(session_id); it != live_.end()) return it->second;
  }
  if (!store_.exists(session_id)) throw Error("unknown_session", "no session '" + session_id + "'");
  auto loaded = store_.load(session_id);
  for (const auto& w : loaded.warnings) spdlog::warn("{}", w);
  finalize_if_ready(loaded.session, &store_);
  auto ptr = std::make_shared<LiveSession>(std::move(loaded.session));
  std::lock_guard lock(mutex_);
  // Another caller may have loaded it meanwhile; keep the first.
  return live_.emplace(session_id, ptr).first->second;
}

std::shared_ptr<ProctorChannel> Harness::channel(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  if (auto it = channels_.find(session_id); it != channels_.end()) return it->second;
  return nullptr;
}

Session Harness::grade(const std::string& session_id, const std::string& question_id, Verdict verdict,
                       const std::string& grader_id, bool allow_regrade) {
  auto session = live(session_id);
  return session->mutate([&](Session& s) {
    submit_manual_grade(s, question_id, verdict, grader_id, allow_regrade, &store_);
    return s;
  });
}

std::vector<Session> Harness::sessions() {
  std::vector<std::string> ids = store_.list();
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, _] : live_) {
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  }
  std::sort(ids.begin(), ids.end());
  std::vector<Session> out;
  for (const auto& id : ids) {
    try {
      out.push_back(live(id)->snapshot());
    } catch (const Error& e) {
      spdlog::warn("skipping session {}: {}", id, e.what());
    }
  }
  return out;
}

std::vector<Session> Harness::cohort(const std::string& cohort_id) {
  std::vector<Session> out;
  for (auto& s : sessions()) {
    if (s.cohort == cohort_id) out.push_back(std::move(s));
  }
  return out;
}

stats::CohortMember Harness::describe(const Session& session) {
  stats::CohortMember m;
  m.subject_id = session.subject_id;
  const auto& reg = registry();
  if (reg.contains(session.subject_id)) {
    const auto& d = reg.at(session.subject_id).descriptor;
    m.label = !d.label.empty() ? d.label : d.display_name;
    m.region = d.region;
  }
  return m;
}

stats::CohortResult Harness::leaderboard(const std::string& cohort_id, bool complete_only) {
  std::vector<Session> members = cohort(cohort_id);
  if (complete_only) {
    std::erase_if(members, [](const Session& s) { return s.status != SessionStatus::complete; });
  }
  if (members.empty()) throw Error("empty_cohort", "no scored sessions in cohort '" + cohort_id + "'");
  return stats::leaderboard(members, scale_, [this](const Session& s) { return describe(s); });
}

void Harness::join_all() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    workers.swap(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
}

}  // namespace aiq
