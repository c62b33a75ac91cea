#pragma once

// Test objects and the adapters that put one question to them. Every adapter
// goes through ask(), which applies the modality gate locally, enforces the
// per-question wall-clock budget, and keeps the subject's feedback order so
// the first item can be evaluated.

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aiq/intelligence_model.hpp"
#include "aiq/modality.hpp"
#include "aiq/question_bank.hpp"

namespace aiq {

using std::chrono::milliseconds;

inline constexpr milliseconds kDefaultTimeout{180'000};

enum class SubjectKind { scripted, simulated_machine, http_engine, human };
std::string_view to_string(SubjectKind k) noexcept;
SubjectKind subject_kind_from_string(std::string_view name);

enum class ResponseStatus { delivered, input_rejected, timed_out, transport_error };
std::string_view to_string(ResponseStatus s) noexcept;
ResponseStatus response_status_from_string(std::string_view name);

struct ResponseOutcome {
  ResponseStatus status = ResponseStatus::transport_error;
  std::vector<std::string> items;  // non-empty iff delivered
  std::int64_t latency_ms = 0;
  std::string diagnostic;

  friend bool operator==(const ResponseOutcome&, const ResponseOutcome&) = default;
};

struct ExtractionRule {
  std::string pattern;  // ECMAScript regex, applied repeatedly over the page
  int group = 1;        // capture group holding one result snippet
};

struct EndpointConfig {
  std::string url_template;  // contains a {query} placeholder
  ExtractionRule extract;
  int retries = 2;
  milliseconds backoff{500};
};

struct SubjectDescriptor {
  std::string subject_id;
  std::string display_name;
  SubjectKind kind = SubjectKind::scripted;
  ModalitySet input_modalities;
  ModalitySet output_modalities;
  std::optional<EndpointConfig> endpoint;
  std::string region;
  std::string label;
};

class Subject {
 public:
  explicit Subject(SubjectDescriptor descriptor) : descriptor_(std::move(descriptor)) {}
  virtual ~Subject() = default;
  Subject(const Subject&) = delete;
  Subject& operator=(const Subject&) = delete;

  const SubjectDescriptor& descriptor() const noexcept { return descriptor_; }

 protected:
  // Delivers an already-admitted question. Implementations should honour the
  // budget themselves where they can; ask() cuts them off regardless.
  virtual ResponseOutcome respond(const Question& question, milliseconds timeout) = 0;

  SubjectDescriptor descriptor_;

 private:
  friend ResponseOutcome ask(const std::shared_ptr<Subject>& subject, const Question& question,
                             milliseconds timeout);
  // One question at a time per subject.
  std::mutex turn_;
};

ResponseOutcome ask(const std::shared_ptr<Subject>& subject, const Question& question,
                    milliseconds timeout = kDefaultTimeout);

// --- scripted fixtures --------------------------------------------------------

struct ScriptedReply {
  std::vector<std::string> items;
  // Reported response time; lets fixtures model slow subjects without sleeping.
  milliseconds latency{0};
};

class ScriptedSubject : public Subject {
 public:
  ScriptedSubject(SubjectDescriptor descriptor, std::map<std::string, ScriptedReply> by_prompt,
                  std::optional<ScriptedReply> fallback = std::nullopt);

  // Replies keyed by question id take precedence over prompt keys.
  void set_reply_for_question(const std::string& question_id, ScriptedReply reply);

 protected:
  ResponseOutcome respond(const Question& question, milliseconds timeout) override;

 private:
  std::map<std::string, ScriptedReply> by_prompt_;  // normalised prompt -> reply
  std::map<std::string, ScriptedReply> by_question_;
  std::optional<ScriptedReply> fallback_;
};

// --- simulated machines ---------------------------------------------------------

class SimulatedMachineSubject : public Subject {
 public:
  SimulatedMachineSubject(SubjectDescriptor descriptor, model::StandardIntelligentMachine machine,
                          std::shared_ptr<model::World> world);

  // Serialised access to the machine between questions.
  void with_machine(const std::function<void(model::StandardIntelligentMachine&, model::World&)>& fn);
  model::MachineState state();

 protected:
  ResponseOutcome respond(const Question& question, milliseconds timeout) override;

 private:
  std::mutex machine_mutex_;
  model::StandardIntelligentMachine machine_;
  std::shared_ptr<model::World> world_;
};

inline constexpr const char* kUnknownAnswer = "unknown";

// Answers from the machine's keyed knowledge: input gated by Q_I, the answer
// expressed through output_knowledge and so gated by Q_O.
ResponseOutcome ask_simulated_machine(model::StandardIntelligentMachine& machine, model::World& world,
                                      const Question& question);

// --- live engines over HTTP -------------------------------------------------------

ResponseOutcome ask_http_engine(const EndpointConfig& config, const std::string& prompt,
                                milliseconds timeout = kDefaultTimeout);

// Result snippets in page order, tags stripped and whitespace collapsed.
std::vector<std::string> extract_results(const std::string& page, const ExtractionRule& rule);
std::string render_query_url(const std::string& url_template, const std::string& prompt);

class HttpEngineSubject : public Subject {
 public:
  explicit HttpEngineSubject(SubjectDescriptor descriptor);

 protected:
  ResponseOutcome respond(const Question& question, milliseconds timeout) override;
};

// --- proctored humans ---------------------------------------------------------

struct ProctorQuestion {
  std::uint64_t sequence = 0;
  std::string question_id;
  std::string prompt;
  Modality modality = Modality::text;
  std::vector<std::string> attachments;
  std::int64_t issued_at_ms = 0;
  std::int64_t deadline_ms = 0;
};

enum class ProctorSubmit { accepted, stale, closed };

// Hand-off point between the harness (which publishes questions and waits)
// and whoever relays them to the human subject. Latency is measured with the
// channel's clock from publication to submission, so the deadline is decided
// here and never by the proctor's client.
class ProctorChannel {
 public:
  using Clock = std::function<std::int64_t()>;  // epoch milliseconds

  ProctorChannel();
  explicit ProctorChannel(Clock clock);

  ResponseOutcome administer(const Question& question, milliseconds timeout);

  std::optional<ProctorQuestion> current() const;
  ProctorSubmit submit_answer(const std::string& question_id, std::string answer);
  ProctorSubmit cannot_ask(const std::string& question_id);
  void close();
  bool closed() const;
  // Blocks until a question is published (or the channel closes/timeout).
  std::optional<ProctorQuestion> wait_for_question(milliseconds timeout) const;

 private:
  ProctorSubmit submit(const std::string& question_id, std::optional<std::string> answer);

  Clock clock_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::optional<ProctorQuestion> current_;
  bool answered_ = false;
  std::optional<std::string> answer_;  // nullopt with answered_ = cannot be asked
  std::int64_t answered_at_ms_ = 0;
  std::uint64_t sequence_ = 0;
  bool closed_ = false;
};

ResponseOutcome ask_human(ProctorChannel& channel, const Question& question,
                          milliseconds timeout = kDefaultTimeout);

class HumanSubject : public Subject {
 public:
  HumanSubject(SubjectDescriptor descriptor, std::shared_ptr<ProctorChannel> channel);
  const std::shared_ptr<ProctorChannel>& channel() const noexcept { return channel_; }

 protected:
  ResponseOutcome respond(const Question& question, milliseconds timeout) override;

 private:
  std::shared_ptr<ProctorChannel> channel_;
};

// --- registry -----------------------------------------------------------------

struct SubjectEntry {
  SubjectDescriptor descriptor;
  nlohmann::json spec;  // kind-specific payload: "script" or "machine"
};

nlohmann::json descriptor_to_json(const SubjectDescriptor& d);
SubjectDescriptor descriptor_from_json(const nlohmann::json& j);

class SubjectRegistry {
 public:
  SubjectRegistry() = default;
  explicit SubjectRegistry(std::vector<SubjectEntry> entries);

  static SubjectRegistry load(const nlohmann::json& document);
  static SubjectRegistry load_file(const std::filesystem::path& path);

  const std::vector<SubjectEntry>& entries() const noexcept { return entries_; }
  const SubjectEntry& at(const std::string& subject_id) const;
  bool contains(const std::string& subject_id) const;

  // Builds a live adapter. Human subjects are bound to the given channel.
  std::shared_ptr<Subject> instantiate(const std::string& subject_id,
                                       std::shared_ptr<ProctorChannel> channel = nullptr) const;

 private:
  std::vector<SubjectEntry> entries_;
};

}  // namespace aiq
