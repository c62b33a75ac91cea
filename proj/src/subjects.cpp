#include "aiq/subjects.hpp"

#include <future>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "aiq/answer_matching.hpp"
#include "aiq/error.hpp"

namespace aiq {

namespace {

using SteadyClock = std::chrono::steady_clock;

std::int64_t elapsed_ms(SteadyClock::time_point since) {
  return std::chrono::duration_cast<milliseconds>(SteadyClock::now() - since).count();
}

ResponseOutcome make_outcome(ResponseStatus status, std::int64_t latency, std::string diagnostic = {}) {
  ResponseOutcome o;
  o.status = status;
  o.latency_ms = latency;
  o.diagnostic = std::move(diagnostic);
  return o;
}

// Slack on top of the budget before the watchdog abandons a subject that does
// not enforce its own deadline.
constexpr milliseconds kWatchdogGrace{250};

}  // namespace

std::string_view to_string(SubjectKind k) noexcept {
  switch (k) {
    case SubjectKind::scripted: return "scripted";
    case SubjectKind::simulated_machine: return "simulated_machine";
    case SubjectKind::http_engine: return "http_engine";
    case SubjectKind::human: return "human";
  }
  return "scripted";
}

SubjectKind subject_kind_from_string(std::string_view name) {
  for (SubjectKind k : {SubjectKind::scripted, SubjectKind::simulated_machine, SubjectKind::http_engine,
                        SubjectKind::human}) {
    if (to_string(k) == name) return k;
  }
  throw Error("invalid_subject_kind", "unknown subject kind '" + std::string(name) + "'");
}

std::string_view to_string(ResponseStatus s) noexcept {
  switch (s) {
    case ResponseStatus::delivered: return "delivered";
    case ResponseStatus::input_rejected: return "input_rejected";
    case ResponseStatus::timed_out: return "timed_out";
    case ResponseStatus::transport_error: return "transport_error";
  }
  return "transport_error";
}

ResponseStatus response_status_from_string(std::string_view name) {
  for (ResponseStatus s : {ResponseStatus::delivered, ResponseStatus::input_rejected,
                           ResponseStatus::timed_out, ResponseStatus::transport_error}) {
    if (to_string(s) == name) return s;
  }
  throw Error("invalid_status", "unknown response status '" + std::string(name) + "'");
}

ResponseOutcome ask(const std::shared_ptr<Subject>& subject, const Question& question,
                    milliseconds timeout) {
  if (!subject->descriptor().input_modalities.contains(question.prompt_modality)) {
    return make_outcome(ResponseStatus::input_rejected, 0,
                        fmt::format("subject cannot receive {} input", to_string(question.prompt_modality)));
  }

  auto promise = std::make_shared<std::promise<ResponseOutcome>>();
  auto future = promise->get_future();
  const auto start = SteadyClock::now();
  std::thread worker([subject, question, timeout, promise] {
    std::lock_guard turn(subject->turn_);
    try {
      promise->set_value(subject->respond(question, timeout));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  });

  if (future.wait_for(timeout + kWatchdogGrace) == std::future_status::timeout) {
    // The worker keeps the subject alive and finishes on its own; the next
    // question to this subject waits for it to release the turn.
    worker.detach();
    return make_outcome(ResponseStatus::timed_out, elapsed_ms(start), "no feedback within budget");
  }
  worker.join();

  ResponseOutcome outcome;
  try {
    outcome = future.get();
  } catch (const std::exception& e) {
    return make_outcome(ResponseStatus::transport_error, elapsed_ms(start), e.what());
  }
  outcome.latency_ms = std::max(outcome.latency_ms, elapsed_ms(start));
  if (outcome.latency_ms > timeout.count() && outcome.status != ResponseStatus::input_rejected) {
    outcome.status = ResponseStatus::timed_out;
    outcome.items.clear();
  }
  if (outcome.status == ResponseStatus::delivered && outcome.items.empty()) {
    outcome.status = ResponseStatus::transport_error;
    outcome.diagnostic = "subject delivered no feedback items";
  }
  if (outcome.status != ResponseStatus::delivered) outcome.items.clear();
  return outcome;
}

// --- scripted -------------------------------------------------------------------

ScriptedSubject::ScriptedSubject(SubjectDescriptor descriptor,
                                 std::map<std::string, ScriptedReply> by_prompt,
                                 std::optional<ScriptedReply> fallback)
    : Subject(std::move(descriptor)), fallback_(std::move(fallback)) {
  for (auto& [prompt, reply] : by_prompt) by_prompt_.emplace(text::normalize(prompt), std::move(reply));
}

void ScriptedSubject::set_reply_for_question(const std::string& question_id, ScriptedReply reply) {
  by_question_[question_id] = std::move(reply);
}

ResponseOutcome ScriptedSubject::respond(const Question& question, milliseconds /*timeout*/) {
  const ScriptedReply* reply = nullptr;
  if (auto it = by_question_.find(question.id); it != by_question_.end()) {
    reply = &it->second;
  } else if (auto p = by_prompt_.find(text::normalize(question.prompt)); p != by_prompt_.end()) {
    reply = &p->second;
  } else if (fallback_) {
    reply = &*fallback_;
  }
  if (!reply || reply->items.empty()) {
    // Silence: the subject never answers this prompt.
    return make_outcome(ResponseStatus::timed_out, kDefaultTimeout.count() + 1, "no scripted reply");
  }
  ResponseOutcome o = make_outcome(ResponseStatus::delivered, reply->latency.count());
  o.items = reply->items;
  return o;
}

// --- simulated machine ----------------------------------------------------------

SimulatedMachineSubject::SimulatedMachineSubject(SubjectDescriptor descriptor,
                                                 model::StandardIntelligentMachine machine,
                                                 std::shared_ptr<model::World> world)
    : Subject(std::move(descriptor)), machine_(std::move(machine)), world_(std::move(world)) {
  // The gate in ask() must see the machine's own modality sets.
  descriptor_.input_modalities = machine_.input_modalities();
  descriptor_.output_modalities = machine_.output_modalities();
}

void SimulatedMachineSubject::with_machine(
    const std::function<void(model::StandardIntelligentMachine&, model::World&)>& fn) {
  std::lock_guard lock(machine_mutex_);
  fn(machine_, *world_);
}

model::MachineState SimulatedMachineSubject::state() {
  std::lock_guard lock(machine_mutex_);
  return machine_.state();
}

ResponseOutcome SimulatedMachineSubject::respond(const Question& question, milliseconds /*timeout*/) {
  std::lock_guard lock(machine_mutex_);
  return ask_simulated_machine(machine_, *world_, question);
}

ResponseOutcome ask_simulated_machine(model::StandardIntelligentMachine& machine, model::World& world,
                                      const Question& question) {
  if (!machine.input_modalities().contains(question.prompt_modality)) {
    return make_outcome(ResponseStatus::input_rejected, 0, "prompt modality outside Q_I");
  }
  auto fact = machine.find_by_key(text::normalize(question.prompt));
  if (!fact) {
    ResponseOutcome o = make_outcome(ResponseStatus::delivered, 0);
    o.items = {kUnknownAnswer};
    return o;
  }
  if (machine.output_knowledge(fact->id, world) == 0) {
    // Nothing the tester can observe comes back.
    return make_outcome(ResponseStatus::timed_out, kDefaultTimeout.count() + 1,
                        "answer modality outside Q_O");
  }
  ResponseOutcome o = make_outcome(ResponseStatus::delivered, 0);
  o.items = {fact->content};
  return o;
}

// --- HTTP engines ---------------------------------------------------------------

namespace {

std::string percent_encode(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += fmt::format("%{:02X}", c);
    }
  }
  return out;
}

std::string decode_entities(std::string s) {
  static const std::array<std::pair<const char*, const char*>, 6> entities = {
      {{"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&nbsp;", " "}, {"&amp;", "&"}}};
  for (const auto& [from, to] : entities) {
    std::string::size_type pos = 0;
    const std::string f(from);
    while ((pos = s.find(f, pos)) != std::string::npos) {
      s.replace(pos, f.size(), to);
      pos += std::string_view(to).size();
    }
  }
  return s;
}

std::string collapse_whitespace(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(c);
  }
  return out;
}

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // /path?query
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("invalid_url", "URL has no scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string render_query_url(const std::string& url_template, const std::string& prompt) {
  static const std::string placeholder = "{query}";
  const auto pos = url_template.find(placeholder);
  if (pos == std::string::npos) {
    throw Error("invalid_endpoint", "url_template lacks a {query} placeholder");
  }
  std::string url = url_template;
  url.replace(pos, placeholder.size(), percent_encode(prompt));
  return url;
}

std::vector<std::string> extract_results(const std::string& page, const ExtractionRule& rule) {
  std::regex re;
  try {
    re = std::regex(rule.pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw Error("invalid_extraction_rule", "bad extraction pattern: " + std::string(e.what()));
  }
  static const std::regex tags("<[^>]*>");
  std::vector<std::string> results;
  for (auto it = std::sregex_iterator(page.begin(), page.end(), re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const std::size_t g = static_cast<std::size_t>(rule.group) < m.size() ? static_cast<std::size_t>(rule.group) : 0;
    std::string snippet = collapse_whitespace(decode_entities(std::regex_replace(m[g].str(), tags, " ")));
    if (!snippet.empty()) results.push_back(std::move(snippet));
  }
  return results;
}

ResponseOutcome ask_http_engine(const EndpointConfig& config, const std::string& prompt,
                                milliseconds timeout) {
  const auto start = SteadyClock::now();
  SplitUrl target;
  try {
    target = split_url(render_query_url(config.url_template, prompt));
  } catch (const Error& e) {
    return make_outcome(ResponseStatus::transport_error, 0, e.what());
  }

  std::string last_failure = "deadline passed before first attempt";
  const int max_attempts = 1 + std::max(0, config.retries);
  int attempts = 0;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const std::int64_t remaining = timeout.count() - elapsed_ms(start);
    if (remaining <= 0) break;
    if (attempt > 0) {
      if (config.backoff.count() >= remaining) break;
      std::this_thread::sleep_for(config.backoff);
    }
    const std::int64_t budget = std::max<std::int64_t>(1, timeout.count() - elapsed_ms(start));

    ++attempts;
    httplib::Client client(target.origin);
    client.set_connection_timeout(milliseconds(budget));
    client.set_read_timeout(milliseconds(budget));
    client.set_write_timeout(milliseconds(budget));
    client.set_follow_location(true);
    auto res = client.Get(target.path);
    if (!res) {
      last_failure = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_failure = fmt::format("HTTP {}", res->status);
      continue;
    }
    auto items = extract_results(res->body, config.extract);
    if (items.empty()) {
      last_failure = "malformed page: extraction rule matched no results";
      continue;
    }
    ResponseOutcome o = make_outcome(ResponseStatus::delivered, elapsed_ms(start));
    o.items = std::move(items);
    return o;
  }

  const std::int64_t latency = elapsed_ms(start);
  if (latency >= timeout.count()) {
    return make_outcome(ResponseStatus::timed_out, latency, last_failure);
  }
  return make_outcome(ResponseStatus::transport_error, latency,
                      fmt::format("{} after {} attempt(s)", last_failure, attempts));
}

HttpEngineSubject::HttpEngineSubject(SubjectDescriptor descriptor) : Subject(std::move(descriptor)) {
  if (!descriptor_.endpoint) {
    throw Error("invalid_subject", "http_engine subject '" + descriptor_.subject_id + "' has no endpoint");
  }
}

ResponseOutcome HttpEngineSubject::respond(const Question& question, milliseconds timeout) {
  return ask_http_engine(*descriptor_.endpoint, question.prompt, timeout);
}

// --- proctored humans -------------------------------------------------------------

namespace {

std::int64_t system_now_ms() {
  return std::chrono::duration_cast<milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

ProctorChannel::ProctorChannel() : clock_(system_now_ms) {}
ProctorChannel::ProctorChannel(Clock clock) : clock_(std::move(clock)) {}

ResponseOutcome ProctorChannel::administer(const Question& question, milliseconds timeout) {
  std::unique_lock lock(mutex_);
  if (closed_) return make_outcome(ResponseStatus::transport_error, 0, "proctor channel closed");

  ProctorQuestion pq;
  pq.sequence = ++sequence_;
  pq.question_id = question.id;
  pq.prompt = question.prompt;
  pq.modality = question.prompt_modality;
  pq.attachments = question.attachments;
  pq.issued_at_ms = clock_();
  pq.deadline_ms = pq.issued_at_ms + timeout.count();
  current_ = pq;
  answered_ = false;
  answer_.reset();
  cv_.notify_all();

  cv_.wait_for(lock, timeout, [&] { return answered_ || closed_; });
  current_.reset();
  if (!answered_) {
    if (closed_) return make_outcome(ResponseStatus::transport_error, clock_() - pq.issued_at_ms, "proctor channel closed");
    return make_outcome(ResponseStatus::timed_out, std::max(timeout.count(), clock_() - pq.issued_at_ms),
                        "no submission before deadline");
  }
  const std::int64_t latency = answered_at_ms_ - pq.issued_at_ms;
  if (!answer_) return make_outcome(ResponseStatus::input_rejected, latency, "proctor: cannot be asked");
  if (latency > timeout.count()) {
    return make_outcome(ResponseStatus::timed_out, latency, "submitted after deadline");
  }
  ResponseOutcome o = make_outcome(ResponseStatus::delivered, latency);
  o.items = {*answer_};
  return o;
}

std::optional<ProctorQuestion> ProctorChannel::current() const {
  std::lock_guard lock(mutex_);
  if (answered_) return std::nullopt;
  return current_;
}

std::optional<ProctorQuestion> ProctorChannel::wait_for_question(milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return (current_ && !answered_) || closed_; });
  if (current_ && !answered_) return current_;
  return std::nullopt;
}

ProctorSubmit ProctorChannel::submit(const std::string& question_id, std::optional<std::string> answer) {
  std::lock_guard lock(mutex_);
  if (closed_) return ProctorSubmit::closed;
  if (!current_ || answered_ || current_->question_id != question_id) return ProctorSubmit::stale;
  answered_ = true;
  answer_ = std::move(answer);
  answered_at_ms_ = clock_();
  cv_.notify_all();
  return ProctorSubmit::accepted;
}

ProctorSubmit ProctorChannel::submit_answer(const std::string& question_id, std::string answer) {
  return submit(question_id, std::move(answer));
}

ProctorSubmit ProctorChannel::cannot_ask(const std::string& question_id) {
  return submit(question_id, std::nullopt);
}

void ProctorChannel::close() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  cv_.notify_all();
}

bool ProctorChannel::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

ResponseOutcome ask_human(ProctorChannel& channel, const Question& question, milliseconds timeout) {
  return channel.administer(question, timeout);
}

HumanSubject::HumanSubject(SubjectDescriptor descriptor, std::shared_ptr<ProctorChannel> channel)
    : Subject(std::move(descriptor)), channel_(std::move(channel)) {
  if (!channel_) throw Error("invalid_subject", "human subject needs a proctor channel");
}

ResponseOutcome HumanSubject::respond(const Question& question, milliseconds timeout) {
  return ask_human(*channel_, question, timeout);
}

// --- registry ---------------------------------------------------------------------

namespace {

nlohmann::json modalities_to_json(const ModalitySet& set) {
  auto arr = nlohmann::json::array();
  for (Modality m : set) arr.push_back(to_string(m));
  return arr;
}

ModalitySet modalities_from_json(const nlohmann::json& arr) {
  ModalitySet set;
  for (const auto& m : arr) set.insert(modality_from_string(m.get<std::string>()));
  return set;
}

}  // namespace

nlohmann::json descriptor_to_json(const SubjectDescriptor& d) {
  nlohmann::json j = {{"subject_id", d.subject_id},
                      {"display_name", d.display_name},
                      {"kind", to_string(d.kind)},
                      {"input_modalities", modalities_to_json(d.input_modalities)},
                      {"output_modalities", modalities_to_json(d.output_modalities)},
                      {"region", d.region},
                      {"label", d.label}};
  if (d.endpoint) {
    j["endpoint_config"] = {{"url_template", d.endpoint->url_template},
                            {"extract", {{"pattern", d.endpoint->extract.pattern},
                                         {"group", d.endpoint->extract.group}}},
                            {"retries", d.endpoint->retries},
                            {"backoff_ms", d.endpoint->backoff.count()}};
  }
  return j;
}

SubjectDescriptor descriptor_from_json(const nlohmann::json& j) {
  SubjectDescriptor d;
  d.subject_id = j.at("subject_id").get<std::string>();
  d.display_name = j.value("display_name", d.subject_id);
  d.kind = subject_kind_from_string(j.at("kind").get<std::string>());
  d.input_modalities = modalities_from_json(j.value("input_modalities", nlohmann::json::array()));
  d.output_modalities = modalities_from_json(j.value("output_modalities", nlohmann::json::array()));
  d.region = j.value("region", "");
  d.label = j.value("label", d.display_name);
  if (j.contains("endpoint_config")) {
    const auto& e = j["endpoint_config"];
    EndpointConfig cfg;
    cfg.url_template = e.at("url_template").get<std::string>();
    cfg.extract.pattern = e.at("extract").at("pattern").get<std::string>();
    cfg.extract.group = e.at("extract").value("group", 1);
    cfg.retries = e.value("retries", 2);
    cfg.backoff = milliseconds(e.value("backoff_ms", 500));
    d.endpoint = std::move(cfg);
  }
  return d;
}

SubjectRegistry::SubjectRegistry(std::vector<SubjectEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    if (!ids.insert(e.descriptor.subject_id).second) {
      throw Error("invalid_registry", "duplicate subject id '" + e.descriptor.subject_id + "'");
    }
    if (e.descriptor.kind == SubjectKind::http_engine && !e.descriptor.endpoint) {
      throw Error("invalid_registry", "http_engine '" + e.descriptor.subject_id + "' lacks endpoint_config");
    }
  }
}

SubjectRegistry SubjectRegistry::load(const nlohmann::json& document) {
  if (!document.is_array()) throw Error("invalid_registry", "subject registry must be a JSON array");
  std::vector<SubjectEntry> entries;
  try {
    for (const auto& item : document) entries.push_back({descriptor_from_json(item), item});
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_registry", std::string("malformed subject descriptor: ") + e.what());
  }
  return SubjectRegistry(std::move(entries));
}

SubjectRegistry SubjectRegistry::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open subject registry " + path.string());
  try {
    return load(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("invalid_registry", std::string("registry parse failure: ") + e.what());
  }
}

const SubjectEntry& SubjectRegistry::at(const std::string& subject_id) const {
  for (const auto& e : entries_) {
    if (e.descriptor.subject_id == subject_id) return e;
  }
  throw Error("unknown_subject", "no subject '" + subject_id + "' in registry");
}

bool SubjectRegistry::contains(const std::string& subject_id) const {
  for (const auto& e : entries_) {
    if (e.descriptor.subject_id == subject_id) return true;
  }
  return false;
}

namespace {

ScriptedReply reply_from_json(const nlohmann::json& j) {
  ScriptedReply r;
  if (j.is_string()) {
    r.items = {j.get<std::string>()};
  } else if (j.is_array()) {
    r.items = j.get<std::vector<std::string>>();
  } else {
    r.items = j.at("items").get<std::vector<std::string>>();
    r.latency = milliseconds(j.value("latency_ms", 0));
  }
  return r;
}

std::shared_ptr<Subject> make_scripted(const SubjectEntry& entry) {
  std::map<std::string, ScriptedReply> by_prompt;
  std::map<std::string, ScriptedReply> by_question;
  std::optional<ScriptedReply> fallback;
  if (entry.spec.contains("script")) {
    const auto& script = entry.spec["script"];
    const auto prompts = script.value("prompts", nlohmann::json::object());
    const auto questions = script.value("questions", nlohmann::json::object());
    for (const auto& [prompt, reply] : prompts.items()) {
      by_prompt.emplace(prompt, reply_from_json(reply));
    }
    for (const auto& [qid, reply] : questions.items()) {
      by_question.emplace(qid, reply_from_json(reply));
    }
    if (script.contains("fallback")) fallback = reply_from_json(script["fallback"]);
  }
  auto subject = std::make_shared<ScriptedSubject>(entry.descriptor, std::move(by_prompt), fallback);
  for (auto& [qid, reply] : by_question) subject->set_reply_for_question(qid, std::move(reply));
  return subject;
}

std::shared_ptr<Subject> make_simulated(const SubjectEntry& entry) {
  auto world = std::make_shared<model::World>();
  model::StandardIntelligentMachine machine(entry.descriptor.input_modalities,
                                            entry.descriptor.output_modalities);
  if (entry.spec.contains("machine")) {
    const auto knowledge = entry.spec["machine"].value("knowledge", nlohmann::json::array());
    for (const auto& fact : knowledge) {
      machine.preload(world->make_element(fact.at("content").get<std::string>(),
                                          modality_from_string(fact.value("modality", "text")),
                                          model::Origin::world,
                                          text::normalize(fact.value("key", ""))));
    }
  }
  return std::make_shared<SimulatedMachineSubject>(entry.descriptor, std::move(machine), std::move(world));
}

}  // namespace

std::shared_ptr<Subject> SubjectRegistry::instantiate(const std::string& subject_id,
                                                      std::shared_ptr<ProctorChannel> channel) const {
  const SubjectEntry& entry = at(subject_id);
  try {
    switch (entry.descriptor.kind) {
      case SubjectKind::scripted: return make_scripted(entry);
      case SubjectKind::simulated_machine: return make_simulated(entry);
      case SubjectKind::http_engine: return std::make_shared<HttpEngineSubject>(entry.descriptor);
      case SubjectKind::human:
        return std::make_shared<HumanSubject>(entry.descriptor,
                                              channel ? std::move(channel) : std::make_shared<ProctorChannel>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_registry", "subject '" + subject_id + "': " + e.what());
  }
  throw Error("invalid_subject_kind", "unsupported subject kind");
}

}  // namespace aiq
