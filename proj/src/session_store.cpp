#include "aiq/session_store.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <zlib.h>

#include "aiq/error.hpp"

namespace aiq {

namespace {

std::string checksum(const std::string& body) {
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  return fmt::format("{:08x}", crc);
}

// Ids become file names; anything outside a conservative set is replaced.
std::string file_stem(const std::string& session_id) {
  std::string out;
  for (unsigned char c : session_id) {
    out += (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '@') ? static_cast<char>(c) : '_';
  }
  return out;
}

}  // namespace

SessionStore::SessionStore(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

std::filesystem::path SessionStore::path_for(const std::string& session_id) const {
  return directory_ / (file_stem(session_id) + ".jsonl");
}

std::mutex& SessionStore::lock_for(const std::string& session_id) {
  std::lock_guard guard(registry_mutex_);
  auto& slot = session_locks_[session_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string SessionStore::encode_line(const StoreEvent& ev) {
  nlohmann::json j = event_to_json(ev);
  j["crc"] = checksum(j.dump());
  return j.dump();
}

void SessionStore::append(const StoreEvent& ev) {
  std::lock_guard guard(lock_for(ev.session_id));
  std::ofstream out(path_for(ev.session_id), std::ios::app | std::ios::binary);
  if (!out) throw Error("io_error", "cannot append to log of session " + ev.session_id);
  out << encode_line(ev) << '\n';
  out.flush();
  if (!out) throw Error("io_error", "write failed for session " + ev.session_id);
}

bool SessionStore::exists(const std::string& session_id) const {
  return std::filesystem::exists(path_for(session_id));
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  if (!std::filesystem::exists(directory_)) return ids;
  for (const auto& entry : std::filesystem::directory_iterator(directory_)) {
    if (entry.path().extension() != ".jsonl") continue;
    // The id inside the log is authoritative; the file name may be sanitised.
    std::ifstream in(entry.path());
    std::string first;
    if (!std::getline(in, first)) continue;
    try {
      ids.push_back(nlohmann::json::parse(first).at("session_id").get<std::string>());
    } catch (const std::exception&) {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

SessionStore::Loaded SessionStore::load(const std::string& session_id) {
  std::lock_guard guard(lock_for(session_id));
  const auto path = path_for(session_id);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("unknown_session", "no session '" + session_id + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();
  in.close();

  struct Line {
    std::size_t offset;
    std::string text;
  };
  std::vector<Line> lines;
  for (std::size_t pos = 0; pos < content.size();) {
    auto nl = content.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? content.size() : nl;
    lines.push_back({pos, content.substr(pos, end - pos)});
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().text.empty()) lines.pop_back();

  Loaded loaded;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::uint64_t expected = i + 1;
    std::string failure;
    StoreEvent ev;
    try {
      nlohmann::json j = nlohmann::json::parse(lines[i].text);
      const std::string stored = j.at("crc").get<std::string>();
      j.erase("crc");
      if (checksum(j.dump()) != stored) throw Error("crc", "checksum mismatch");
      ev = event_from_json(j);
      if (ev.sequence != expected) throw Error("seq", fmt::format("sequence {} out of order", ev.sequence));
      if (ev.session_id != session_id) throw Error("session", "event belongs to " + ev.session_id);
      Session next = loaded.session;
      apply_event(next, ev);
      loaded.session = std::move(next);
      loaded.events.push_back(std::move(ev));
      continue;
    } catch (const std::exception& e) {
      failure = e.what();
    }

    if (i + 1 == lines.size()) {
      loaded.warnings.push_back(
          fmt::format("session {}: dropped damaged trailing event at seq {} ({})", session_id, expected, failure));
      spdlog::warn(loaded.warnings.back());
      std::filesystem::resize_file(path, lines[i].offset);
      break;
    }
    throw Error("corrupt_event", fmt::format("corrupt event at seq {} in session {}: {}", expected,
                                             session_id, failure));
  }
  if (loaded.events.empty()) {
    throw Error("unknown_session", "session '" + session_id + "' has no readable events");
  }
  return loaded;
}

}  // namespace aiq
