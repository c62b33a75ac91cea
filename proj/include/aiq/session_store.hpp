#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "aiq/session.hpp"

namespace aiq {

// Append-only JSON-lines log per session under one directory. Each line is an
// event object carrying a CRC-32 of its own canonical serialisation, so a
// damaged line is detected even when it still parses.
class SessionStore : public EventSink {
 public:
  explicit SessionStore(std::filesystem::path directory);

  void append(const StoreEvent& ev) override;

  struct Loaded {
    Session session;
    std::vector<StoreEvent> events;
    std::vector<std::string> warnings;
  };

  // Replays one log. A damaged final line is cut off (and the file truncated
  // to the last good event) with a warning; damage before that throws
  // aiq::Error("corrupt_event") naming the sequence number.
  Loaded load(const std::string& session_id);
  bool exists(const std::string& session_id) const;
  std::vector<std::string> list() const;

  std::filesystem::path path_for(const std::string& session_id) const;
  const std::filesystem::path& directory() const noexcept { return directory_; }

  static std::string encode_line(const StoreEvent& ev);

 private:
  std::mutex& lock_for(const std::string& session_id);

  std::filesystem::path directory_;
  std::mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_locks_;
};

}  // namespace aiq
