#pragma once

#include <stdexcept>
#include <string>

namespace aiq {

// Carries a short machine-readable code alongside the human message. The CLI
// prints both; the service maps codes onto HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace aiq
