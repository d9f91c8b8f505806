#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ser {

// Error with a stable code string. The CLI prints these as a single
// "error: <code>: <detail>" line and exits nonzero, so codes are part of
// the tool's machine-readable surface.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace ser
