#pragma once

#include <stdexcept>
#include <string>

namespace mgsde {

enum class ErrorCode {
  invalid_argument = 1,
  config = 2,
  numeric = 3,
  io = 4,
  check_failed = 5,
};

// All recoverable failures in the library are reported as mgsde::Error. The
// C API maps the code onto mgsde_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::invalid_argument, what);
}

}  // namespace mgsde
