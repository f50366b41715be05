#pragma once

#include <stdexcept>
#include <string>

namespace nova {

/// Failure category. The CLI maps each category onto a process exit code.
enum class ErrorKind {
  precondition,  // caller passed arguments that violate a documented contract
  config,        // malformed or out-of-range configuration
  data,          // unreadable, missing or shape-inconsistent input data
  numeric,       // non-finite values during training or sampling
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::precondition, what);
}

/// 0 success, 2 config error, 3 data error, 4 numeric failure.
int exit_code(ErrorKind kind) noexcept;

const char* to_string(ErrorKind kind) noexcept;

}  // namespace nova
