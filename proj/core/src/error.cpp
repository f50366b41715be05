#include "nova/error.hpp"

namespace nova {

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::precondition:
    case ErrorKind::data:
      return 3;
    case ErrorKind::numeric:
      return 4;
  }
  return 1;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::precondition:
      return "precondition";
    case ErrorKind::config:
      return "config";
    case ErrorKind::data:
      return "data";
    case ErrorKind::numeric:
      return "numeric";
  }
  return "unknown";
}

}  // namespace nova
