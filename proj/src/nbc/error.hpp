#pragma once

#include <stdexcept>
#include <string>

namespace nbc {

enum class ErrorKind {
  invalid_argument,  // bad inputs, violated preconditions, malformed files
  numerical_failure, // non-finite state, lost positivity, solver blow-up
  io_failure,        // unreadable or unwritable files
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_invalid(const std::string& msg) {
  throw Error(ErrorKind::invalid_argument, msg);
}
[[noreturn]] inline void fail_numeric(const std::string& msg) {
  throw Error(ErrorKind::numerical_failure, msg);
}
[[noreturn]] inline void fail_io(const std::string& msg) {
  throw Error(ErrorKind::io_failure, msg);
}

} // namespace nbc
