#ifndef ESGRL_ERROR_HPP_
#define ESGRL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace esgrl {

enum class ErrorKind {
  kInvalidArgument,
  kParse,
  kValidation,
  kNotFound,
  kIo,
  kState,
  kNumeric,
  kConvergence,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the core library. The C API maps `kind()` onto
// its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace esgrl

#endif  // ESGRL_ERROR_HPP_
