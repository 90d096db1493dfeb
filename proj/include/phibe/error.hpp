#pragma once

#include <stdexcept>
#include <string>

namespace phibe {

enum class ErrorKind {
  kInvalidArgument,  // precondition violated by the caller
  kConfig,           // experiment configuration rejected before any run
  kNumerical,        // singular system, non-convergence, blow-up
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_argument(const std::string& what) {
  throw Error(ErrorKind::kInvalidArgument, what);
}
[[noreturn]] inline void fail_config(const std::string& what) {
  throw Error(ErrorKind::kConfig, what);
}
[[noreturn]] inline void fail_numerical(const std::string& what) {
  throw Error(ErrorKind::kNumerical, what);
}

}  // namespace phibe
