#pragma once

#include <stdexcept>
#include <string>

namespace evs {

enum class ErrorCategory {
  Parameter,
  Ordering,
  CorruptRecord,
  Data,
  Accounting,
  Framing,
  Protocol,
  IncompleteWindow,
  NoData,
  Config,
  Io,
};

const char* to_string(ErrorCategory category) noexcept;

// All library failures are reported as Error; the category drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& what) {
  throw Error(category, what);
}

int exit_code(ErrorCategory category) noexcept;

}  // namespace evs
