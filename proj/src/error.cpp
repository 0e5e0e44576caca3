#include "evstream/error.hpp"

namespace evs {

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Parameter: return "parameter";
    case ErrorCategory::Ordering: return "ordering";
    case ErrorCategory::CorruptRecord: return "corrupt-record";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Accounting: return "accounting";
    case ErrorCategory::Framing: return "framing";
    case ErrorCategory::Protocol: return "protocol";
    case ErrorCategory::IncompleteWindow: return "incomplete-window";
    case ErrorCategory::NoData: return "no-data";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Config:
    case ErrorCategory::Parameter: return 2;
    case ErrorCategory::Data:
    case ErrorCategory::CorruptRecord:
    case ErrorCategory::Ordering:
    case ErrorCategory::NoData:
    case ErrorCategory::Accounting: return 3;
    case ErrorCategory::Protocol:
    case ErrorCategory::Framing:
    case ErrorCategory::IncompleteWindow: return 4;
    case ErrorCategory::Io: return 5;
  }
  return 1;
}

}  // namespace evs
