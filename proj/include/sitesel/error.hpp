#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sitesel {

/// Machine-readable error category. Every engine error carries exactly one.
enum class ErrorCode {
  unknown_site,
  unknown_factor,
  unknown_level,
  bad_request,
  bad_predicate,
  precondition_failed,
  parse_error,
  validation_failed,
  io_error,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_site: return "unknown_site";
    case ErrorCode::unknown_factor: return "unknown_factor";
    case ErrorCode::unknown_level: return "unknown_level";
    case ErrorCode::bad_request: return "bad_request";
    case ErrorCode::bad_predicate: return "bad_predicate";
    case ErrorCode::precondition_failed: return "precondition_failed";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::validation_failed: return "validation_failed";
    case ErrorCode::io_error: return "io_error";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Error unknown_site(std::string_view id) {
  return Error(ErrorCode::unknown_site, "unknown site '" + std::string(id) + "'");
}

inline Error unknown_factor(std::string_view id) {
  return Error(ErrorCode::unknown_factor, "unknown factor '" + std::string(id) + "'");
}

inline Error precondition(const std::string& message) {
  return Error(ErrorCode::precondition_failed, message);
}

/// Parse failure annotated with the source file and 1-based line, when known.
inline Error parse_error(std::string_view file, std::size_t line, const std::string& message) {
  std::string where(file);
  if (line > 0) where += ":" + std::to_string(line);
  if (!where.empty()) where += ": ";
  return Error(ErrorCode::parse_error, where + message);
}

}  // namespace sitesel
