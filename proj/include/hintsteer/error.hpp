#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hintsteer {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  kConfig,
  kData,
  kProvider,
  kDatabase,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error ConfigError(const std::string& msg) { return {ErrorKind::kConfig, msg}; }
inline Error DataError(const std::string& msg) { return {ErrorKind::kData, msg}; }
inline Error ProviderError(const std::string& msg) { return {ErrorKind::kProvider, msg}; }
inline Error DatabaseError(const std::string& msg) { return {ErrorKind::kDatabase, msg}; }

inline int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kData: return 3;
    case ErrorKind::kProvider: return 4;
    case ErrorKind::kDatabase: return 5;
  }
  return 1;
}

inline std::string_view KindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kProvider: return "provider";
    case ErrorKind::kDatabase: return "dbms";
  }
  return "unknown";
}

}  // namespace hintsteer
