#pragma once

#include <stdexcept>
#include <string>

namespace mmcirt {

/// Broad failure class; the CLI maps each to an exit code.
enum class ErrorKind { config, data, numeric };

/// Library-wide exception. `code()` is a stable machine-readable token such
/// as "CONFIG_INVALID" or "OUT_OF_RANGE_CODE".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

[[noreturn]] void fail_config(const std::string& message);
[[noreturn]] void fail_data(const std::string& code, const std::string& message);
[[noreturn]] void fail_numeric(const std::string& message);

}  // namespace mmcirt
