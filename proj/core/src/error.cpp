#include "mmcirt/error.hpp"

#include <utility>

namespace mmcirt {

Error::Error(ErrorKind kind, std::string code, const std::string& message)
    : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

void fail_config(const std::string& message) {
  throw Error(ErrorKind::config, "CONFIG_INVALID", message);
}

void fail_data(const std::string& code, const std::string& message) {
  throw Error(ErrorKind::data, code, message);
}

void fail_numeric(const std::string& message) {
  throw Error(ErrorKind::numeric, "NUMERIC_FAILURE", message);
}

}  // namespace mmcirt
