#pragma once

#include <string>
#include <vector>

namespace mmcirt::cli {

/// Runs one invocation (arguments without the program name) and returns the
/// process exit code. Errors are reported on stderr as one line
/// "error: CODE: message".
int run(std::vector<std::string> args);

}  // namespace mmcirt::cli
