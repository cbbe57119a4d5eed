#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mmcirt::cli {

struct Manifest {
  std::string command;
  std::vector<std::string> argv;  // resolved arguments, seed made explicit
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
};

void write_manifest(const Manifest& m, const std::filesystem::path& dir);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace mmcirt::cli
