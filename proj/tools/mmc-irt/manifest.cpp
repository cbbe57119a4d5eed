#include "manifest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "mmcirt/error.hpp"
#include "mmcirt/version.hpp"

namespace mmcirt::cli {

void write_manifest(const Manifest& m, const std::filesystem::path& dir) {
  nlohmann::json j{{"tool", "mmc-irt"},
                   {"version", std::string(kVersion)},
                   {"command", m.command},
                   {"argv", m.argv},
                   {"seed", m.seed},
                   {"outputs", m.outputs}};
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("IO_ERROR", "cannot open manifest '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    Manifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.outputs = j.value("outputs", std::vector<std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail_data("MALFORMED_MANIFEST", std::string("cannot read manifest: ") + e.what());
  }
}

}  // namespace mmcirt::cli
