#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mmcirt::cli {

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> dot_x;  // observed proportions, drawn as points
  std::vector<double> dot_y;
};

/// Line chart with probabilities on [0, 1] and a free x range.
void write_curve_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::vector<Curve>& curves);

}  // namespace mmcirt::cli
