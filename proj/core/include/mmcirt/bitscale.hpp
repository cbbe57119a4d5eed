#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mmcirt/models.hpp"

namespace mmcirt {

/// -log2 p in bits. p = 0 gives +infinity; p outside [0, 1] throws.
double surprisal(double p);
/// -sum p log2 p with 0 log 0 = 0.
double entropy_bits(std::span<const double> probs);
double entropy(const IrtModel& model, std::size_t item, double theta);

struct EntropyCurve {
  std::size_t item = 0;
  std::vector<double> theta;  // strictly increasing
  std::vector<double> bits;
};

EntropyCurve entropy_curve(const IrtModel& model, std::size_t item, std::span<const double> grid);

/// Cumulative total variation of every item's entropy, measured from theta0.
/// Grid points below theta0 carry zero bits.
struct BitScaleTable {
  double theta0 = 0.0;
  std::vector<double> theta;
  std::vector<std::vector<double>> item_bits;  // [item][grid point]
  std::vector<double> total;

  std::size_t n_items() const noexcept { return item_bits.size(); }
};

/// All curves must share one grid that contains theta0 exactly.
BitScaleTable build_bitscale(std::span<const EntropyCurve> curves, double theta0);
/// Uniform grid over the model bounds with theta0 inserted.
BitScaleTable build_bitscale(const IrtModel& model, double theta0, std::size_t grid_size = 1001);

struct BitScore {
  std::vector<double> items;
  double total = 0.0;
};

/// Linear interpolation in the table; theta outside the grid clamps to its ends.
BitScore bit_score(const BitScaleTable& table, double theta);

enum class Theta0Mode { guessing, lower };
Theta0Mode parse_theta0_mode(std::string_view name);

/// Median ML score of `n_guessers` simulated respondents choosing uniformly
/// among each item's answer options.
double calibrate_theta0(const IrtModel& model, std::size_t n_guessers = 1000, std::uint64_t seed = 0,
                        unsigned threads = 1);
double resolve_theta0(const IrtModel& model, Theta0Mode mode, std::uint64_t seed, unsigned threads = 1);

/// CSV: theta, B_<item>..., B.
void write_bitscale(const BitScaleTable& table, const IrtModel& model, const std::filesystem::path& path);

}  // namespace mmcirt
