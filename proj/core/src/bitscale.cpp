#include "mmcirt/bitscale.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "mmcirt/csv.hpp"
#include "mmcirt/error.hpp"
#include "mmcirt/scoring.hpp"
#include "mmcirt/stats.hpp"

namespace mmcirt {

double surprisal(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("surprisal: probability outside [0, 1]");
  if (p == 0.0) return std::numeric_limits<double>::infinity();
  return -std::log2(p);
}

double entropy_bits(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log2(p);
  return std::max(h, 0.0);
}

double entropy(const IrtModel& model, std::size_t item, double theta) {
  return entropy_bits(model.probs(item, theta));
}

EntropyCurve entropy_curve(const IrtModel& model, std::size_t item, std::span<const double> grid) {
  EntropyCurve c{item, std::vector<double>(grid.begin(), grid.end()), {}};
  c.bits.reserve(grid.size());
  for (double t : grid) c.bits.push_back(entropy(model, item, t));
  return c;
}

BitScaleTable build_bitscale(std::span<const EntropyCurve> curves, double theta0) {
  if (curves.empty()) fail_config("bit scale needs at least one item");
  const auto& grid = curves.front().theta;
  if (grid.size() < 2) fail_config("bit-scale grid needs at least two points");
  for (const auto& c : curves)
    if (c.theta != grid || c.bits.size() != grid.size())
      throw std::invalid_argument("build_bitscale: curves must share one grid");
  const auto anchor = std::find(grid.begin(), grid.end(), theta0);
  if (anchor == grid.end()) throw std::invalid_argument("build_bitscale: theta0 is not a grid point");
  const auto k0 = static_cast<std::size_t>(anchor - grid.begin());

  BitScaleTable t;
  t.theta0 = theta0;
  t.theta = grid;
  t.total.assign(grid.size(), 0.0);
  for (const auto& c : curves) {
    std::vector<double> b(grid.size(), 0.0);
    for (std::size_t k = k0 + 1; k < grid.size(); ++k) b[k] = b[k - 1] + std::abs(c.bits[k] - c.bits[k - 1]);
    for (std::size_t k = 0; k < grid.size(); ++k) t.total[k] += b[k];
    t.item_bits.push_back(std::move(b));
  }
  return t;
}

BitScaleTable build_bitscale(const IrtModel& model, double theta0, std::size_t grid_size) {
  if (grid_size < 2) fail_config("bit-scale grid size must be at least 2");
  const auto b = model.bounds();
  if (!(theta0 >= b.lo && theta0 <= b.hi)) fail_config("theta0 lies outside the model's theta bounds");
  auto grid = linspace(b.lo, b.hi, grid_size);
  const auto pos = std::lower_bound(grid.begin(), grid.end(), theta0);
  if (pos == grid.end() || *pos != theta0) grid.insert(pos, theta0);

  std::vector<EntropyCurve> curves;
  curves.reserve(model.n_items());
  for (std::size_t j = 0; j < model.n_items(); ++j) curves.push_back(entropy_curve(model, j, grid));
  return build_bitscale(curves, theta0);
}

BitScore bit_score(const BitScaleTable& table, double theta) {
  if (!std::isfinite(theta)) fail_numeric("cannot convert a non-finite theta to bits");
  const auto& g = table.theta;
  BitScore s;
  s.items.resize(table.n_items());
  std::size_t k = 0;
  double w = 0.0;
  if (theta <= g.front()) {
    k = 0;
  } else if (theta >= g.back()) {
    k = g.size() - 2;
    w = 1.0;
  } else {
    k = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), theta) - g.begin()) - 1;
    w = (theta - g[k]) / (g[k + 1] - g[k]);
  }
  for (std::size_t j = 0; j < table.n_items(); ++j) {
    const auto& b = table.item_bits[j];
    s.items[j] = w == 0.0 ? b[k] : w == 1.0 ? b[k + 1] : b[k] + w * (b[k + 1] - b[k]);
    s.total += s.items[j];
  }
  return s;
}

Theta0Mode parse_theta0_mode(std::string_view name) {
  if (name == "guessing") return Theta0Mode::guessing;
  if (name == "lower") return Theta0Mode::lower;
  fail_config("unknown theta0 mode '" + std::string(name) + "' (expected guessing or lower)");
}

double calibrate_theta0(const IrtModel& model, std::size_t n_guessers, std::uint64_t seed, unsigned threads) {
  if (n_guessers == 0) fail_config("theta0 calibration needs at least one guesser");
  std::mt19937_64 rng(seed);
  std::vector<int> codes(n_guessers * model.n_items());
  for (std::size_t i = 0; i < n_guessers; ++i)
    for (std::size_t j = 0; j < model.n_items(); ++j) {
      std::uniform_int_distribution<int> pick(0, model.options(j) - 1);
      codes[i * model.n_items() + j] = pick(rng);
    }
  std::vector<std::string> ids(n_guessers);
  for (std::size_t i = 0; i < n_guessers; ++i) ids[i] = std::to_string(i);
  const ResponseMatrix guessers(model.items(), std::move(ids), std::move(codes), model.missing_as_category());
  MlOptions opts;
  opts.threads = threads;
  return median(score_ml(model, guessers, opts).theta);
}

double resolve_theta0(const IrtModel& model, Theta0Mode mode, std::uint64_t seed, unsigned threads) {
  if (mode == Theta0Mode::lower) return model.bounds().lo;
  return calibrate_theta0(model, 1000, seed, threads);
}

void write_bitscale(const BitScaleTable& table, const IrtModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  std::vector<std::string> cells{"theta"};
  for (const auto& item : model.items()) cells.push_back("B_" + item.id);
  cells.push_back("B");
  csv::write_row(out, cells);
  for (std::size_t k = 0; k < table.theta.size(); ++k) {
    cells.assign(1, csv::format_double(table.theta[k]));
    for (const auto& b : table.item_bits) cells.push_back(csv::format_double(b[k]));
    cells.push_back(csv::format_double(table.total[k]));
    csv::write_row(out, cells);
  }
}

}  // namespace mmcirt
