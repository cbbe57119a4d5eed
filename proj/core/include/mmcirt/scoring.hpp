#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mmcirt/data.hpp"
#include "mmcirt/models.hpp"
#include "mmcirt/training.hpp"

namespace mmcirt {

enum class ScoreMethod { nn, ml };

std::string_view to_string(ScoreMethod m);
/// Accepts "nn" or "ml".
ScoreMethod parse_score_method(std::string_view name);

struct ThetaEstimates {
  ScoreMethod method = ScoreMethod::ml;
  std::vector<double> theta;
};

struct MlOptions {
  std::size_t grid_points = 201;
  double tolerance = 1e-8;     // golden-section bracket width
  std::size_t candidates = 3;  // grid local maxima refined
  unsigned threads = 1;
};

/// Encoder pass-through, clamped to the model's theta bounds.
ThetaEstimates score_nn(const FittedModel& fitted, const ResponseMatrix& rm);

/// Bounded maximum likelihood: grid scan, then golden-section refinement of
/// the best local maxima. Ties resolve to the lower theta.
ThetaEstimates score_ml(const IrtModel& model, const ResponseMatrix& rm, const MlOptions& opts = {});
ThetaEstimates score_ml(const FittedModel& fitted, const ResponseMatrix& rm, const MlOptions& opts = {});

/// Single response vector (codes already in category space).
double ml_theta(const IrtModel& model, std::span<const int> codes, const MlOptions& opts = {});

ThetaEstimates score(const FittedModel& fitted, const ResponseMatrix& rm, ScoreMethod method, unsigned threads = 1);

/// Per-item log-probability of every category on a theta grid, laid out
/// grid-point-major: table[g * K + offset_j + m].
class LogProbTable {
 public:
  LogProbTable(const IrtModel& model, std::vector<double> grid);

  const std::vector<double>& grid() const noexcept { return grid_; }
  double sum(std::size_t g, std::span<const int> codes) const;

 private:
  std::vector<double> grid_;
  std::vector<std::size_t> offsets_;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// `count` equally spaced points from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t count);

/// Scores CSV: person id, then one column per supplied estimate set.
void write_scores(const ResponseMatrix& rm, std::span<const ThetaEstimates> estimates,
                  const std::filesystem::path& path);

}  // namespace mmcirt
