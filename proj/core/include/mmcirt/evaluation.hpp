#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

#include "mmcirt/data.hpp"
#include "mmcirt/models.hpp"
#include "mmcirt/scoring.hpp"
#include "mmcirt/training.hpp"

namespace mmcirt {

/// Sum over items of the clamped log-probability of each person's response.
std::vector<double> person_loglik(const IrtModel& model, const ResponseMatrix& rm, std::span<const double> theta);

/// Mean per-person log-likelihood after scoring `test` with `method`.
double holdout_loglik(const FittedModel& fitted, const ResponseMatrix& test, ScoreMethod method, unsigned threads = 1);

/// 1 - p(observed | theta), row-major N x J.
std::vector<double> per_response_residuals(const IrtModel& model, const ResponseMatrix& rm,
                                           std::span<const double> theta);

/// Person indices per group, sorted by theta with index order breaking ties.
/// Sizes differ by at most one; the first N % G groups are the larger ones.
std::vector<std::vector<std::size_t>> theta_groups(std::span<const double> theta, std::size_t groups);

struct GroupCell {
  std::size_t group = 0;
  std::size_t item = 0;
  int category = 0;
  double observed = 0.0;  // P
  double expected = 0.0;  // p
  double residual = 0.0;  // R = P - p
  double standardized = 0.0;
};

struct GroupedResiduals {
  std::vector<std::size_t> group_sizes;
  std::vector<GroupCell> cells;  // group-major, then item, then category
};

GroupedResiduals grouped_residuals(const IrtModel& model, const ResponseMatrix& rm, std::span<const double> theta,
                                   std::size_t groups = 10);

struct FitReport {
  ScoreMethod method = ScoreMethod::ml;
  std::size_t persons = 0;
  double mean_loglik = 0.0;                  // per person
  std::vector<double> item_loglik;           // per item, mean over persons
  double mean_residual = 0.0;                // mean of 1 - p(observed)
  std::vector<double> item_mean_residual;
  GroupedResiduals grouped;
};

FitReport evaluate(const FittedModel& fitted, const ResponseMatrix& test, ScoreMethod method, std::size_t groups = 10,
                   unsigned threads = 1);
FitReport evaluate(const IrtModel& model, const ResponseMatrix& test, const ThetaEstimates& scores,
                   std::size_t groups = 10);

nlohmann::json report_to_json(const FitReport& report, const IrtModel& model);
/// Long format: group, item, option, n, P, p, R, SR.
void write_grouped_residuals(const GroupedResiduals& g, const IrtModel& model, const std::filesystem::path& path);
/// person, item, residual.
void write_response_residuals(const ResponseMatrix& rm, std::span<const double> residuals,
                              const std::filesystem::path& path);

struct CvPoint {
  double learning_rate = 0.04;
  std::size_t batch_size = 128;
  std::size_t hidden_layers = 1;
};

/// batch {32, 64, 128, 256} x lr {0.02, 0.04, 0.08, 0.12}, times layers
/// {1, 3, 5, 7} for MMC.
std::vector<CvPoint> default_cv_grid(Variant variant);

struct CvResult {
  CvPoint point;
  std::vector<double> fold_ml;  // holdout log-likelihood per fold; NaN where the fit failed
  std::vector<double> fold_nn;
  double mean_ml = 0.0;         // over successful folds; -inf when all failed
  double mean_nn = 0.0;
  std::size_t failures = 0;
  std::string last_error;
};

/// Ranked by mean ML holdout log-likelihood, best first; ties keep grid order.
std::vector<CvResult> cross_validate(Variant variant, const ResponseMatrix& train, std::span<const CvPoint> grid,
                                     const Hyperparams& base, std::size_t folds = 5, std::uint64_t seed = 0,
                                     unsigned threads = 1);

void write_cv_results(std::span<const CvResult> results, const std::filesystem::path& path);

}  // namespace mmcirt
