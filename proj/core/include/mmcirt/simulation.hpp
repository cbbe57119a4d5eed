#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mmcirt/data.hpp"
#include "mmcirt/models.hpp"
#include "mmcirt/training.hpp"

namespace mmcirt {

/// Latent trait distribution: a finite normal mixture. One component gives
/// a plain normal.
struct LatentDistribution {
  struct Component {
    double weight = 1.0;
    double mean = 0.0;
    double sd = 1.0;
  };
  std::vector<Component> components{{1.0, 0.0, 1.0}};

  static LatentDistribution standard_normal() { return {}; }
  /// 0.8 N(-0.8, 0.5^2) + 0.2 N(1.8, 1): right-skewed.
  static LatentDistribution skewed_mixture();

  double sample(std::mt19937_64& rng) const;
  double density(double x) const;
};

/// Option probabilities tabulated on a shared theta grid and linearly
/// interpolated (clamped outside the grid).
struct TabulatedItem {
  std::vector<std::vector<double>> probs;  // [grid point][option]
};

struct GeneratorSpec {
  std::vector<ResponseMatrix::Item> items;
  LatentDistribution latent;
  std::optional<IrtModel> model;  // parametric truth, or
  std::vector<double> grid;       // tabulated truth
  std::vector<TabulatedItem> tables;
  /// Probability that a response is missing: sigmoid(logit(rate) - slope * theta).
  double missing_rate = 0.0;
  double missing_slope = 0.0;

  std::size_t n_items() const noexcept { return items.size(); }
  /// True option probabilities of item j at theta (answer options only).
  std::vector<double> probs(std::size_t j, double theta) const;
  void validate() const;
};

/// Non-logistic tabulated items: the key rises from a guessing floor through
/// a blend of two logistics; distractors split the rest with shallow slopes.
GeneratorSpec synthetic_spec(std::size_t items, int options = 4, std::uint64_t seed = 0);
/// Parametric truth from an existing model.
GeneratorSpec model_spec(IrtModel model, LatentDistribution latent = {});

struct GeneratedData {
  ResponseMatrix responses;
  std::vector<double> true_theta;
};

GeneratedData generate(const GeneratorSpec& spec, std::size_t n, std::uint64_t seed);

/// Nested random item subsets: each length's subset contains all shorter
/// ones. Lengths must be ascending and at most `total`. Indices sorted.
std::vector<std::vector<std::size_t>> fixed_item_subsets(std::size_t total, std::span<const std::size_t> lengths,
                                                         std::uint64_t seed);

enum class Fitter { ae, mml };

struct SimModel {
  std::string name;
  Variant variant = Variant::nr;
  Fitter fitter = Fitter::ae;
  Hyperparams hp;
};

/// MMC-AE, NR-AE and NR-MML. The autoencoders train for the full epoch
/// budget without a validation split.
std::vector<SimModel> default_sim_models();

struct SimConfig {
  std::vector<std::size_t> lengths{20};
  std::vector<std::size_t> sample_sizes{1000};
  std::size_t replications = 20;
  std::size_t population = 6000;  // synthetic source size
  std::optional<ResponseMatrix> source;
  GeneratorSpec generator;
  std::vector<SimModel> models = default_sim_models();
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Per-replication outcome of one model. Log-likelihoods and residuals are
/// means per response on the evaluation complement.
struct SimReplicate {
  std::size_t length = 0;
  std::size_t sample_size = 0;
  std::size_t replication = 0;
  std::size_t model = 0;
  bool failed = false;
  std::string error;
  double loglik_ml = 0.0;
  double loglik_nn = 0.0;  // NaN for MML
  double resid_ml = 0.0;
  double resid_nn = 0.0;
};

struct SimCell {
  std::size_t length = 0;
  std::size_t sample_size = 0;
  std::string model;
  std::size_t count = 0;
  std::size_t failures = 0;
  bool se_defined = false;  // false with fewer than two successful replications
  double loglik_ml = 0.0, loglik_ml_se = 0.0;
  double loglik_nn = 0.0, loglik_nn_se = 0.0;
  double resid_ml = 0.0, resid_ml_se = 0.0;
  double resid_nn = 0.0, resid_nn_se = 0.0;
};

struct SimResult {
  std::vector<SimCell> cells;  // length, then sample size, then model
  std::vector<SimReplicate> replicates;
};

SimResult run_simulation(const SimConfig& cfg);

void write_sim_result(const SimResult& result, const std::filesystem::path& path);
/// Sidecar of generate: person, theta.
void write_true_theta(const GeneratedData& data, const std::filesystem::path& path);

}  // namespace mmcirt
