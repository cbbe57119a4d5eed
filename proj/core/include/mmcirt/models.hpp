#pragma once

#include <Eigen/Core>
#include <array>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mmcirt/data.hpp"

namespace mmcirt {

enum class Variant { nr, mmc };

std::string_view to_string(Variant v);
/// Accepts "nr" or "mmc"; anything else is a config error.
Variant parse_variant(std::string_view name);

/// Probabilities are floored here before taking logs.
inline constexpr double kProbabilityFloor = 1e-10;

struct ThetaBounds {
  double lo = -10.0;
  double hi = 10.0;
};

// Scalar activations used by the monotone subnets. `elu` uses a = 1.
namespace act {
double elu(double y);
double elu_derivative(double y);
/// Convex branch: ELU(y).
inline double convex(double y) { return elu(y); }
/// Concave branch: -ELU(-y).
inline double concave(double y) { return -elu(-y); }
/// Bounded branch, continuous at 0 and saturating at +-2.
double saturated(double y);
double convex_derivative(double y);
double concave_derivative(double y);
double saturated_derivative(double y);
/// Activation by neuron slot: 0 convex, 1 concave, 2 saturated.
double combined(int slot, double y);
double combined_derivative(int slot, double y);

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);
}  // namespace act

/// Nominal response item: p(m | theta) = softmax_m(slope_m * theta + intercept_m).
struct NrItemParams {
  std::vector<double> slope;
  std::vector<double> intercept;
};

/// Three-neuron layer of a monotone subnet. `raw_weights` is 3 x fan_in,
/// row-major, stored before the softplus reparameterization; fan_in is 1 for
/// the first layer and 3 afterwards.
struct MonotoneLayer {
  std::vector<double> raw_weights;
  std::array<double, 3> bias{};

  std::size_t fan_in() const noexcept { return raw_weights.size() / 3; }
};

/// delta(theta): stack of monotone layers whose final activations are summed.
struct MonotoneSubnet {
  std::vector<MonotoneLayer> layers;

  std::size_t depth() const noexcept { return layers.size(); }
};

double monotone_forward(const MonotoneSubnet& net, double theta);

/// Monotone multiple choice item. Option m has its own subnet delta_m; the
/// correct option's predictor uses the sum of every delta on the item:
///   z_m = tau * delta_m + b_m             (m != correct)
///   z_c = tau * sum_t delta_t + b_c
struct MmcItemParams {
  double tau = 1.0;
  std::vector<double> intercept;
  std::vector<MonotoneSubnet> subnets;
};

void nr_probs(const NrItemParams& params, double theta, std::span<double> out);
std::vector<double> nr_probs(const NrItemParams& params, double theta);
void mmc_probs(const MmcItemParams& params, int correct, double theta, std::span<double> out);
std::vector<double> mmc_probs(const MmcItemParams& params, int correct, double theta);

/// In-place, overflow-safe softmax.
void softmax_inplace(std::span<double> z);

/// A complete decoder: item metadata plus NR or MMC parameters for every item.
class IrtModel {
 public:
  using Items = std::variant<std::vector<NrItemParams>, std::vector<MmcItemParams>>;

  IrtModel() = default;
  IrtModel(std::vector<ResponseMatrix::Item> items, bool missing_as_category, Items params,
           ThetaBounds bounds = {});

  Variant variant() const noexcept {
    return std::holds_alternative<std::vector<NrItemParams>>(params_) ? Variant::nr : Variant::mmc;
  }
  std::size_t n_items() const noexcept { return items_.size(); }
  const std::vector<ResponseMatrix::Item>& items() const noexcept { return items_; }
  bool missing_as_category() const noexcept { return missing_as_category_; }
  int categories(std::size_t j) const { return items_[j].options + (missing_as_category_ ? 1 : 0); }
  int options(std::size_t j) const { return items_[j].options; }
  int correct_option(std::size_t j) const { return items_[j].correct; }
  std::size_t category_offset(std::size_t j) const { return offsets_[j]; }
  std::size_t total_categories() const noexcept { return offsets_.back(); }
  ThetaBounds bounds() const noexcept { return bounds_; }
  void set_bounds(ThetaBounds b);

  const std::vector<NrItemParams>& nr_items() const { return std::get<std::vector<NrItemParams>>(params_); }
  const std::vector<MmcItemParams>& mmc_items() const { return std::get<std::vector<MmcItemParams>>(params_); }

  void probs(std::size_t j, double theta, std::span<double> out) const;
  std::vector<double> probs(std::size_t j, double theta) const;
  /// Sum over items of log max(p_j(code_j | theta), floor).
  double log_likelihood(double theta, std::span<const int> codes) const;

  /// Trainable decoder parameter count (NR: sum 2 M_j; MMC: tau, intercepts, subnets).
  std::size_t parameter_count() const;

  /// Throws ITEM_MISMATCH unless `rm` has the same items and categories.
  void check_compatible(const ResponseMatrix& rm) const;
  IrtModel select_items(std::span<const std::size_t> items) const;

 private:
  std::vector<ResponseMatrix::Item> items_;
  bool missing_as_category_ = false;
  Items params_;
  ThetaBounds bounds_;
  std::vector<std::size_t> offsets_{0};
};

/// Row i holds every item's probability block at theta[i], laid out like
/// the one-hot encoding.
Eigen::MatrixXd model_probs(const IrtModel& model, std::span<const double> theta);

nlohmann::json model_to_json(const IrtModel& model);
IrtModel model_from_json(const nlohmann::json& j);

}  // namespace mmcirt
