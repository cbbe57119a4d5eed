#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mmcirt/autodiff.hpp"
#include "mmcirt/data.hpp"
#include "mmcirt/models.hpp"

namespace mmcirt {

struct Hyperparams {
  double learning_rate = 0.04;
  std::size_t batch_size = 128;
  std::size_t epochs = 200;
  std::size_t hidden_layers = 1;  // monotone layers per MMC subnet
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t patience = 20;
  double validation_fraction = 0.1;
};

void validate(const Hyperparams& hp);
nlohmann::json hyperparams_to_json(const Hyperparams& hp);
/// Missing keys keep their defaults; unknown keys are a config error.
Hyperparams hyperparams_from_json(const nlohmann::json& j, Hyperparams base = {});

/// One-hidden-layer ELU network from the concatenated one-hot response
/// vector to a scalar latent trait.
class Encoder {
 public:
  Encoder() = default;
  Encoder(RowMatrix w1, Eigen::RowVectorXd b1, Eigen::RowVectorXd w2, double b2);

  std::size_t input_width() const noexcept { return static_cast<std::size_t>(w1_.cols()); }
  std::size_t hidden_width() const noexcept { return static_cast<std::size_t>(w1_.rows()); }

  double forward(const Eigen::Ref<const Eigen::RowVectorXd>& input) const;
  Eigen::VectorXd forward(const OneHotBatch& batch) const;

  const RowMatrix& w1() const noexcept { return w1_; }
  const Eigen::RowVectorXd& b1() const noexcept { return b1_; }
  const Eigen::RowVectorXd& w2() const noexcept { return w2_; }
  double b2() const noexcept { return b2_; }

 private:
  RowMatrix w1_;
  Eigen::RowVectorXd b1_;
  Eigen::RowVectorXd w2_;
  double b2_ = 0.0;
};

/// AMSGrad moments. `v_max` never decreases coordinate-wise.
struct OptimizerState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  Eigen::VectorXd v_max;
  std::uint64_t step = 0;

  explicit OptimizerState(std::size_t n = 0)
      : m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        v_max(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}
};

void amsgrad_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                  double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

/// Freshly initialized autoencoder. `params` is authoritative; `encoder` and
/// `model` are decoded views of it.
struct Autoencoder {
  ParamStore params;
  DecoderLayout layout;
  Encoder encoder;
  IrtModel model;
};

Autoencoder build_autoencoder(Variant variant, const ResponseMatrix& rm, const Hyperparams& hp, std::uint64_t seed);

Encoder encoder_from_params(const ParamStore& params);
IrtModel decoder_from_params(const ParamStore& params, const DecoderLayout& layout,
                             std::vector<ResponseMatrix::Item> items, bool missing_as_category,
                             ThetaBounds bounds = {});
DecoderLayout decoder_layout(Variant variant, const ResponseMatrix& rm, std::size_t depth);

struct TrainingLogEntry {
  std::size_t epoch = 0;
  double train_nll = 0.0;  // mean per person
  double val_nll = 0.0;    // mean per person, NaN without a validation split
};

/// Frozen result of any fitting procedure. Autoencoder fits carry their
/// encoder; MML fits do not.
class FittedModel {
 public:
  FittedModel(IrtModel model, std::optional<Encoder> encoder, std::string fitter,
              std::vector<TrainingLogEntry> log = {}, std::size_t best_epoch = 0);

  const IrtModel& model() const noexcept { return model_; }
  bool has_encoder() const noexcept { return encoder_.has_value(); }
  const Encoder& encoder() const;
  const std::string& fitter() const noexcept { return fitter_; }
  const std::vector<TrainingLogEntry>& log() const noexcept { return log_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }

 private:
  IrtModel model_;
  std::optional<Encoder> encoder_;
  std::string fitter_;
  std::vector<TrainingLogEntry> log_;
  std::size_t best_epoch_ = 0;
};

/// Mini-batch AMSGrad on the summed negative log-likelihood. A
/// `validation_fraction` share of `train` (when at least 20 persons) is held
/// back for early stopping and the best validation epoch is returned. The
/// fitted theta bounds cover the encoder outputs on `train`, widened by a
/// quarter of their range on each side.
FittedModel fit(Variant variant, const ResponseMatrix& train, const Hyperparams& hp);

nlohmann::json fitted_to_json(const FittedModel& fitted);
FittedModel fitted_from_json(const nlohmann::json& j);
void save_fitted(const FittedModel& fitted, const std::filesystem::path& path);
FittedModel load_fitted(const std::filesystem::path& path);

void write_training_log(const std::vector<TrainingLogEntry>& log, const std::filesystem::path& path);

}  // namespace mmcirt
