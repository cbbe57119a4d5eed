#include "mmcirt/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

#include "mmcirt/csv.hpp"
#include "mmcirt/error.hpp"
#include "mmcirt/stats.hpp"

namespace mmcirt {

using Eigen::Index;

void validate(const Hyperparams& hp) {
  if (!(hp.learning_rate > 0.0) || !std::isfinite(hp.learning_rate)) fail_config("learning_rate must be > 0");
  if (hp.batch_size < 1) fail_config("batch_size must be >= 1");
  if (hp.hidden_layers < 1) fail_config("hidden_layers must be >= 1");
  if (!(hp.beta1 >= 0.0 && hp.beta1 < 1.0) || !(hp.beta2 >= 0.0 && hp.beta2 < 1.0))
    fail_config("beta1 and beta2 must lie in [0, 1)");
  if (!(hp.epsilon > 0.0)) fail_config("epsilon must be > 0");
  if (!(hp.validation_fraction >= 0.0 && hp.validation_fraction < 1.0))
    fail_config("validation_fraction must lie in [0, 1)");
}

nlohmann::json hyperparams_to_json(const Hyperparams& hp) {
  return {{"learning_rate", hp.learning_rate}, {"batch_size", hp.batch_size},
          {"epochs", hp.epochs},               {"hidden_layers", hp.hidden_layers},
          {"beta1", hp.beta1},                 {"beta2", hp.beta2},
          {"epsilon", hp.epsilon},             {"seed", hp.seed},
          {"patience", hp.patience},           {"validation_fraction", hp.validation_fraction}};
}

Hyperparams hyperparams_from_json(const nlohmann::json& j, Hyperparams hp) {
  if (!j.is_object()) fail_config("hyperparameter config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") hp.learning_rate = value.get<double>();
      else if (key == "batch_size") hp.batch_size = value.get<std::size_t>();
      else if (key == "epochs") hp.epochs = value.get<std::size_t>();
      else if (key == "hidden_layers") hp.hidden_layers = value.get<std::size_t>();
      else if (key == "beta1") hp.beta1 = value.get<double>();
      else if (key == "beta2") hp.beta2 = value.get<double>();
      else if (key == "epsilon") hp.epsilon = value.get<double>();
      else if (key == "seed") hp.seed = value.get<std::uint64_t>();
      else if (key == "patience") hp.patience = value.get<std::size_t>();
      else if (key == "validation_fraction") hp.validation_fraction = value.get<double>();
      else fail_config("unknown hyperparameter '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail_config(std::string("bad hyperparameter value: ") + e.what());
  }
  validate(hp);
  return hp;
}

Encoder::Encoder(RowMatrix w1, Eigen::RowVectorXd b1, Eigen::RowVectorXd w2, double b2)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(b2) {}

double Encoder::forward(const Eigen::Ref<const Eigen::RowVectorXd>& input) const {
  Eigen::RowVectorXd h = input * w1_.transpose() + b1_;
  h = h.unaryExpr([](double v) { return act::elu(v); });
  return h.dot(w2_) + b2_;
}

Eigen::VectorXd Encoder::forward(const OneHotBatch& batch) const {
  Eigen::MatrixXd h = batch.values * w1_.transpose();
  h.rowwise() += b1_;
  h = h.unaryExpr([](double v) { return act::elu(v); });
  Eigen::VectorXd out = h * w2_.transpose();
  out.array() += b2_;
  return out;
}

void amsgrad_step(OptimizerState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr,
                  double beta1, double beta2, double epsilon) {
  if (grads.size() != params.size() || s.m.size() != params.size())
    throw std::invalid_argument("amsgrad_step: shape mismatch");
  ++s.step;
  s.m = beta1 * s.m + (1.0 - beta1) * grads;
  s.v = beta2 * s.v + (1.0 - beta2) * grads.cwiseProduct(grads);
  s.v_max = s.v_max.cwiseMax(s.v);
  const double t = static_cast<double>(s.step);
  const double bias1 = 1.0 - std::pow(beta1, t);
  const double bias2 = 1.0 - std::pow(beta2, t);
  const Eigen::ArrayXd denom = (s.v_max.array() / bias2).sqrt() + epsilon;
  params.array() -= (lr / bias1) * s.m.array() / denom;
}

DecoderLayout decoder_layout(Variant variant, const ResponseMatrix& rm, std::size_t depth) {
  std::vector<int> correct(rm.n_items());
  for (std::size_t j = 0; j < rm.n_items(); ++j) correct[j] = rm.correct_option(j);
  return DecoderLayout(variant, rm.category_counts(), std::move(correct), depth);
}

Autoencoder build_autoencoder(Variant variant, const ResponseMatrix& rm, const Hyperparams& hp, std::uint64_t seed) {
  validate(hp);
  const auto layout = decoder_layout(variant, rm, hp.hidden_layers);
  const auto d = static_cast<Index>(rm.total_categories());
  const Index h = 2 * d;
  const auto k = static_cast<Index>(layout.total_categories());
  const auto j = static_cast<Index>(layout.n_items());

  std::mt19937_64 rng(seed);
  const auto glorot = [&](Eigen::Map<RowMatrix> m, double fan_in, double fan_out) {
    const double r = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-r, r);
    for (Index a = 0; a < m.rows(); ++a)
      for (Index b = 0; b < m.cols(); ++b) m(a, b) = u(rng);
  };

  ParamStore p;
  p.add("encoder.w1", h, d);
  p.add("encoder.b1", 1, h);
  p.add("encoder.w2", 1, h);
  p.add("encoder.b2", 1, 1);
  glorot(p.view("encoder.w1"), static_cast<double>(d), static_cast<double>(h));
  glorot(p.view("encoder.w2"), static_cast<double>(h), 1.0);

  if (variant == Variant::nr) {
    p.add("nr.slope", 1, k);
    p.add("nr.intercept", 1, k);
    glorot(p.view("nr.slope"), 1.0, static_cast<double>(k));
  } else {
    p.add("mmc.tau", 1, j);
    p.add("mmc.intercept", 1, k);
    p.view("mmc.tau").setConstant(1.0);
    const double base = act::softplus_inverse(0.05);
    std::normal_distribution<double> jitter(0.0, 0.01);
    for (std::size_t l = 0; l < hp.hidden_layers; ++l) {
      const auto suffix = std::to_string(l);
      p.add("mmc.w" + suffix, k, l == 0 ? 3 : 9);
      p.add("mmc.b" + suffix, k, 3);
      auto w = p.view("mmc.w" + suffix);
      for (Index a = 0; a < w.rows(); ++a)
        for (Index b = 0; b < w.cols(); ++b) w(a, b) = base + jitter(rng);
    }
  }
  Encoder enc = encoder_from_params(p);
  IrtModel model = decoder_from_params(p, layout, rm.items(), rm.missing_as_category());
  return Autoencoder{std::move(p), layout, std::move(enc), std::move(model)};
}

Encoder encoder_from_params(const ParamStore& params) {
  return Encoder(RowMatrix(params.view("encoder.w1")), Eigen::RowVectorXd(params.view("encoder.b1").row(0)),
                 Eigen::RowVectorXd(params.view("encoder.w2").row(0)), params.view("encoder.b2")(0, 0));
}

IrtModel decoder_from_params(const ParamStore& params, const DecoderLayout& layout,
                             std::vector<ResponseMatrix::Item> items, bool missing_as_category, ThetaBounds bounds) {
  if (layout.variant == Variant::nr) {
    const auto slope = params.view("nr.slope");
    const auto intercept = params.view("nr.intercept");
    std::vector<NrItemParams> out(layout.n_items());
    for (std::size_t j = 0; j < layout.n_items(); ++j) {
      for (int m = 0; m < layout.categories[j]; ++m) {
        const auto col = static_cast<Index>(layout.offsets[j]) + m;
        out[j].slope.push_back(slope(0, col));
        out[j].intercept.push_back(intercept(0, col));
      }
    }
    return IrtModel(std::move(items), missing_as_category, std::move(out), bounds);
  }
  const auto tau = params.view("mmc.tau");
  const auto intercept = params.view("mmc.intercept");
  std::vector<MmcItemParams> out(layout.n_items());
  for (std::size_t j = 0; j < layout.n_items(); ++j) {
    out[j].tau = tau(0, static_cast<Index>(j));
    for (int m = 0; m < layout.categories[j]; ++m) {
      const auto row = static_cast<Index>(layout.offsets[j]) + m;
      out[j].intercept.push_back(intercept(0, row));
      MonotoneSubnet net;
      for (std::size_t l = 0; l < layout.depth; ++l) {
        const auto suffix = std::to_string(l);
        const auto w = params.view("mmc.w" + suffix);
        const auto b = params.view("mmc.b" + suffix);
        MonotoneLayer layer;
        layer.raw_weights.assign(w.row(row).data(), w.row(row).data() + w.cols());
        for (int r = 0; r < 3; ++r) layer.bias[static_cast<std::size_t>(r)] = b(row, r);
        net.layers.push_back(std::move(layer));
      }
      out[j].subnets.push_back(std::move(net));
    }
  }
  return IrtModel(std::move(items), missing_as_category, std::move(out), bounds);
}

FittedModel::FittedModel(IrtModel model, std::optional<Encoder> encoder, std::string fitter,
                         std::vector<TrainingLogEntry> log, std::size_t best_epoch)
    : model_(std::move(model)),
      encoder_(std::move(encoder)),
      fitter_(std::move(fitter)),
      log_(std::move(log)),
      best_epoch_(best_epoch) {}

const Encoder& FittedModel::encoder() const {
  if (!encoder_) fail_config("model fitted by '" + fitter_ + "' has no encoder; NN scoring is unavailable");
  return *encoder_;
}

namespace {

std::vector<int> gather_codes(const ResponseMatrix& rm, std::span<const std::size_t> rows) {
  std::vector<int> codes;
  codes.reserve(rows.size() * rm.n_items());
  for (auto r : rows) {
    const auto row = rm.row(r);
    codes.insert(codes.end(), row.begin(), row.end());
  }
  return codes;
}

// Summed NLL over `rows`, evaluated in chunks with forward-only graphs.
double total_nll(const ParamStore& params, const DecoderLayout& layout, const ResponseMatrix& rm,
                 std::span<const std::size_t> rows) {
  constexpr std::size_t chunk = 1024;
  double total = 0.0;
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const auto part = rows.subspan(start, std::min(chunk, rows.size() - start));
    const auto graph = forward_nll(params, layout, one_hot(rm, part), gather_codes(rm, part));
    total += graph.loss_value();
  }
  return total;
}

}  // namespace

FittedModel fit(Variant variant, const ResponseMatrix& train, const Hyperparams& hp) {
  validate(hp);
  if (train.n_persons() == 0) fail_data("EMPTY_DATA", "cannot fit a model to an empty response matrix");

  std::vector<std::size_t> fit_rows(train.n_persons());
  std::iota(fit_rows.begin(), fit_rows.end(), 0);
  std::vector<std::size_t> val_rows;
  if (hp.validation_fraction > 0.0 && train.n_persons() >= 20) {
    SplitSpec spec;
    spec.train_fraction = 1.0 - hp.validation_fraction;
    spec.seed = derive_seed(hp.seed, {0x76616cULL});
    auto part = split_indices(train.n_persons(), spec);
    fit_rows = std::move(part.train);
    val_rows = std::move(part.test);
  }

  auto ae = build_autoencoder(variant, train, hp, derive_seed(hp.seed, {0x696e6974ULL}));
  ParamStore& params = ae.params;
  OptimizerState opt(params.size());

  const double n_fit = static_cast<double>(fit_rows.size());
  const double n_val = static_cast<double>(val_rows.size());
  const auto val_nll = [&]() {
    return val_rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : total_nll(params, ae.layout, train, val_rows) / n_val;
  };

  std::vector<TrainingLogEntry> log;
  log.push_back({0, total_nll(params, ae.layout, train, fit_rows) / n_fit, val_nll()});

  Eigen::VectorXd best = params.values();
  double best_val = log.back().val_nll;
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;

  std::vector<std::size_t> order = fit_rows;
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(derive_seed(hp.seed, {0x65706fULL, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const auto rows = std::span<const std::size_t>(order).subspan(start, std::min(hp.batch_size, order.size() - start));
      NllGraph graph;
      try {
        graph = forward_nll(params, ae.layout, one_hot(train, rows), gather_codes(train, rows));
      } catch (const Error& e) {
        fail_numeric("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      epoch_loss += graph.loss_value();
      const Eigen::VectorXd grad = backward(graph, params);
      amsgrad_step(opt, params.values(), grad, hp.learning_rate, hp.beta1, hp.beta2, hp.epsilon);
    }
    if (!params.values().allFinite()) fail_numeric("training diverged at epoch " + std::to_string(epoch));
    double v = 0.0;
    try {
      v = val_nll();
    } catch (const Error& e) {
      fail_numeric("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    log.push_back({epoch, epoch_loss / n_fit, v});

    if (val_rows.empty()) {
      best = params.values();
      best_epoch = epoch;
      continue;
    }
    if (v < best_val) {
      best_val = v;
      best = params.values();
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= hp.patience && hp.patience > 0) {
      break;
    }
  }
  params.values() = best;

  Encoder encoder = encoder_from_params(params);
  const Eigen::VectorXd theta = encoder.forward(one_hot(train));
  const double lo = theta.minCoeff();
  const double hi = theta.maxCoeff();
  const double pad = 0.25 * std::max(hi - lo, 1e-3);
  IrtModel model = decoder_from_params(params, ae.layout, train.items(), train.missing_as_category(),
                                       ThetaBounds{lo - pad, hi + pad});
  return FittedModel(std::move(model), std::move(encoder), "ae", std::move(log), best_epoch);
}

nlohmann::json fitted_to_json(const FittedModel& fitted) {
  auto j = model_to_json(fitted.model());
  j["fitter"] = fitted.fitter();
  j["best_epoch"] = fitted.best_epoch();
  if (fitted.has_encoder()) {
    const auto& e = fitted.encoder();
    nlohmann::json enc;
    enc["input_width"] = e.input_width();
    enc["hidden_width"] = e.hidden_width();
    enc["w1"] = std::vector<double>(e.w1().data(), e.w1().data() + e.w1().size());
    enc["b1"] = std::vector<double>(e.b1().data(), e.b1().data() + e.b1().size());
    enc["w2"] = std::vector<double>(e.w2().data(), e.w2().data() + e.w2().size());
    enc["b2"] = e.b2();
    j["encoder"] = std::move(enc);
  }
  return j;
}

FittedModel fitted_from_json(const nlohmann::json& j) {
  IrtModel model = model_from_json(j);
  try {
    std::optional<Encoder> encoder;
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      const auto d = e.at("input_width").get<Index>();
      const auto h = e.at("hidden_width").get<Index>();
      const auto w1 = e.at("w1").get<std::vector<double>>();
      const auto b1 = e.at("b1").get<std::vector<double>>();
      const auto w2 = e.at("w2").get<std::vector<double>>();
      if (static_cast<Index>(w1.size()) != d * h || static_cast<Index>(b1.size()) != h ||
          static_cast<Index>(w2.size()) != h)
        fail_data("INVALID_MODEL", "encoder weight shapes do not match declared widths");
      if (static_cast<std::size_t>(d) != model.total_categories())
        fail_data("INVALID_MODEL", "encoder input width does not match the item categories");
      encoder.emplace(RowMatrix(Eigen::Map<const RowMatrix>(w1.data(), h, d)),
                      Eigen::RowVectorXd(Eigen::Map<const Eigen::RowVectorXd>(b1.data(), h)),
                      Eigen::RowVectorXd(Eigen::Map<const Eigen::RowVectorXd>(w2.data(), h)),
                      e.at("b2").get<double>());
    }
    return FittedModel(std::move(model), std::move(encoder), j.value("fitter", std::string("ae")), {},
                       j.value("best_epoch", std::size_t{0}));
  } catch (const nlohmann::json::exception& e) {
    fail_data("INVALID_MODEL", std::string("malformed model JSON: ") + e.what());
  }
}

void save_fitted(const FittedModel& fitted, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  out << fitted_to_json(fitted).dump(1) << '\n';
}

FittedModel load_fitted(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("IO_ERROR", "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_data("INVALID_MODEL", std::string("cannot parse model file: ") + e.what());
  }
  return fitted_from_json(j);
}

void write_training_log(const std::vector<TrainingLogEntry>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  csv::write_row(out, {"epoch", "train_nll", "val_nll"});
  for (const auto& e : log)
    csv::write_row(out, {std::to_string(e.epoch), csv::format_double(e.train_nll),
                         std::isnan(e.val_nll) ? std::string() : csv::format_double(e.val_nll)});
}

}  // namespace mmcirt
