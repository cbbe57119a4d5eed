#include "mmcirt/models.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "mmcirt/error.hpp"

namespace mmcirt {

std::string_view to_string(Variant v) { return v == Variant::nr ? "nr" : "mmc"; }

Variant parse_variant(std::string_view name) {
  if (name == "nr") return Variant::nr;
  if (name == "mmc") return Variant::mmc;
  fail_config("unknown model variant '" + std::string(name) + "' (expected nr or mmc)");
}

namespace act {

double elu(double y) { return y > 0.0 ? y : std::expm1(y); }
double elu_derivative(double y) { return y > 0.0 ? 1.0 : std::exp(y); }

double saturated(double y) {
  if (y < 0.0) return convex(y + 1.0) - convex(1.0);
  return concave(y - 1.0) + convex(1.0);
}

double convex_derivative(double y) { return elu_derivative(y); }
double concave_derivative(double y) { return elu_derivative(-y); }
double saturated_derivative(double y) {
  return y < 0.0 ? convex_derivative(y + 1.0) : concave_derivative(y - 1.0);
}

double combined(int slot, double y) {
  switch (slot) {
    case 0: return convex(y);
    case 1: return concave(y);
    default: return saturated(y);
  }
}

double combined_derivative(int slot, double y) {
  switch (slot) {
    case 0: return convex_derivative(y);
    case 1: return concave_derivative(y);
    default: return saturated_derivative(y);
  }
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace act

double monotone_forward(const MonotoneSubnet& net, double theta) {
  std::array<double, 3> h{theta, 0.0, 0.0};
  std::size_t width = 1;
  for (const auto& layer : net.layers) {
    std::array<double, 3> next{};
    for (int r = 0; r < 3; ++r) {
      double pre = layer.bias[r];
      for (std::size_t c = 0; c < width; ++c) pre += act::softplus(layer.raw_weights[r * width + c]) * h[c];
      next[r] = act::combined(r, pre);
    }
    h = next;
    width = 3;
  }
  if (net.layers.empty()) return theta;
  return h[0] + h[1] + h[2];
}

void softmax_inplace(std::span<double> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : z) v /= total;
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail_numeric(std::string("non-finite ") + what);
}

}  // namespace

void nr_probs(const NrItemParams& params, double theta, std::span<double> out) {
  require_finite(theta, "theta");
  for (std::size_t m = 0; m < out.size(); ++m) {
    require_finite(params.slope[m], "NR slope");
    require_finite(params.intercept[m], "NR intercept");
    out[m] = params.slope[m] * theta + params.intercept[m];
  }
  softmax_inplace(out);
}

std::vector<double> nr_probs(const NrItemParams& params, double theta) {
  std::vector<double> out(params.slope.size());
  nr_probs(params, theta, out);
  return out;
}

void mmc_probs(const MmcItemParams& params, int correct, double theta, std::span<double> out) {
  require_finite(theta, "theta");
  require_finite(params.tau, "MMC tau");
  double delta_sum = 0.0;
  for (std::size_t m = 0; m < out.size(); ++m) {
    const double d = monotone_forward(params.subnets[m], theta);
    require_finite(d, "monotone subnet output");
    require_finite(params.intercept[m], "MMC intercept");
    out[m] = d;
    delta_sum += d;
  }
  for (std::size_t m = 0; m < out.size(); ++m) {
    const double d = static_cast<int>(m) == correct ? delta_sum : out[m];
    out[m] = params.tau * d + params.intercept[m];
  }
  softmax_inplace(out);
}

std::vector<double> mmc_probs(const MmcItemParams& params, int correct, double theta) {
  std::vector<double> out(params.intercept.size());
  mmc_probs(params, correct, theta, out);
  return out;
}

IrtModel::IrtModel(std::vector<ResponseMatrix::Item> items, bool missing_as_category, Items params,
                   ThetaBounds bounds)
    : items_(std::move(items)), missing_as_category_(missing_as_category), params_(std::move(params)) {
  set_bounds(bounds);
  offsets_.assign(items_.size() + 1, 0);
  for (std::size_t j = 0; j < items_.size(); ++j)
    offsets_[j + 1] = offsets_[j] + static_cast<std::size_t>(categories(j));

  const auto check_len = [&](std::size_t j, std::size_t len, const char* what) {
    if (len != static_cast<std::size_t>(categories(j)))
      fail_data("INVALID_MODEL", std::string(what) + " of item '" + items_[j].id + "' has length " +
                                     std::to_string(len) + ", expected " + std::to_string(categories(j)));
  };
  std::visit(
      [&](const auto& per_item) {
        if (per_item.size() != items_.size())
          fail_data("INVALID_MODEL", "parameter list covers " + std::to_string(per_item.size()) + " items, expected " +
                                         std::to_string(items_.size()));
        for (std::size_t j = 0; j < items_.size(); ++j) {
          const auto& p = per_item[j];
          if constexpr (std::is_same_v<std::decay_t<decltype(p)>, NrItemParams>) {
            check_len(j, p.slope.size(), "slope vector");
            check_len(j, p.intercept.size(), "intercept vector");
          } else {
            check_len(j, p.intercept.size(), "intercept vector");
            check_len(j, p.subnets.size(), "subnet list");
            for (const auto& net : p.subnets) {
              for (std::size_t l = 0; l < net.layers.size(); ++l) {
                const std::size_t expected = l == 0 ? 3 : 9;
                if (net.layers[l].raw_weights.size() != expected)
                  fail_data("INVALID_MODEL", "monotone layer " + std::to_string(l) + " of item '" + items_[j].id +
                                                 "' has " + std::to_string(net.layers[l].raw_weights.size()) +
                                                 " weights, expected " + std::to_string(expected));
              }
            }
          }
        }
      },
      params_);
}

void IrtModel::set_bounds(ThetaBounds b) {
  if (!(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo < b.hi))
    fail_config("theta bounds must be finite with lo < hi");
  bounds_ = b;
}

void IrtModel::probs(std::size_t j, double theta, std::span<double> out) const {
  if (variant() == Variant::nr)
    nr_probs(nr_items()[j], theta, out);
  else
    mmc_probs(mmc_items()[j], items_[j].correct, theta, out);
}

std::vector<double> IrtModel::probs(std::size_t j, double theta) const {
  std::vector<double> out(static_cast<std::size_t>(categories(j)));
  probs(j, theta, out);
  return out;
}

double IrtModel::log_likelihood(double theta, std::span<const int> codes) const {
  std::array<double, 64> stack_buf{};
  std::vector<double> heap_buf;
  double total = 0.0;
  for (std::size_t j = 0; j < items_.size(); ++j) {
    const auto m = static_cast<std::size_t>(categories(j));
    std::span<double> p;
    if (m <= stack_buf.size()) {
      p = std::span<double>(stack_buf.data(), m);
    } else {
      heap_buf.resize(m);
      p = heap_buf;
    }
    probs(j, theta, p);
    total += std::log(std::max(p[static_cast<std::size_t>(codes[j])], kProbabilityFloor));
  }
  return total;
}

std::size_t IrtModel::parameter_count() const {
  std::size_t count = 0;
  if (variant() == Variant::nr) {
    for (const auto& p : nr_items()) count += p.slope.size() + p.intercept.size();
  } else {
    for (const auto& p : mmc_items()) {
      count += 1 + p.intercept.size();
      for (const auto& net : p.subnets)
        for (const auto& layer : net.layers) count += layer.raw_weights.size() + layer.bias.size();
    }
  }
  return count;
}

void IrtModel::check_compatible(const ResponseMatrix& rm) const {
  if (rm.n_items() != items_.size())
    fail_data("ITEM_MISMATCH", "data has " + std::to_string(rm.n_items()) + " items, model has " +
                                   std::to_string(items_.size()));
  if (rm.missing_as_category() != missing_as_category_)
    fail_data("ITEM_MISMATCH", "missing-category setting of data and model differ");
  for (std::size_t j = 0; j < items_.size(); ++j) {
    const auto& a = rm.item(j);
    const auto& b = items_[j];
    if (a.id != b.id || a.options != b.options || a.correct != b.correct)
      fail_data("ITEM_MISMATCH", "item " + std::to_string(j) + " ('" + a.id + "') does not match model item '" +
                                     b.id + "'");
  }
}

IrtModel IrtModel::select_items(std::span<const std::size_t> items) const {
  std::vector<ResponseMatrix::Item> chosen;
  for (auto j : items) chosen.push_back(items_.at(j));
  Items params = std::visit(
      [&](const auto& per_item) -> Items {
        std::decay_t<decltype(per_item)> out;
        for (auto j : items) out.push_back(per_item.at(j));
        return out;
      },
      params_);
  return IrtModel(std::move(chosen), missing_as_category_, std::move(params), bounds_);
}

Eigen::MatrixXd model_probs(const IrtModel& model, std::span<const double> theta) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(theta.size()), static_cast<Eigen::Index>(model.total_categories()));
  std::vector<double> buf;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    for (std::size_t j = 0; j < model.n_items(); ++j) {
      buf.resize(static_cast<std::size_t>(model.categories(j)));
      model.probs(j, theta[i], buf);
      for (std::size_t m = 0; m < buf.size(); ++m)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(model.category_offset(j) + m)) = buf[m];
    }
  }
  return out;
}

nlohmann::json model_to_json(const IrtModel& model) {
  nlohmann::json j;
  j["format"] = "mmc-irt-model";
  j["version"] = 1;
  j["variant"] = std::string(to_string(model.variant()));
  j["missing_as_category"] = model.missing_as_category();
  j["theta_bounds"] = {model.bounds().lo, model.bounds().hi};
  auto& items = j["items"] = nlohmann::json::array();
  for (std::size_t k = 0; k < model.n_items(); ++k) {
    const auto& it = model.items()[k];
    nlohmann::json item{{"id", it.id}, {"options", it.options}, {"correct", it.correct}};
    if (model.variant() == Variant::nr) {
      item["slope"] = model.nr_items()[k].slope;
      item["intercept"] = model.nr_items()[k].intercept;
    } else {
      const auto& p = model.mmc_items()[k];
      item["tau"] = p.tau;
      item["intercept"] = p.intercept;
      auto& subnets = item["subnets"] = nlohmann::json::array();
      for (const auto& net : p.subnets) {
        auto layers = nlohmann::json::array();
        for (const auto& layer : net.layers)
          layers.push_back({{"raw_weights", layer.raw_weights}, {"bias", layer.bias}});
        subnets.push_back(std::move(layers));
      }
    }
    items.push_back(std::move(item));
  }
  return j;
}

IrtModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "mmc-irt-model")
      fail_data("INVALID_MODEL", "not an mmc-irt model file");
    if (j.at("version").get<int>() != 1)
      fail_data("INVALID_MODEL", "unsupported model version " + std::to_string(j.at("version").get<int>()));
    const Variant variant = parse_variant(j.at("variant").get<std::string>());
    const bool missing = j.at("missing_as_category").get<bool>();
    const auto& b = j.at("theta_bounds");
    ThetaBounds bounds{b.at(0).get<double>(), b.at(1).get<double>()};

    std::vector<ResponseMatrix::Item> items;
    std::vector<NrItemParams> nr;
    std::vector<MmcItemParams> mmc;
    for (const auto& item : j.at("items")) {
      items.push_back({item.at("id").get<std::string>(), item.at("options").get<int>(), item.at("correct").get<int>()});
      if (variant == Variant::nr) {
        nr.push_back({item.at("slope").get<std::vector<double>>(), item.at("intercept").get<std::vector<double>>()});
      } else {
        MmcItemParams p;
        p.tau = item.at("tau").get<double>();
        p.intercept = item.at("intercept").get<std::vector<double>>();
        for (const auto& net_json : item.at("subnets")) {
          MonotoneSubnet net;
          for (const auto& layer_json : net_json) {
            MonotoneLayer layer;
            layer.raw_weights = layer_json.at("raw_weights").get<std::vector<double>>();
            layer.bias = layer_json.at("bias").get<std::array<double, 3>>();
            net.layers.push_back(std::move(layer));
          }
          p.subnets.push_back(std::move(net));
        }
        mmc.push_back(std::move(p));
      }
    }
    if (variant == Variant::nr) return IrtModel(std::move(items), missing, std::move(nr), bounds);
    return IrtModel(std::move(items), missing, std::move(mmc), bounds);
  } catch (const nlohmann::json::exception& e) {
    fail_data("INVALID_MODEL", std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace mmcirt
