#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <random>
#include <string>
#include <vector>

#include "mmcirt/autodiff.hpp"
#include "mmcirt/data.hpp"
#include "mmcirt/models.hpp"

namespace mmcirt::testing {

inline std::vector<ResponseMatrix::Item> make_items(std::size_t J, int M, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> key(0, M - 1);
  std::vector<ResponseMatrix::Item> items;
  for (std::size_t j = 0; j < J; ++j) items.push_back({"i" + std::to_string(j + 1), M, key(rng)});
  return items;
}

inline NrItemParams random_nr(int M, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  NrItemParams p;
  for (int m = 0; m < M; ++m) {
    p.slope.push_back(n(rng));
    p.intercept.push_back(n(rng));
  }
  return p;
}

inline MonotoneSubnet random_subnet(std::size_t depth, std::mt19937_64& rng, double weight_mean = 0.0,
                                    double spread = 1.0) {
  std::normal_distribution<double> w(weight_mean, spread);
  std::normal_distribution<double> b(0.0, spread);
  MonotoneSubnet net;
  for (std::size_t l = 0; l < depth; ++l) {
    MonotoneLayer layer;
    layer.raw_weights.resize(l == 0 ? 3 : 9);
    for (auto& v : layer.raw_weights) v = w(rng);
    for (auto& v : layer.bias) v = b(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline MmcItemParams random_mmc(int M, std::size_t depth, std::mt19937_64& rng, double weight_mean = 0.0,
                                double spread = 1.0) {
  std::uniform_real_distribution<double> tau(0.2, 2.0);
  std::normal_distribution<double> b(0.0, 1.0);
  MmcItemParams p;
  p.tau = tau(rng);
  for (int m = 0; m < M; ++m) {
    p.intercept.push_back(b(rng));
    p.subnets.push_back(random_subnet(depth, rng, weight_mean, spread));
  }
  return p;
}

inline IrtModel random_nr_model(std::size_t J, int M, std::uint64_t seed, double scale = 1.0,
                                ThetaBounds bounds = {}) {
  std::mt19937_64 rng(seed);
  auto items = make_items(J, M, rng);
  std::vector<NrItemParams> params;
  for (std::size_t j = 0; j < J; ++j) params.push_back(random_nr(M, rng, scale));
  return IrtModel(std::move(items), false, std::move(params), bounds);
}

inline IrtModel random_mmc_model(std::size_t J, int M, std::size_t depth, std::uint64_t seed,
                                 double weight_mean = 0.0, ThetaBounds bounds = {}) {
  std::mt19937_64 rng(seed);
  auto items = make_items(J, M, rng);
  std::vector<MmcItemParams> params;
  for (std::size_t j = 0; j < J; ++j) params.push_back(random_mmc(M, depth, rng, weight_mean));
  return IrtModel(std::move(items), false, std::move(params), bounds);
}

inline ResponseMatrix random_responses(std::vector<ResponseMatrix::Item> items, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> codes;
  for (std::size_t i = 0; i < N; ++i)
    for (const auto& item : items) codes.push_back(std::uniform_int_distribution<int>(0, item.options - 1)(rng));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < N; ++i) ids.push_back("p" + std::to_string(i));
  return ResponseMatrix(std::move(items), std::move(ids), std::move(codes), false);
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t worst = 0;
  std::size_t checked = 0;
};

/// Central differences on every parameter. Coordinates whose absolute
/// disagreement is below `abs_floor` count as exact.
inline GradCheck gradient_check(ParamStore params, const DecoderLayout& layout, const OneHotBatch& batch,
                                std::span<const int> codes, double eps = 1e-5, double abs_floor = 1e-8) {
  auto graph = forward_nll(params, layout, batch, codes);
  const Eigen::VectorXd g = backward(graph, params);
  GradCheck out;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double saved = params.values()(k);
    params.values()(k) = saved + eps;
    const double up = forward_nll(params, layout, batch, codes).loss_value();
    params.values()(k) = saved - eps;
    const double down = forward_nll(params, layout, batch, codes).loss_value();
    params.values()(k) = saved;
    const double fd = (up - down) / (2 * eps);
    const double diff = std::abs(fd - g(k));
    const double rel = diff < abs_floor ? 0.0 : diff / std::max(std::abs(fd), std::abs(g(k)));
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = static_cast<std::size_t>(k);
    }
    ++out.checked;
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mmcirt_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mmcirt::testing
