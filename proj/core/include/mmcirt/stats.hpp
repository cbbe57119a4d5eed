#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace mmcirt {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> x);
double median(std::vector<double> x);
/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> x, double q);
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of mid-ranks.
double spearman(std::span<const double> x, std::span<const double> y);
/// Number of pairs ordered strictly one way by x and strictly the other way by y.
std::size_t discordant_pairs(std::span<const double> x, std::span<const double> y);

/// Derives an independent 64-bit stream seed from a base seed and a tuple of
/// indices (splitmix64 mixing). Used to give every replication, fold and
/// grid point its own RNG stream regardless of scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace mmcirt
