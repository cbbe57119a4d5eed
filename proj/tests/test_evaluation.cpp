#include <gtest/gtest.h>

#include <cmath>

#include "mmcirt/error.hpp"
#include "mmcirt/evaluation.hpp"
#include "mmcirt/stats.hpp"
#include "support.hpp"

namespace mmcirt {
namespace {

IrtModel constant_model(std::size_t J, std::vector<double> probs) {
  std::vector<ResponseMatrix::Item> items;
  std::vector<NrItemParams> params;
  NrItemParams p;
  for (double q : probs) {
    p.slope.push_back(0.0);
    p.intercept.push_back(std::log(q));
  }
  for (std::size_t j = 0; j < J; ++j) {
    items.push_back({"i" + std::to_string(j), static_cast<int>(probs.size()), 0});
    params.push_back(p);
  }
  return IrtModel(items, false, params);
}

TEST(Loglik, UniformModel) {
  const auto model = constant_model(20, {0.25, 0.25, 0.25, 0.25});
  const auto rm = testing::random_responses(model.items(), 7, 1);
  const std::vector<double> theta(7, 0.3);
  for (double ll : person_loglik(model, rm, theta)) EXPECT_NEAR(ll, -20 * std::log(4.0), 1e-12);
  for (double r : per_response_residuals(model, rm, theta)) EXPECT_NEAR(r, 0.75, 1e-15);
  const auto report = evaluate(model, rm, ThetaEstimates{ScoreMethod::ml, theta}, 7);
  EXPECT_NEAR(report.mean_loglik, -27.7259, 1e-4);
}

TEST(Loglik, MatchesNaiveDoubleLoop) {
  const auto model = testing::random_mmc_model(9, 4, 2, 3);
  const auto rm = testing::random_responses(model.items(), 25, 4);
  std::vector<double> theta;
  for (std::size_t i = 0; i < 25; ++i) theta.push_back(-3.0 + 0.25 * static_cast<double>(i));
  const auto ll = person_loglik(model, rm, theta);
  const auto res = per_response_residuals(model, rm, theta);
  for (std::size_t i = 0; i < 25; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 9; ++j) {
      const double p = mmc_probs(model.mmc_items()[j], model.correct_option(j), theta[i])[rm.code(i, j)];
      sum += std::log(std::max(p, 1e-10));
      EXPECT_NEAR(res[i * 9 + j], 1.0 - p, 1e-14);
    }
    EXPECT_NEAR(ll[i], sum, 1e-10);
  }
}

TEST(Grouped, HandCase) {
  const auto model = constant_model(1, {0.5, 0.25, 0.125, 0.125});
  std::vector<ResponseMatrix::Item> items = model.items();
  const ResponseMatrix rm(items, {"a", "b", "c", "d"}, {0, 0, 1, 2}, false);
  const std::vector<double> theta(4, 0.0);
  const auto g = grouped_residuals(model, rm, theta, 1);
  ASSERT_EQ(g.cells.size(), 4u);
  const double r[] = {0.0, 0.0, 0.125, -0.125};
  for (int m = 0; m < 4; ++m) EXPECT_NEAR(g.cells[m].residual, r[m], 1e-15);
  EXPECT_NEAR(g.cells[2].standardized, 0.125 / std::sqrt(0.125 * 0.875 / 4), 1e-12);
  EXPECT_NEAR(g.cells[2].standardized, 0.756, 5e-4);
}

TEST(Grouped, PartitionSizes) {
  std::vector<double> theta(100);
  for (std::size_t i = 0; i < 100; ++i) theta[i] = std::sin(static_cast<double>(i));
  for (const auto& grp : theta_groups(theta, 10)) EXPECT_EQ(grp.size(), 10u);
  const auto uneven = theta_groups(std::span(theta).first(23), 5);
  const std::size_t sizes[] = {5, 5, 5, 4, 4};
  for (std::size_t g = 0; g < 5; ++g) EXPECT_EQ(uneven[g].size(), sizes[g]);
}

TEST(Grouped, TiesKeepIndexOrder) {
  const std::vector<double> theta{1.0, 0.0, 1.0, 0.0};
  const auto g = theta_groups(theta, 2);
  EXPECT_EQ(g[0], (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(g[1], (std::vector<std::size_t>{0, 2}));
}

TEST(Grouped, IdentitiesHold) {
  const auto model = testing::random_nr_model(6, 5, 9);
  const auto rm = testing::random_responses(model.items(), 103, 10);
  std::vector<double> theta;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (std::size_t i = 0; i < 103; ++i) theta.push_back(z(rng));
  const auto g = grouped_residuals(model, rm, theta, 10);
  EXPECT_EQ(g.group_sizes.front(), 11u);
  EXPECT_EQ(g.group_sizes.back(), 10u);
  for (std::size_t gi = 0; gi < 10; ++gi)
    for (std::size_t j = 0; j < 6; ++j) {
      double sum_r = 0, sum_obs = 0, sum_exp = 0;
      for (const auto& c : g.cells) {
        if (c.group != gi || c.item != j) continue;
        sum_r += c.residual;
        sum_obs += c.observed;
        sum_exp += c.expected;
        EXPECT_LE(std::abs(c.residual), 1.0);
        const double p = std::clamp(c.expected, 1e-6, 1 - 1e-6);
        EXPECT_NEAR(c.standardized * std::sqrt(p * (1 - p) / g.group_sizes[gi]), c.residual, 1e-12);
      }
      EXPECT_NEAR(sum_r, 0.0, 1e-12);
      EXPECT_NEAR(sum_obs, 1.0, 1e-12);
      EXPECT_NEAR(sum_exp, 1.0, 1e-10);
    }
}

TEST(Grouped, TooFewPersons) {
  const auto model = testing::random_nr_model(2, 3, 1);
  const auto rm = testing::random_responses(model.items(), 5, 1);
  EXPECT_THROW(grouped_residuals(model, rm, std::vector<double>(5, 0.0), 10), Error);
}

TEST(Evaluate, MlAtLeastNn) {
  std::mt19937_64 rng(1);
  const auto rm = testing::random_responses(testing::make_items(8, 4, rng), 200, 5);
  Hyperparams hp;
  hp.epochs = 10;
  const auto [train, test] = split(rm, SplitSpec{});
  const auto f = fit(Variant::mmc, train, hp);
  EXPECT_GE(holdout_loglik(f, test, ScoreMethod::ml), holdout_loglik(f, test, ScoreMethod::nn));
}

TEST(CrossValidate, SinglePointEqualsPlainFolds) {
  std::mt19937_64 rng(2);
  const auto rm = testing::random_responses(testing::make_items(6, 3, rng), 100, 7);
  Hyperparams base;
  base.epochs = 4;
  base.seed = 5;
  const CvPoint point{0.04, 32, 1};
  const auto res = cross_validate(Variant::nr, rm, std::span(&point, 1), base, 3, 11, 2);
  ASSERT_EQ(res.size(), 1u);
  ASSERT_EQ(res[0].fold_ml.size(), 3u);

  SplitSpec spec;
  spec.seed = 11;
  spec.fold_count = 3;
  const auto parts = folds(rm, spec);
  double mean = 0;
  for (std::size_t f = 0; f < 3; ++f) {
    Hyperparams hp = base;
    hp.batch_size = 32;
    hp.seed = derive_seed(11, {0, f});
    const auto fitted = fit(Variant::nr, parts[f].first, hp);
    EXPECT_EQ(res[0].fold_ml[f], holdout_loglik(fitted, parts[f].second, ScoreMethod::ml));
    EXPECT_EQ(res[0].fold_nn[f], holdout_loglik(fitted, parts[f].second, ScoreMethod::nn));
    mean += res[0].fold_ml[f] / 3;
  }
  EXPECT_NEAR(res[0].mean_ml, mean, 1e-12);
  const auto again = cross_validate(Variant::nr, rm, std::span(&point, 1), base, 3, 11, 1);
  EXPECT_EQ(res[0].fold_ml, again[0].fold_ml);
  for (std::size_t f = 0; f < 3; ++f) EXPECT_GE(res[0].fold_ml[f], res[0].fold_nn[f]);
}

TEST(CrossValidate, RankedAndGridShape) {
  EXPECT_EQ(default_cv_grid(Variant::mmc).size(), 64u);
  EXPECT_EQ(default_cv_grid(Variant::nr).size(), 16u);
  std::mt19937_64 rng(3);
  const auto rm = testing::random_responses(testing::make_items(5, 3, rng), 60, 8);
  Hyperparams base;
  base.epochs = 3;
  const std::vector<CvPoint> grid{{0.02, 32, 1}, {0.12, 16, 1}, {0.04, 64, 1}};
  const auto res = cross_validate(Variant::nr, rm, grid, base, 2, 1, 2);
  ASSERT_EQ(res.size(), 3u);
  for (std::size_t k = 1; k < 3; ++k) EXPECT_GE(res[k - 1].mean_ml, res[k].mean_ml);
}

}  // namespace
}  // namespace mmcirt
