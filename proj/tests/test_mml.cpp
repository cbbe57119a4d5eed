#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "mmcirt/mml.hpp"
#include "mmcirt/stats.hpp"
#include "support.hpp"

namespace mmcirt {
namespace {

TEST(Quadrature, NormalWeights) {
  const auto q = QuadratureRule::normal();
  ASSERT_EQ(q.nodes.size(), 61u);
  EXPECT_EQ(q.nodes.front(), -5.0);
  EXPECT_EQ(q.nodes.back(), 5.0);
  double sum = 0, m1 = 0, m2 = 0;
  for (std::size_t k = 0; k < 61; ++k) {
    sum += q.weights[k];
    m1 += q.weights[k] * q.nodes[k];
    m2 += q.weights[k] * q.nodes[k] * q.nodes[k];
  }
  EXPECT_NEAR(sum, 1.0, 1e-14);
  EXPECT_NEAR(m1, 0.0, 1e-14);
  EXPECT_NEAR(m2, 1.0, 1e-4);
}

IrtModel reference_nr(std::size_t J, int M, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto items = testing::make_items(J, M, rng);
  std::uniform_real_distribution<double> a(-1.5, 1.5), b(-1.0, 1.0);
  std::vector<NrItemParams> params;
  for (std::size_t j = 0; j < J; ++j) {
    NrItemParams p{{0.0}, {0.0}};
    for (int m = 1; m < M; ++m) {
      p.slope.push_back(a(rng));
      p.intercept.push_back(b(rng));
    }
    params.push_back(p);
  }
  return IrtModel(std::move(items), false, std::move(params));
}

ResponseMatrix simulate(const IrtModel& model, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<int> codes;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < N; ++i) {
    const double t = z(rng);
    for (std::size_t j = 0; j < model.n_items(); ++j) {
      const auto p = model.probs(j, t);
      codes.push_back(std::discrete_distribution<int>(p.begin(), p.end())(rng));
    }
    ids.push_back(std::to_string(i));
  }
  return ResponseMatrix(model.items(), std::move(ids), std::move(codes), false);
}

TEST(Mml, RecoversGeneratingParameters) {
  const auto truth = reference_nr(10, 4, 3);
  const auto rm = simulate(truth, 2000, 4);
  const auto res = mml_fit_nr(rm);
  EXPECT_TRUE(res.trace.converged);
  EXPECT_EQ(res.fitted.fitter(), "mml");
  EXPECT_FALSE(res.fitted.has_encoder());
  std::vector<double> ta, ea, tb, eb;
  for (std::size_t j = 0; j < 10; ++j) {
    const auto& t = truth.nr_items()[j];
    const auto& e = res.fitted.model().nr_items()[j];
    EXPECT_EQ(e.slope[0], 0.0);
    EXPECT_EQ(e.intercept[0], 0.0);
    for (int m = 1; m < 4; ++m) {
      ta.push_back(t.slope[m]);
      ea.push_back(e.slope[m]);
      tb.push_back(t.intercept[m]);
      eb.push_back(e.intercept[m]);
    }
  }
  EXPECT_GE(pearson(ta, ea), 0.9);
  EXPECT_GE(pearson(tb, eb), 0.9);
}

TEST(Mml, MarginalLikelihoodNeverDecreases) {
  const auto rm = simulate(reference_nr(8, 3, 5), 800, 6);
  const auto res = mml_fit_nr(rm);
  const auto& ll = res.trace.marginal_loglik;
  ASSERT_GE(ll.size(), 2u);
  for (std::size_t k = 1; k < ll.size(); ++k) EXPECT_GE(ll[k], ll[k - 1] - 1e-8 * std::abs(ll[k - 1])) << k;
  EXPECT_NEAR(ll.back(), marginal_loglik(res.fitted.model(), rm, QuadratureRule::normal()), 1e-8 * std::abs(ll.back()));
}

// Independent two-parameter logistic EM: P(1 | t) = sigmoid(a t + b).
std::vector<std::pair<double, double>> fit_2pl(const ResponseMatrix& rm, const QuadratureRule& q) {
  const std::size_t J = rm.n_items(), N = rm.n_persons(), Q = q.nodes.size();
  std::vector<std::pair<double, double>> ab(J, {1.0, 0.0});
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<double> n(J * Q, 0.0), r(J * Q, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      std::vector<double> post(Q);
      double total = 0;
      for (std::size_t k = 0; k < Q; ++k) {
        double lp = std::log(q.weights[k]);
        for (std::size_t j = 0; j < J; ++j) {
          const double p = 1 / (1 + std::exp(-(ab[j].first * q.nodes[k] + ab[j].second)));
          lp += std::log(rm.code(i, j) == 1 ? p : 1 - p);
        }
        post[k] = std::exp(lp);
        total += post[k];
      }
      for (std::size_t k = 0; k < Q; ++k)
        for (std::size_t j = 0; j < J; ++j) {
          n[j * Q + k] += post[k] / total;
          if (rm.code(i, j) == 1) r[j * Q + k] += post[k] / total;
        }
    }
    double change = 0;
    for (std::size_t j = 0; j < J; ++j) {
      for (int step = 0; step < 50; ++step) {
        double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
        for (std::size_t k = 0; k < Q; ++k) {
          const double t = q.nodes[k];
          const double p = 1 / (1 + std::exp(-(ab[j].first * t + ab[j].second)));
          const double e = r[j * Q + k] - n[j * Q + k] * p;
          const double w = n[j * Q + k] * p * (1 - p);
          ga += e * t;
          gb += e;
          haa += w * t * t;
          hab += w * t;
          hbb += w;
        }
        const double det = haa * hbb - hab * hab;
        const double da = (hbb * ga - hab * gb) / det;
        const double db = (haa * gb - hab * ga) / det;
        ab[j].first += da;
        ab[j].second += db;
        change = std::max({change, std::abs(da), std::abs(db)});
        if (std::abs(da) + std::abs(db) < 1e-10) break;
      }
    }
    if (change < 1e-7) break;
  }
  return ab;
}

TEST(Mml, TwoCategoryMatchesTwoParameterLogistic) {
  const auto truth = reference_nr(6, 2, 8);
  const auto rm = simulate(truth, 1500, 9);
  const auto q = QuadratureRule::normal();
  const auto nr = mml_fit_nr(rm);
  const auto twopl = fit_2pl(rm, q);
  double worst = 0;
  for (std::size_t j = 0; j < 6; ++j)
    for (double t : q.nodes) {
      const double p_nr = nr.fitted.model().probs(j, t)[1];
      const double p_2pl = 1 / (1 + std::exp(-(twopl[j].first * t + twopl[j].second)));
      worst = std::max(worst, std::abs(p_nr - p_2pl));
    }
  EXPECT_LT(worst, 0.01);
}

TEST(Mml, DenserQuadratureAgrees) {
  const auto rm = simulate(reference_nr(8, 4, 10), 1000, 11);
  const auto coarse = mml_fit_nr(rm);
  MmlOptions dense;
  dense.quadrature = QuadratureRule::normal(121, -6, 6);
  const auto fine = mml_fit_nr(rm, dense);
  double worst = 0;
  for (std::size_t j = 0; j < 8; ++j)
    for (double t = -3; t <= 3; t += 0.25) {
      const auto a = coarse.fitted.model().probs(j, t);
      const auto b = fine.fitted.model().probs(j, t);
      for (std::size_t m = 0; m < a.size(); ++m) worst = std::max(worst, std::abs(a[m] - b[m]));
    }
  EXPECT_LT(worst, 0.01);
}

TEST(Mml, ThreadsDoNotChangeFit) {
  const auto rm = simulate(reference_nr(5, 3, 12), 400, 13);
  MmlOptions many;
  many.threads = 4;
  const auto a = mml_fit_nr(rm);
  const auto b = mml_fit_nr(rm, many);
  EXPECT_EQ(model_to_json(a.fitted.model()).dump(), model_to_json(b.fitted.model()).dump());
}

TEST(MmlScore, AllReferenceRespondentAtLowerBound) {
  std::vector<ResponseMatrix::Item> items;
  std::vector<NrItemParams> params;
  for (int j = 0; j < 5; ++j) {
    items.push_back({"i" + std::to_string(j), 3, 2});
    params.push_back({{0.0, 0.8, 1.6}, {0.0, 0.3, -0.2}});
  }
  const IrtModel model(items, false, params);
  const ResponseMatrix rm(items, {"x"}, {0, 0, 0, 0, 0}, false);
  const auto est = mml_score(model, rm);
  EXPECT_EQ(est.theta[0], model.bounds().lo);
  EXPECT_EQ(est.theta, mml_score(model, rm).theta);
}

}  // namespace
}  // namespace mmcirt
