// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 when any fails.

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "mmcirt/bitscale.hpp"
#include "mmcirt/evaluation.hpp"
#include "mmcirt/mml.hpp"
#include "mmcirt/scoring.hpp"
#include "mmcirt/simulation.hpp"
#include "mmcirt/stats.hpp"
#include "../support.hpp"

namespace fs = std::filesystem;
using namespace mmcirt;

namespace {

// Tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kGradAbsFloor = 1e-8;
constexpr double kMonotoneSlack = 1e-9;
constexpr double kRiseFallTol = 1e-12;
constexpr double kGridDoublingTol = 1e-3;
constexpr double kScoreTol = 1e-3;
constexpr double kRecoveryCorr = 0.9;
constexpr double kEmSlack = 1e-8;
constexpr double kBeatShare = 0.9;
constexpr double kSpearman = 0.85;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned threads() { return 0; }

ResponseMatrix sample_from(const IrtModel& model, std::size_t n, std::uint64_t seed, std::vector<double>* theta = nullptr) {
  auto data = generate(model_spec(model), n, seed);
  if (theta) *theta = data.true_theta;
  return data.responses;
}

// 1. Analytic gradients against central differences.
Outcome gradients() {
  std::size_t configs = 0;
  double worst = 0.0;
  std::string where;
  for (std::uint64_t s = 0; s < 24; ++s) {
    const Variant v = s % 2 ? Variant::mmc : Variant::nr;
    const std::size_t depth = (s / 2) % 2 ? 3 : 1;
    std::mt19937_64 rng(1000 + s);
    const std::size_t J = 2 + s % 3;
    const int M = 2 + static_cast<int>(s % 4);
    auto rm = testing::random_responses(testing::make_items(J, M, rng), 3 + s % 4, 2000 + s);
    Hyperparams hp;
    hp.hidden_layers = depth;
    auto ae = build_autoencoder(v, rm, hp, 3000 + s);
    std::normal_distribution<double> n(0.0, 0.7);
    for (Eigen::Index k = 0; k < ae.params.values().size(); ++k) ae.params.values()(k) = n(rng);
    const auto r = testing::gradient_check(ae.params, ae.layout, one_hot(rm), rm.codes(), kGradEps, kGradAbsFloor);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = fmt("%s L=%zu seed %llu", std::string(to_string(v)).c_str(), depth, static_cast<unsigned long long>(s));
    }
    ++configs;
  }
  return {worst < kGradRelTol, fmt("%zu configs (NR, MMC L=1,3), max relative error %.2e (%s)", configs, worst, where.c_str())};
}

// 2. Correct-option IRF and every subnet non-decreasing.
Outcome monotonicity() {
  std::mt19937_64 rng(77);
  const auto grid = linspace(-10, 10, 201);
  const std::size_t depths[] = {1, 2, 3, 5, 7};
  double worst_irf = 0.0, worst_net = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const int M = 2 + draw % 5;
    const std::size_t depth = depths[draw % 5];
    std::uniform_real_distribution<double> wm(-3.0, 2.0), sp(0.5, 3.0);
    const auto p = testing::random_mmc(M, depth, rng, wm(rng), sp(rng));
    const int c = static_cast<int>(rng() % static_cast<std::uint64_t>(M));
    double last = -1.0;
    for (double t : grid) {
      const double q = mmc_probs(p, c, t)[static_cast<std::size_t>(c)];
      worst_irf = std::max(worst_irf, last - q);
      last = q;
    }
    for (const auto& net : p.subnets) {
      double prev = -INFINITY;
      for (double t : grid) {
        const double y = monotone_forward(net, t);
        worst_net = std::max(worst_net, prev - y);
        prev = y;
      }
    }
  }
  return {worst_irf <= kMonotoneSlack && worst_net <= kMonotoneSlack,
          fmt("1000 draws, largest IRF drop %.2e, largest subnet drop %.2e", worst_irf, worst_net)};
}

// 3. Bit-scale axioms.
Outcome bit_axioms() {
  std::vector<std::string> bad;
  if (surprisal(0.0625) != 4.0) bad.push_back("surprisal(0.0625)");
  if (surprisal(1.0) != 0.0) bad.push_back("surprisal(1)");
  const double uniform[] = {0.25, 0.25, 0.25, 0.25};
  if (entropy_bits(uniform) != 2.0) bad.push_back("uniform entropy");

  const EntropyCurve rise_fall{0, {0.0, 1.0, 2.0}, {1.0, 1.13, 0.64}};
  const double rise_fall_bits = bit_score(build_bitscale(std::span(&rise_fall, 1), 0.0), 2.0).total;
  if (std::abs(rise_fall_bits - 0.62) > kRiseFallTol) bad.push_back("rise/fall case");

  const auto model = testing::random_mmc_model(12, 4, 2, 5, 0.0, ThetaBounds{-6, 6});
  const double theta0 = calibrate_theta0(model, 1000, 3, threads());
  const auto table = build_bitscale(model, theta0, 1001);
  for (std::size_t k = 0; k < table.theta.size(); ++k) {
    double sum = 0.0;
    for (const auto& b : table.item_bits) sum += b[k];
    if (sum != table.total[k]) bad.push_back("additivity");
    if (k > 0 && table.total[k] < table.total[k - 1]) bad.push_back("non-decreasing");
    if (table.theta[k] == theta0 && table.total[k] != 0.0) bad.push_back("zero at theta0");
  }
  const auto fine = build_bitscale(model, theta0, 2001);
  const double change = std::abs(fine.total.back() - table.total.back()) / fine.total.back();
  if (!(change < kGridDoublingTol)) bad.push_back("grid doubling");
  std::set<std::string> uniq(bad.begin(), bad.end());
  std::string failed;
  for (const auto& b : uniq) failed += " " + b;
  return {uniq.empty(), fmt("rise/fall case %.15f bits, theta0 %.3f, B(hi) %.4f, grid doubling change %.2e%s%s", rise_fall_bits,
                            theta0, table.total.back(), change, uniq.empty() ? "" : "; failed:", failed.c_str())};
}

// 4. ML scores against a brute-force grid, and ML >= NN on holdout.
Outcome scoring() {
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto model = k % 2 ? testing::random_mmc_model(10, 4, 1 + k % 3, 400 + k, 0.0, ThetaBounds{-5, 5})
                             : testing::random_nr_model(10, 4, 400 + k, 1.0, ThetaBounds{-5, 5});
    const auto rm = sample_from(model, 1, 500 + k);
    const double ml = ml_theta(model, rm.row(0));
    double best = -5.0, best_ll = -INFINITY;
    for (int g = 0; g <= 20000; ++g) {
      const double t = -5.0 + 10.0 * g / 20000.0;
      const double ll = model.log_likelihood(t, rm.row(0));
      if (ll > best_ll) {
        best_ll = ll;
        best = t;
      }
    }
    worst = std::max(worst, std::abs(ml - best));
  }

  std::size_t runs = 0, ok = 0;
  const auto spec = synthetic_spec(15, 4, 8);
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto data = generate(spec, 800, 600 + s).responses;
    const auto [train, test] = split(data, SplitSpec{0.8, s, 5});
    Hyperparams hp;
    hp.epochs = 40;
    hp.seed = s;
    const auto f = fit(s % 2 ? Variant::mmc : Variant::nr, train, hp);
    ++runs;
    ok += holdout_loglik(f, test, ScoreMethod::ml) >= holdout_loglik(f, test, ScoreMethod::nn);
  }
  return {worst <= kScoreTol && ok == runs,
          fmt("100 persons/models, max |ML - grid argmax| %.2e; holdout ML >= NN in %zu/%zu fits", worst, ok, runs)};
}

// 5. MML parameter recovery and EM ascent.
Outcome mml_recovery() {
  std::mt19937_64 rng(55);
  auto items = testing::make_items(20, 4, rng);
  std::uniform_real_distribution<double> a(-1.5, 1.5), b(-1.0, 1.0);
  std::vector<NrItemParams> params;
  for (int j = 0; j < 20; ++j) {
    NrItemParams p{{0.0}, {0.0}};
    for (int m = 1; m < 4; ++m) {
      p.slope.push_back(a(rng));
      p.intercept.push_back(b(rng));
    }
    params.push_back(p);
  }
  const IrtModel truth(items, false, params);
  const auto rm = sample_from(truth, 5000, 56);
  MmlOptions opts;
  opts.threads = threads();
  const auto res = mml_fit_nr(rm, opts);
  std::vector<double> ta, ea, tb, eb;
  for (int j = 0; j < 20; ++j)
    for (int m = 1; m < 4; ++m) {
      ta.push_back(params[j].slope[m]);
      tb.push_back(params[j].intercept[m]);
      ea.push_back(res.fitted.model().nr_items()[j].slope[m]);
      eb.push_back(res.fitted.model().nr_items()[j].intercept[m]);
    }
  const auto& ll = res.trace.marginal_loglik;
  double worst_drop = 0.0;
  for (std::size_t k = 1; k < ll.size(); ++k) worst_drop = std::max(worst_drop, (ll[k - 1] - ll[k]) / std::abs(ll[k - 1]));
  const double ra = pearson(ta, ea), rb = pearson(tb, eb);
  return {ra >= kRecoveryCorr && rb >= kRecoveryCorr && worst_drop <= kEmSlack,
          fmt("r(slope) %.4f, r(intercept) %.4f, %zu EM cycles, converged %s, largest relative drop %.2e", ra, rb,
              res.trace.iterations, res.trace.converged ? "yes" : "no", worst_drop)};
}

// 6. Model ordering on synthetic data.
Outcome ordering() {
  SimConfig cfg;
  cfg.generator = synthetic_spec(20, 4, 2024);
  cfg.lengths = {20};
  cfg.sample_sizes = {2000};
  cfg.replications = 20;
  cfg.population = 6000;
  cfg.seed = 7;
  cfg.threads = threads();
  const auto res = run_simulation(cfg);
  std::map<std::string, double> mean_ll;
  std::map<std::string, std::size_t> fails;
  for (const auto& c : res.cells) {
    mean_ll[c.model] = c.loglik_ml;
    fails[c.model] = c.failures;
  }
  std::size_t beats = 0, pairs = 0;
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    const auto& mmc = res.replicates[r * 3 + 0];
    const auto& mml = res.replicates[r * 3 + 2];
    ++pairs;
    beats += !mmc.failed && !mml.failed && mmc.loglik_ml > mml.loglik_ml;
  }
  const double a = mean_ll["MMC-AE"], b = mean_ll["NR-AE"], c = mean_ll["NR-MML"];
  const bool order = a > b && b > c;
  const double share = static_cast<double>(beats) / static_cast<double>(pairs);
  return {order && share >= kBeatShare,
          fmt("mean holdout loglik per response: MMC-AE %.5f, NR-AE %.5f, NR-MML %.5f; MMC-AE > NR-MML in %zu/%zu "
              "replications; failures %zu/%zu/%zu",
              a, b, c, beats, pairs, fails["MMC-AE"], fails["NR-AE"], fails["NR-MML"])};
}

// 7. The non-monotone NR item versus an MMC fit to its data.
Outcome pathology() {
  const NrItemParams item{{1.84, -1.09, -0.76, -1.09, 1.09}, {-3.27, 0.34, 0.21, 0.47, 2.25}};
  const auto grid = linspace(-10, 10, 2001);
  std::size_t argmax = 0;
  double peak = -1.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double p = nr_probs(item, grid[k])[4];
    if (p > peak) {
      peak = p;
      argmax = k;
    }
  }
  const bool interior = argmax > 0 && argmax + 1 < grid.size();
  const double beyond = nr_probs(item, grid.back())[4];
  const bool nr_falls = interior && beyond < peak - 1e-3;

  // That item plus 19 ordinary companions; fit MMC and inspect the item's key curve.
  std::mt19937_64 rng(71);
  std::vector<ResponseMatrix::Item> items{{"target", 5, 4}};
  std::vector<NrItemParams> params{item};
  std::uniform_real_distribution<double> slope(0.8, 2.0), inter(-1.0, 1.0), dslope(-0.6, 0.2);
  for (int j = 1; j < 20; ++j) {
    const int c = static_cast<int>(rng() % 4);
    NrItemParams p;
    for (int m = 0; m < 4; ++m) {
      p.slope.push_back(m == c ? slope(rng) : dslope(rng));
      p.intercept.push_back(inter(rng));
    }
    items.push_back({"c" + std::to_string(j), 4, c});
    params.push_back(p);
  }
  const IrtModel truth(items, false, params);
  const auto rm = sample_from(truth, 3000, 72);
  Hyperparams hp;
  hp.epochs = 60;
  hp.seed = 73;
  const auto fitted = fit(Variant::mmc, rm, hp);
  const auto b = fitted.model().bounds();
  double worst_drop = 0.0, last = -1.0;
  for (double t : linspace(b.lo, b.hi, 2001)) {
    const double p = fitted.model().probs(0, t)[4];
    worst_drop = std::max(worst_drop, last - p);
    last = p;
  }
  return {nr_falls && worst_drop <= kMonotoneSlack,
          fmt("NR key curve peaks at theta %.2f (p %.4f) and falls to %.4f at theta 10; MMC key curve largest drop %.2e",
              grid[argmax], peak, beyond, worst_drop)};
}

// 8. MMC-AE recovers its own generator's latent order.
Outcome recovery() {
  std::mt19937_64 rng(81);
  std::vector<MmcItemParams> params;
  std::vector<ResponseMatrix::Item> items;
  std::uniform_real_distribution<double> bias(-1.0, 1.0), tau(0.8, 1.5);
  for (int j = 0; j < 40; ++j) {
    MmcItemParams p;
    p.tau = tau(rng);
    for (int m = 0; m < 4; ++m) {
      p.intercept.push_back(bias(rng));
      MonotoneSubnet net;
      MonotoneLayer layer;
      layer.raw_weights = {bias(rng) - 0.5, bias(rng) - 0.5, bias(rng) - 0.5};
      layer.bias = {bias(rng), bias(rng), bias(rng)};
      net.layers.push_back(layer);
      p.subnets.push_back(net);
    }
    items.push_back({"i" + std::to_string(j + 1), 4, static_cast<int>(rng() % 4)});
    params.push_back(p);
  }
  const IrtModel truth(items, false, params);
  std::vector<double> theta;
  const auto rm = sample_from(truth, 2000, 82, &theta);
  Hyperparams hp;
  hp.seed = 83;
  hp.epochs = 100;
  const auto fitted = fit(Variant::mmc, rm, hp);
  MlOptions opts;
  opts.threads = threads();
  const auto est = score_ml(fitted, rm, opts);
  const double rho = spearman(theta, est.theta);
  return {rho >= kSpearman, fmt("Spearman(true theta, ML theta) %.4f over 2000 persons, 40 items", rho)};
}

// 9. Every CLI pipeline replays byte-identically.
int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli path given"};
  const fs::path dir = testing::temp_dir("acceptance_cli");
  const std::string d = dir.string();
  const std::string data = " --data " + d + "/gen/responses.csv";
  const std::string key = " --key " + d + "/gen/key.csv";
  const std::vector<std::pair<std::string, std::string>> runs{
      {"gen", "generate --items 10 --persons 500 --missing-rate 0.05 --seed 3"},
      {"fit_mmc", "fit --model mmc --epochs 15 --missing" + data + key},
      {"fit_nr", "fit --model nr --epochs 15 --seed 4 --missing" + data + key},
      {"fit_mml", "fit --model nr --fitter mml --missing" + data + key},
      {"score", "score --fitted " + d + "/fit_mmc/model.json" + data},
      {"bit", "bit --fitted " + d + "/fit_mmc/model.json --grid-size 501" + data},
      {"eval", "eval --fitted " + d + "/fit_mml/model.json" + data},
      {"irf", "export-irf --fitted " + d + "/fit_nr/model.json --axis bit --svg" + data},
      {"cv", "cv --model nr --folds 2 --epochs 3 --missing" + data + key},
      {"sim", "simulate --items 8 --lengths 6 --sizes 150 --replications 2 --population 400 --epochs 3"},
  };
  std::size_t files = 0;
  std::vector<std::string> bad;
  for (const auto& [name, args] : runs) {
    if (shell(cli + " " + args + " --out " + d + "/" + name) != 0) {
      bad.push_back(name + " (run)");
      continue;
    }
    if (shell(cli + " replay --manifest " + d + "/" + name + "/manifest.json --out " + d + "/" + name + "_replay") != 0) {
      bad.push_back(name + " (replay)");
      continue;
    }
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(dir / name)) {
      if (e.path().extension() != ".csv") continue;
      ++compared;
      ++files;
      const fs::path other = dir / (name + "_replay") / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) bad.push_back(name + "/" + e.path().filename().string());
    }
    if (compared == 0) bad.push_back(name + " (no csv)");
  }
  fs::remove_all(dir);
  std::string failed;
  for (const auto& b : bad) failed += " " + b;
  return {bad.empty(), fmt("%zu pipelines, %zu CSV files compared%s%s", runs.size(), files, bad.empty() ? "" : "; mismatched:",
                           failed.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmc-irt acceptance checks"};
  std::string cli;
  std::string report;
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the mmc-irt executable");
  app.add_option("--report", report, "Also write the result lines to this file");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"monotonicity", monotonicity},
      {"bit-scale axioms", bit_axioms},
      {"scoring oracle", scoring},
      {"MML recovery", mml_recovery},
      {"model ordering", ordering},
      {"NR pathology", pathology},
      {"theta recovery", recovery},
      {"CLI determinism", [&] { return determinism(cli); }},
  };
  std::ofstream report_file;
  if (!report.empty()) report_file.open(report);
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << criteria[k].first << ": " << o.detail << " ["
         << fmt("%.1f", secs) << " s]";
    std::cout << line.str() << std::endl;
    if (report_file) report_file << line.str() << std::endl;
  }
  return all ? 0 : 1;
}
