#include "mmcirt/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "mmcirt/csv.hpp"
#include "mmcirt/error.hpp"
#include "mmcirt/evaluation.hpp"
#include "mmcirt/mml.hpp"
#include "mmcirt/scoring.hpp"
#include "mmcirt/stats.hpp"

namespace mmcirt {

LatentDistribution LatentDistribution::skewed_mixture() {
  LatentDistribution d;
  d.components = {{0.8, -0.8, 0.5}, {0.2, 1.8, 1.0}};
  return d;
}

double LatentDistribution::sample(std::mt19937_64& rng) const {
  double total = 0.0;
  for (const auto& c : components) total += c.weight;
  std::uniform_real_distribution<double> u(0.0, total);
  double x = u(rng);
  const Component* pick = &components.back();
  for (const auto& c : components) {
    if (x < c.weight) {
      pick = &c;
      break;
    }
    x -= c.weight;
  }
  std::normal_distribution<double> n(pick->mean, pick->sd);
  return n(rng);
}

double LatentDistribution::density(double x) const {
  double total = 0.0;
  double d = 0.0;
  for (const auto& c : components) {
    total += c.weight;
    const double z = (x - c.mean) / c.sd;
    d += c.weight * std::exp(-0.5 * z * z) / (c.sd * std::sqrt(2.0 * std::numbers::pi));
  }
  return d / total;
}

std::vector<double> GeneratorSpec::probs(std::size_t j, double theta) const {
  if (model) {
    auto p = model->probs(j, theta);
    p.resize(static_cast<std::size_t>(items[j].options));
    return p;
  }
  const auto& rows = tables[j].probs;
  if (theta <= grid.front()) return rows.front();
  if (theta >= grid.back()) return rows.back();
  const auto k = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), theta) - grid.begin()) - 1;
  const double w = (theta - grid[k]) / (grid[k + 1] - grid[k]);
  std::vector<double> p(rows[k].size());
  for (std::size_t m = 0; m < p.size(); ++m) p[m] = rows[k][m] + w * (rows[k + 1][m] - rows[k][m]);
  return p;
}

void GeneratorSpec::validate() const {
  if (items.empty()) fail_config("generator has no items");
  if (latent.components.empty()) fail_config("latent distribution has no components");
  for (const auto& c : latent.components)
    if (!(c.weight > 0.0) || !(c.sd > 0.0)) fail_config("latent components need positive weight and sd");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) fail_config("missing rate must lie in [0, 1)");
  if (model) {
    if (model->n_items() != items.size() || model->missing_as_category())
      fail_config("generator model does not match its item list");
    return;
  }
  if (tables.size() != items.size() || grid.size() < 2) fail_config("generator tables do not match its item list");
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (tables[j].probs.size() != grid.size()) fail_config("generator table has the wrong number of grid rows");
    for (const auto& row : tables[j].probs) {
      if (row.size() != static_cast<std::size_t>(items[j].options))
        fail_config("generator table row has the wrong number of options");
      double s = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) fail_config("generator probability outside [0, 1]");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) fail_config("generator probabilities do not sum to 1");
    }
  }
}

GeneratorSpec synthetic_spec(std::size_t n_items, int options, std::uint64_t seed) {
  if (n_items == 0 || options < 2) fail_config("synthetic generator needs items with at least two options");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto unif = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  std::normal_distribution<double> n01(0.0, 1.0);

  GeneratorSpec spec;
  spec.latent = LatentDistribution::skewed_mixture();
  spec.grid = linspace(-6.0, 6.0, 241);
  for (std::size_t j = 0; j < n_items; ++j) {
    std::uniform_int_distribution<int> key(0, options - 1);
    const int c = key(rng);
    spec.items.push_back({"item" + std::to_string(j + 1), options, c});

    const double floor = unif(0.1, 0.3);
    const double ceiling = unif(0.95, 0.99);
    const double w = unif(0.3, 0.7);
    const double a1 = unif(1.0, 2.5);
    const double b1 = unif(-1.5, 0.5);
    const double a2 = unif(0.8, 2.5);
    const double b2 = b1 + unif(1.0, 2.5);
    std::vector<double> slope(static_cast<std::size_t>(options));
    std::vector<double> shift(static_cast<std::size_t>(options));
    for (auto& s : slope) s = unif(-0.4, 0.4);
    for (auto& s : shift) s = 0.5 * n01(rng);

    TabulatedItem item;
    for (double t : spec.grid) {
      const double rise = w * act::sigmoid(a1 * (t - b1)) + (1.0 - w) * act::sigmoid(a2 * (t - b2));
      const double pc = floor + (ceiling - floor) * rise;
      std::vector<double> z(static_cast<std::size_t>(options), -std::numeric_limits<double>::infinity());
      for (int m = 0; m < options; ++m)
        if (m != c) z[static_cast<std::size_t>(m)] = slope[static_cast<std::size_t>(m)] * t + shift[static_cast<std::size_t>(m)];
      softmax_inplace(z);
      std::vector<double> row(static_cast<std::size_t>(options));
      for (int m = 0; m < options; ++m)
        row[static_cast<std::size_t>(m)] = m == c ? pc : (1.0 - pc) * z[static_cast<std::size_t>(m)];
      item.probs.push_back(std::move(row));
    }
    spec.tables.push_back(std::move(item));
  }
  return spec;
}

GeneratorSpec model_spec(IrtModel model, LatentDistribution latent) {
  if (model.missing_as_category()) fail_config("generator models cannot include a missing category");
  GeneratorSpec spec;
  spec.items = model.items();
  spec.latent = std::move(latent);
  spec.model = std::move(model);
  return spec;
}

GeneratedData generate(const GeneratorSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t J = spec.n_items();
  const bool missing = spec.missing_rate > 0.0;
  const double miss_logit = missing ? std::log(spec.missing_rate / (1.0 - spec.missing_rate)) : 0.0;

  GeneratedData out;
  out.true_theta.resize(n);
  std::vector<int> codes(n * J);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = "p" + std::to_string(i + 1);
    const double theta = spec.latent.sample(rng);
    out.true_theta[i] = theta;
    for (std::size_t j = 0; j < J; ++j) {
      const auto p = spec.probs(j, theta);
      double x = u(rng);
      int code = static_cast<int>(p.size()) - 1;
      for (std::size_t m = 0; m < p.size(); ++m) {
        if (x < p[m]) {
          code = static_cast<int>(m);
          break;
        }
        x -= p[m];
      }
      // Guard against the rounding tail landing on a zero-probability option.
      while (code > 0 && p[static_cast<std::size_t>(code)] == 0.0) --code;
      if (missing && u(rng) < act::sigmoid(miss_logit - spec.missing_slope * theta)) code = kMissingCode;
      codes[i * J + j] = code;
    }
  }
  out.responses = ResponseMatrix(spec.items, std::move(ids), std::move(codes), missing);
  return out;
}

std::vector<std::vector<std::size_t>> fixed_item_subsets(std::size_t total, std::span<const std::size_t> lengths,
                                                         std::uint64_t seed) {
  if (!std::is_sorted(lengths.begin(), lengths.end())) fail_config("test lengths must be ascending");
  if (!lengths.empty() && (lengths.front() == 0 || lengths.back() > total))
    fail_config("test lengths must lie in [1, " + std::to_string(total) + "]");
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (auto len : lengths) {
    std::vector<std::size_t> s(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(len));
    std::sort(s.begin(), s.end());
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SimModel> default_sim_models() {
  Hyperparams hp;
  hp.validation_fraction = 0.0;
  return {{"MMC-AE", Variant::mmc, Fitter::ae, hp},
          {"NR-AE", Variant::nr, Fitter::ae, hp},
          {"NR-MML", Variant::nr, Fitter::mml, hp}};
}

namespace {

struct Outcome {
  double loglik = 0.0;
  double resid = 0.0;
};

Outcome per_response(const IrtModel& model, const ResponseMatrix& eval, std::span<const double> theta) {
  const auto ll = person_loglik(model, eval, theta);
  const auto r = per_response_residuals(model, eval, theta);
  const double responses = static_cast<double>(eval.n_persons() * eval.n_items());
  return {std::accumulate(ll.begin(), ll.end(), 0.0) / responses, std::accumulate(r.begin(), r.end(), 0.0) / responses};
}

std::pair<double, double> mean_se(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  const double m = mean(v);
  const double se = v.size() < 2 ? 0.0 : sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
  return {m, se};
}

}  // namespace

SimResult run_simulation(const SimConfig& cfg) {
  if (cfg.replications < 1) fail_config("replications must be at least 1");
  if (cfg.models.empty()) fail_config("no models to compare");
  if (cfg.lengths.empty() || cfg.sample_sizes.empty()) fail_config("lengths and sample sizes must be non-empty");
  for (const auto& m : cfg.models) {
    if (m.fitter == Fitter::mml && m.variant != Variant::nr) fail_config("MML fitting is only available for NR");
    validate(m.hp);
  }

  ResponseMatrix population;
  if (cfg.source) {
    population = *cfg.source;
  } else {
    population = generate(cfg.generator, cfg.population, derive_seed(cfg.seed, {0x706f70ULL})).responses;
  }
  std::vector<std::size_t> lengths = cfg.lengths;
  std::sort(lengths.begin(), lengths.end());
  if (lengths.back() > population.n_items())
    fail_config("test length " + std::to_string(lengths.back()) + " exceeds the " +
                std::to_string(population.n_items()) + " available items");
  for (auto n : cfg.sample_sizes)
    if (n < 1 || n >= population.n_persons())
      fail_config("sample size " + std::to_string(n) + " leaves no evaluation complement");
  const auto subsets = fixed_item_subsets(population.n_items(), lengths, derive_seed(cfg.seed, {0x737562ULL}));
  std::vector<ResponseMatrix> tests;
  for (const auto& s : subsets) tests.push_back(population.select_items(s));

  const std::size_t M = cfg.models.size();
  const std::size_t R = cfg.replications;
  std::vector<SimReplicate> reps(lengths.size() * cfg.sample_sizes.size() * R * M);
  const auto rep_index = [&](std::size_t li, std::size_t ni, std::size_t r, std::size_t m) {
    return ((li * cfg.sample_sizes.size() + ni) * R + r) * M + m;
  };

  const std::size_t tasks = reps.size();
  parallel_for(tasks, cfg.threads, [&](std::size_t task) {
    const std::size_t m = task % M;
    const std::size_t r = (task / M) % R;
    const std::size_t ni = (task / (M * R)) % cfg.sample_sizes.size();
    const std::size_t li = task / (M * R * cfg.sample_sizes.size());
    const std::size_t len = lengths[li];
    const std::size_t n = cfg.sample_sizes[ni];
    const auto [train, eval] = sample_without_replacement(tests[li], n, derive_seed(cfg.seed, {len, n, r}));
    const auto& spec = cfg.models[m];

    SimReplicate& out = reps[rep_index(li, ni, r, m)];
    out = {len, n, r, m, false, {}, 0.0, std::numeric_limits<double>::quiet_NaN(), 0.0,
           std::numeric_limits<double>::quiet_NaN()};
    try {
      if (spec.fitter == Fitter::mml) {
        const auto result = mml_fit_nr(train);
        const auto& model = result.fitted.model();
        const auto o = per_response(model, eval, mml_score(model, eval).theta);
        out.loglik_ml = o.loglik;
        out.resid_ml = o.resid;
      } else {
        Hyperparams hp = spec.hp;
        hp.seed = derive_seed(cfg.seed, {len, n, r, m, 0x6669ULL});
        const auto fitted = fit(spec.variant, train, hp);
        const auto ml = per_response(fitted.model(), eval, score_ml(fitted, eval).theta);
        const auto nn = per_response(fitted.model(), eval, score_nn(fitted, eval).theta);
        out.loglik_ml = ml.loglik;
        out.resid_ml = ml.resid;
        out.loglik_nn = nn.loglik;
        out.resid_nn = nn.resid;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::config) throw;
      out.failed = true;
      out.error = e.what();
    }
  });

  SimResult result;
  for (std::size_t li = 0; li < lengths.size(); ++li)
    for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni)
      for (std::size_t m = 0; m < M; ++m) {
        SimCell cell;
        cell.length = lengths[li];
        cell.sample_size = cfg.sample_sizes[ni];
        cell.model = cfg.models[m].name;
        std::vector<double> lml, lnn, rml, rnn;
        for (std::size_t r = 0; r < R; ++r) {
          const auto& rep = reps[rep_index(li, ni, r, m)];
          if (rep.failed) {
            ++cell.failures;
            continue;
          }
          lml.push_back(rep.loglik_ml);
          rml.push_back(rep.resid_ml);
          if (!std::isnan(rep.loglik_nn)) {
            lnn.push_back(rep.loglik_nn);
            rnn.push_back(rep.resid_nn);
          }
        }
        cell.count = lml.size();
        cell.se_defined = cell.count >= 2;
        std::tie(cell.loglik_ml, cell.loglik_ml_se) = mean_se(lml);
        std::tie(cell.loglik_nn, cell.loglik_nn_se) = mean_se(lnn);
        std::tie(cell.resid_ml, cell.resid_ml_se) = mean_se(rml);
        std::tie(cell.resid_nn, cell.resid_nn_se) = mean_se(rnn);
        result.cells.push_back(std::move(cell));
      }
  result.replicates = std::move(reps);
  return result;
}

void write_sim_result(const SimResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  csv::write_row(out, {"n", "items", "model", "count", "failures", "loglik_ml", "loglik_ml_se", "loglik_nn",
                       "loglik_nn_se", "resid_ml", "resid_ml_se", "resid_nn", "resid_nn_se", "se_defined"});
  const auto fmt = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string(); };
  for (const auto& c : result.cells)
    csv::write_row(out, {std::to_string(c.sample_size), std::to_string(c.length), c.model, std::to_string(c.count),
                         std::to_string(c.failures), fmt(c.loglik_ml), fmt(c.loglik_ml_se), fmt(c.loglik_nn),
                         fmt(c.loglik_nn_se), fmt(c.resid_ml), fmt(c.resid_ml_se), fmt(c.resid_nn),
                         fmt(c.resid_nn_se), c.se_defined ? "1" : "0"});
}

void write_true_theta(const GeneratedData& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  csv::write_row(out, {"person", "theta"});
  for (std::size_t i = 0; i < data.true_theta.size(); ++i)
    csv::write_row(out, {data.responses.person_id(i), csv::format_double(data.true_theta[i])});
}

}  // namespace mmcirt
