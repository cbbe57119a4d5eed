#include "mmcirt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "mmcirt/csv.hpp"
#include "mmcirt/error.hpp"
#include "mmcirt/stats.hpp"

namespace mmcirt {

namespace {

void check_sizes(const ResponseMatrix& rm, std::span<const double> theta) {
  if (theta.size() != rm.n_persons()) throw std::invalid_argument("theta count does not match persons");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::vector<double> person_loglik(const IrtModel& model, const ResponseMatrix& rm, std::span<const double> theta) {
  model.check_compatible(rm);
  check_sizes(rm, theta);
  std::vector<double> out(rm.n_persons());
  for (std::size_t i = 0; i < rm.n_persons(); ++i) out[i] = model.log_likelihood(theta[i], rm.row(i));
  return out;
}

double holdout_loglik(const FittedModel& fitted, const ResponseMatrix& test, ScoreMethod method, unsigned threads) {
  if (test.n_persons() == 0) fail_data("EMPTY_DATA", "evaluation set is empty");
  const auto est = score(fitted, test, method, threads);
  return mean(person_loglik(fitted.model(), test, est.theta));
}

std::vector<double> per_response_residuals(const IrtModel& model, const ResponseMatrix& rm,
                                           std::span<const double> theta) {
  model.check_compatible(rm);
  check_sizes(rm, theta);
  const std::size_t J = rm.n_items();
  std::vector<double> out(rm.n_persons() * J);
  std::vector<double> p;
  for (std::size_t i = 0; i < rm.n_persons(); ++i)
    for (std::size_t j = 0; j < J; ++j) {
      p = model.probs(j, theta[i]);
      out[i * J + j] = 1.0 - p[static_cast<std::size_t>(rm.code(i, j))];
    }
  return out;
}

std::vector<std::vector<std::size_t>> theta_groups(std::span<const double> theta, std::size_t groups) {
  if (groups == 0) fail_config("group count must be at least 1");
  if (theta.size() < groups)
    fail_data("TOO_FEW_PERSONS", std::to_string(theta.size()) + " persons cannot fill " + std::to_string(groups) +
                                     " groups");
  std::vector<std::size_t> order(theta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return theta[a] < theta[b]; });
  std::vector<std::vector<std::size_t>> out(groups);
  const std::size_t base = theta.size() / groups;
  const std::size_t extra = theta.size() % groups;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t n = base + (g < extra ? 1 : 0);
    out[g].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  return out;
}

GroupedResiduals grouped_residuals(const IrtModel& model, const ResponseMatrix& rm, std::span<const double> theta,
                                   std::size_t groups) {
  model.check_compatible(rm);
  check_sizes(rm, theta);
  const auto members = theta_groups(theta, groups);
  GroupedResiduals out;
  std::vector<double> p;
  for (std::size_t g = 0; g < groups; ++g) {
    const double n = static_cast<double>(members[g].size());
    out.group_sizes.push_back(members[g].size());
    for (std::size_t j = 0; j < rm.n_items(); ++j) {
      const auto m_count = static_cast<std::size_t>(model.categories(j));
      std::vector<double> observed(m_count, 0.0);
      std::vector<double> expected(m_count, 0.0);
      for (auto i : members[g]) {
        observed[static_cast<std::size_t>(rm.code(i, j))] += 1.0;
        p = model.probs(j, theta[i]);
        for (std::size_t m = 0; m < m_count; ++m) expected[m] += p[m];
      }
      for (std::size_t m = 0; m < m_count; ++m) {
        GroupCell c{g, j, static_cast<int>(m), observed[m] / n, expected[m] / n, 0.0, 0.0};
        c.residual = c.observed - c.expected;
        const double pc = std::clamp(c.expected, 1e-6, 1.0 - 1e-6);
        c.standardized = c.residual / std::sqrt(pc * (1.0 - pc) / n);
        out.cells.push_back(c);
      }
    }
  }
  return out;
}

FitReport evaluate(const FittedModel& fitted, const ResponseMatrix& test, ScoreMethod method, std::size_t groups,
                   unsigned threads) {
  fitted.model().check_compatible(test);
  if (test.n_persons() == 0) fail_data("EMPTY_DATA", "evaluation set is empty");
  return evaluate(fitted.model(), test, score(fitted, test, method, threads), groups);
}

FitReport evaluate(const IrtModel& model, const ResponseMatrix& test, const ThetaEstimates& est, std::size_t groups) {
  model.check_compatible(test);
  check_sizes(test, est.theta);
  if (test.n_persons() == 0) fail_data("EMPTY_DATA", "evaluation set is empty");
  const ScoreMethod method = est.method;
  const std::size_t N = test.n_persons();
  const std::size_t J = test.n_items();

  FitReport r;
  r.method = method;
  r.persons = N;
  r.item_loglik.assign(J, 0.0);
  r.item_mean_residual.assign(J, 0.0);
  std::vector<double> p;
  double total = 0.0;
  double resid = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < J; ++j) {
      p = model.probs(j, est.theta[i]);
      const double po = p[static_cast<std::size_t>(test.code(i, j))];
      const double l = std::log(std::max(po, kProbabilityFloor));
      r.item_loglik[j] += l;
      r.item_mean_residual[j] += 1.0 - po;
      total += l;
      resid += 1.0 - po;
    }
  for (std::size_t j = 0; j < J; ++j) {
    r.item_loglik[j] /= static_cast<double>(N);
    r.item_mean_residual[j] /= static_cast<double>(N);
  }
  r.mean_loglik = total / static_cast<double>(N);
  r.mean_residual = resid / static_cast<double>(N * J);
  r.grouped = grouped_residuals(model, test, est.theta, groups);
  return r;
}

nlohmann::json report_to_json(const FitReport& report, const IrtModel& model) {
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t j = 0; j < report.item_loglik.size(); ++j)
    items.push_back({{"item", model.items()[j].id},
                     {"mean_loglik", report.item_loglik[j]},
                     {"mean_residual", report.item_mean_residual[j]}});
  return {{"method", std::string(to_string(report.method))},
          {"persons", report.persons},
          {"mean_loglik", report.mean_loglik},
          {"mean_residual", report.mean_residual},
          {"group_sizes", report.grouped.group_sizes},
          {"items", std::move(items)}};
}

void write_grouped_residuals(const GroupedResiduals& g, const IrtModel& model, const std::filesystem::path& path) {
  auto out = open_out(path);
  csv::write_row(out, {"group", "item", "option", "n", "P", "p", "R", "SR"});
  for (const auto& c : g.cells)
    csv::write_row(out, {std::to_string(c.group), model.items()[c.item].id, std::to_string(c.category),
                         std::to_string(g.group_sizes[c.group]), csv::format_double(c.observed),
                         csv::format_double(c.expected), csv::format_double(c.residual),
                         csv::format_double(c.standardized)});
}

void write_response_residuals(const ResponseMatrix& rm, std::span<const double> residuals,
                              const std::filesystem::path& path) {
  if (residuals.size() != rm.n_persons() * rm.n_items()) throw std::invalid_argument("residual count mismatch");
  auto out = open_out(path);
  csv::write_row(out, {"person", "item", "residual"});
  for (std::size_t i = 0; i < rm.n_persons(); ++i)
    for (std::size_t j = 0; j < rm.n_items(); ++j)
      csv::write_row(out, {rm.person_id(i), rm.item(j).id, csv::format_double(residuals[i * rm.n_items() + j])});
}

std::vector<CvPoint> default_cv_grid(Variant variant) {
  std::vector<CvPoint> grid;
  const std::vector<std::size_t> layers = variant == Variant::mmc ? std::vector<std::size_t>{1, 3, 5, 7}
                                                                  : std::vector<std::size_t>{1};
  for (std::size_t batch : {32, 64, 128, 256})
    for (double lr : {0.02, 0.04, 0.08, 0.12})
      for (auto l : layers) grid.push_back({lr, batch, l});
  return grid;
}

std::vector<CvResult> cross_validate(Variant variant, const ResponseMatrix& train, std::span<const CvPoint> grid,
                                     const Hyperparams& base, std::size_t folds, std::uint64_t seed,
                                     unsigned threads) {
  if (grid.empty()) fail_config("cross-validation grid is empty");
  if (folds < 2) fail_config("cross-validation needs at least two folds");
  if (train.n_persons() < folds) fail_data("TOO_FEW_PERSONS", "fewer persons than folds");
  SplitSpec spec;
  spec.seed = seed;
  spec.fold_count = folds;
  const auto parts = mmcirt::folds(train, spec);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<CvResult> results(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    results[g].point = grid[g];
    results[g].fold_ml.assign(folds, nan);
    results[g].fold_nn.assign(folds, nan);
  }
  std::vector<std::string> errors(grid.size() * folds);
  parallel_for(grid.size() * folds, threads, [&](std::size_t task) {
    const std::size_t g = task / folds;
    const std::size_t f = task % folds;
    Hyperparams hp = base;
    hp.learning_rate = grid[g].learning_rate;
    hp.batch_size = grid[g].batch_size;
    hp.hidden_layers = grid[g].hidden_layers;
    hp.seed = derive_seed(seed, {g, f});
    try {
      const auto fitted = fit(variant, parts[f].first, hp);
      results[g].fold_ml[f] = holdout_loglik(fitted, parts[f].second, ScoreMethod::ml);
      results[g].fold_nn[f] = holdout_loglik(fitted, parts[f].second, ScoreMethod::nn);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numeric) throw;
      errors[task] = e.what();
    }
  });

  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto& r = results[g];
    double sum_ml = 0.0;
    double sum_nn = 0.0;
    std::size_t ok = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      if (std::isnan(r.fold_ml[f])) {
        ++r.failures;
        r.last_error = errors[g * folds + f];
        continue;
      }
      sum_ml += r.fold_ml[f];
      sum_nn += r.fold_nn[f];
      ++ok;
    }
    r.mean_ml = ok ? sum_ml / static_cast<double>(ok) : -std::numeric_limits<double>::infinity();
    r.mean_nn = ok ? sum_nn / static_cast<double>(ok) : -std::numeric_limits<double>::infinity();
  }
  std::stable_sort(results.begin(), results.end(), [](const CvResult& a, const CvResult& b) {
    return a.mean_ml > b.mean_ml;
  });
  return results;
}

void write_cv_results(std::span<const CvResult> results, const std::filesystem::path& path) {
  auto out = open_out(path);
  std::vector<std::string> cells{"rank", "learning_rate", "batch_size", "layers", "mean_loglik_ml", "mean_loglik_nn",
                                 "failures"};
  const std::size_t folds = results.empty() ? 0 : results.front().fold_ml.size();
  for (std::size_t f = 0; f < folds; ++f) cells.push_back("fold" + std::to_string(f) + "_ml");
  csv::write_row(out, cells);
  const auto fmt = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string(); };
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    cells = {std::to_string(k + 1),
             csv::format_double(r.point.learning_rate),
             std::to_string(r.point.batch_size),
             std::to_string(r.point.hidden_layers),
             fmt(r.mean_ml),
             fmt(r.mean_nn),
             std::to_string(r.failures)};
    for (double v : r.fold_ml) cells.push_back(fmt(v));
    csv::write_row(out, cells);
  }
}

}  // namespace mmcirt
