#include "mmcirt/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mmcirt/csv.hpp"
#include "mmcirt/error.hpp"
#include "mmcirt/stats.hpp"

namespace mmcirt {

std::string_view to_string(ScoreMethod m) { return m == ScoreMethod::nn ? "nn" : "ml"; }

ScoreMethod parse_score_method(std::string_view name) {
  if (name == "nn") return ScoreMethod::nn;
  if (name == "ml") return ScoreMethod::ml;
  fail_config("unknown scoring method '" + std::string(name) + "' (expected nn or ml)");
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count < 2) throw std::invalid_argument("linspace needs at least two points");
  std::vector<double> out(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

LogProbTable::LogProbTable(const IrtModel& model, std::vector<double> grid)
    : grid_(std::move(grid)), width_(model.total_categories()) {
  offsets_.resize(model.n_items());
  for (std::size_t j = 0; j < model.n_items(); ++j) offsets_[j] = model.category_offset(j);
  values_.resize(grid_.size() * width_);
  std::vector<double> p;
  for (std::size_t g = 0; g < grid_.size(); ++g) {
    for (std::size_t j = 0; j < model.n_items(); ++j) {
      p = model.probs(j, grid_[g]);
      for (std::size_t m = 0; m < p.size(); ++m)
        values_[g * width_ + offsets_[j] + m] = std::log(std::max(p[m], kProbabilityFloor));
    }
  }
}

double LogProbTable::sum(std::size_t g, std::span<const int> codes) const {
  const double* row = values_.data() + g * width_;
  double s = 0.0;
  for (std::size_t j = 0; j < codes.size(); ++j) s += row[offsets_[j] + static_cast<std::size_t>(codes[j])];
  return s;
}

namespace {

struct Candidate {
  double theta;
  double value;
};

// Maximizes f on [a, b]; returns the best point evaluated.
template <class F>
Candidate golden_max(F&& f, double a, double b, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? Candidate{c, fc} : Candidate{d, fd};
}

bool better(const Candidate& x, const Candidate& best) {
  return x.value > best.value || (x.value == best.value && x.theta < best.theta);
}

double ml_from_table(const IrtModel& model, const LogProbTable& table, std::span<const int> codes,
                     const MlOptions& opts, std::vector<double>& scan) {
  const auto& grid = table.grid();
  const std::size_t n = grid.size();
  scan.resize(n);
  for (std::size_t g = 0; g < n; ++g) scan[g] = table.sum(g, codes);

  std::vector<std::size_t> peaks;
  for (std::size_t g = 0; g < n; ++g) {
    const bool left_ok = g == 0 || scan[g] > scan[g - 1];
    const bool right_ok = g + 1 == n || scan[g] >= scan[g + 1];
    if (left_ok && right_ok) peaks.push_back(g);
  }
  if (peaks.empty()) peaks.push_back(0);  // constant likelihood
  std::stable_sort(peaks.begin(), peaks.end(), [&](auto x, auto y) { return scan[x] > scan[y]; });
  if (peaks.size() > opts.candidates) peaks.resize(std::max<std::size_t>(opts.candidates, 1));

  const auto f = [&](double t) { return model.log_likelihood(t, codes); };
  Candidate best{grid[peaks.front()], scan[peaks.front()]};
  for (auto g : peaks) {
    const Candidate at_grid{grid[g], scan[g]};
    if (better(at_grid, best)) best = at_grid;
    const double lo = grid[g == 0 ? 0 : g - 1];
    const double hi = grid[g + 1 == n ? g : g + 1];
    const Candidate refined = golden_max(f, lo, hi, opts.tolerance);
    if (better(refined, best)) best = refined;
  }
  return best.theta;
}

}  // namespace

double ml_theta(const IrtModel& model, std::span<const int> codes, const MlOptions& opts) {
  const auto b = model.bounds();
  LogProbTable table(model, linspace(b.lo, b.hi, opts.grid_points));
  std::vector<double> scan;
  return ml_from_table(model, table, codes, opts, scan);
}

ThetaEstimates score_ml(const IrtModel& model, const ResponseMatrix& rm, const MlOptions& opts) {
  model.check_compatible(rm);
  if (opts.grid_points < 2) fail_config("ML grid needs at least two points");
  const auto b = model.bounds();
  const LogProbTable table(model, linspace(b.lo, b.hi, opts.grid_points));
  ThetaEstimates out{ScoreMethod::ml, std::vector<double>(rm.n_persons())};
  constexpr std::size_t chunk = 64;
  const std::size_t chunks = (rm.n_persons() + chunk - 1) / chunk;
  parallel_for(chunks, opts.threads, [&](std::size_t c) {
    std::vector<double> scan;
    const std::size_t end = std::min(rm.n_persons(), (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) out.theta[i] = ml_from_table(model, table, rm.row(i), opts, scan);
  });
  return out;
}

ThetaEstimates score_ml(const FittedModel& fitted, const ResponseMatrix& rm, const MlOptions& opts) {
  return score_ml(fitted.model(), rm, opts);
}

ThetaEstimates score_nn(const FittedModel& fitted, const ResponseMatrix& rm) {
  fitted.model().check_compatible(rm);
  const Eigen::VectorXd raw = fitted.encoder().forward(one_hot(rm));
  const auto b = fitted.model().bounds();
  ThetaEstimates out{ScoreMethod::nn, std::vector<double>(rm.n_persons())};
  for (std::size_t i = 0; i < rm.n_persons(); ++i) {
    const double t = raw(static_cast<Eigen::Index>(i));
    if (!std::isfinite(t)) fail_numeric("encoder produced a non-finite score for person " + rm.person_id(i));
    out.theta[i] = std::clamp(t, b.lo, b.hi);
  }
  return out;
}

ThetaEstimates score(const FittedModel& fitted, const ResponseMatrix& rm, ScoreMethod method, unsigned threads) {
  if (method == ScoreMethod::nn) return score_nn(fitted, rm);
  MlOptions opts;
  opts.threads = threads;
  return score_ml(fitted, rm, opts);
}

void write_scores(const ResponseMatrix& rm, std::span<const ThetaEstimates> estimates,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  std::vector<std::string> cells{"person"};
  for (const auto& e : estimates) {
    if (e.theta.size() != rm.n_persons()) throw std::invalid_argument("write_scores: size mismatch");
    cells.push_back("theta_" + std::string(to_string(e.method)));
  }
  csv::write_row(out, cells);
  for (std::size_t i = 0; i < rm.n_persons(); ++i) {
    cells.assign(1, rm.person_id(i));
    for (const auto& e : estimates) cells.push_back(csv::format_double(e.theta[i]));
    csv::write_row(out, cells);
  }
}

}  // namespace mmcirt
