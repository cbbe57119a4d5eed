#include "mmcirt/mml.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mmcirt/error.hpp"
#include "mmcirt/stats.hpp"

namespace mmcirt {

QuadratureRule QuadratureRule::normal(std::size_t count, double lo, double hi) {
  if (count < 2 || !(hi > lo)) fail_config("quadrature needs at least two nodes on a non-empty interval");
  QuadratureRule q;
  q.nodes = linspace(lo, hi, count);
  double total = 0.0;
  for (double x : q.nodes) {
    q.weights.push_back(std::exp(-0.5 * x * x));
    total += q.weights.back();
  }
  for (double& w : q.weights) w /= total;
  return q;
}

namespace {

struct ItemState {
  int categories = 0;
  std::vector<double> a;  // a[0] = b[0] = 0
  std::vector<double> b;
};

// Category log-probabilities at every node: out[q * M + m].
void item_log_probs(const ItemState& s, const std::vector<double>& nodes, std::vector<double>& out) {
  const auto M = static_cast<std::size_t>(s.categories);
  out.resize(nodes.size() * M);
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < M; ++m) {
      out[q * M + m] = s.a[m] * nodes[q] + s.b[m];
      mx = std::max(mx, out[q * M + m]);
    }
    double z = 0.0;
    for (std::size_t m = 0; m < M; ++m) z += std::exp(out[q * M + m] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t m = 0; m < M; ++m) out[q * M + m] -= lz;
  }
}

// Expected complete-data log-likelihood of one item given counts r[q * M + m].
double item_objective(const ItemState& s, const std::vector<double>& nodes, const std::vector<double>& r,
                      std::vector<double>& scratch) {
  item_log_probs(s, nodes, scratch);
  double f = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k)
    if (r[k] > 0.0) f += r[k] * scratch[k];
  return f;
}

// Newton ascent on the free parameters (a_1..a_{M-1}, b_1..b_{M-1}).
void m_step(ItemState& s, const std::vector<double>& nodes, const std::vector<double>& r, std::size_t steps) {
  const auto M = static_cast<std::size_t>(s.categories);
  const std::size_t F = M - 1;
  const std::size_t Q = nodes.size();
  std::vector<double> lp;
  std::vector<double> n(Q, 0.0);
  for (std::size_t q = 0; q < Q; ++q)
    for (std::size_t m = 0; m < M; ++m) n[q] += r[q * M + m];

  double f = item_objective(s, nodes, r, lp);
  for (std::size_t it = 0; it < steps; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * F));
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * F), static_cast<Eigen::Index>(2 * F));
    for (std::size_t q = 0; q < Q; ++q) {
      const double t = nodes[q];
      for (std::size_t m = 1; m < M; ++m) {
        const double pm = std::exp(lp[q * M + m]);
        const double g = r[q * M + m] - n[q] * pm;
        const auto im = static_cast<Eigen::Index>(m - 1);
        grad(im) += t * g;
        grad(im + static_cast<Eigen::Index>(F)) += g;
        for (std::size_t k = 1; k < M; ++k) {
          const double pk = std::exp(lp[q * M + k]);
          const double c = n[q] * ((m == k ? pm : 0.0) - pm * pk);
          const auto ik = static_cast<Eigen::Index>(k - 1);
          const auto Fi = static_cast<Eigen::Index>(F);
          info(im, ik) += t * t * c;
          info(im, ik + Fi) += t * c;
          info(im + Fi, ik) += t * c;
          info(im + Fi, ik + Fi) += c;
        }
      }
    }
    if (grad.cwiseAbs().maxCoeff() < 1e-10) break;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 1e-12).all()) {
      step = ldlt.solve(grad);
      if (!step.allFinite()) step = grad;
    } else {
      step = grad;
    }
    // Bounded move per coordinate keeps unidentified directions from running away in one step.
    const double biggest = step.cwiseAbs().maxCoeff();
    if (biggest > 5.0) step *= 5.0 / biggest;

    ItemState trial = s;
    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      for (std::size_t m = 1; m < M; ++m) {
        trial.a[m] = s.a[m] + step(static_cast<Eigen::Index>(m - 1));
        trial.b[m] = s.b[m] + step(static_cast<Eigen::Index>(m - 1 + F));
      }
      std::vector<double> trial_lp;
      const double ft = item_objective(trial, nodes, r, trial_lp);
      if (ft >= f) {
        improved = ft > f;
        s = trial;
        f = ft;
        lp = std::move(trial_lp);
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
}

}  // namespace

MmlResult mml_fit_nr(const ResponseMatrix& train, const MmlOptions& opts) {
  if (train.n_persons() == 0) fail_data("EMPTY_DATA", "cannot fit a model to an empty response matrix");
  const auto& quad = opts.quadrature;
  if (quad.nodes.size() != quad.weights.size() || quad.nodes.size() < 2) fail_config("malformed quadrature rule");
  const std::size_t N = train.n_persons();
  const std::size_t J = train.n_items();
  const std::size_t Q = quad.nodes.size();

  std::vector<ItemState> items(J);
  for (std::size_t j = 0; j < J; ++j) {
    const int M = train.categories(j);
    const int c = train.correct_option(j);
    items[j].categories = M;
    items[j].a.assign(static_cast<std::size_t>(M), 0.0);
    items[j].b.assign(static_cast<std::size_t>(M), 0.0);
    // Start with the key option rising against every other one.
    for (int m = 1; m < M; ++m) items[j].a[static_cast<std::size_t>(m)] = (m == c ? 1.0 : 0.0) - (c == 0 ? 1.0 : 0.0);
  }

  std::vector<double> log_w(Q);
  for (std::size_t q = 0; q < Q; ++q) log_w[q] = std::log(quad.weights[q]);

  MmlTrace trace;
  std::vector<std::vector<double>> lp(J);
  std::vector<std::vector<double>> counts(J);
  const auto build_tables = [&]() {
    for (std::size_t j = 0; j < J; ++j) item_log_probs(items[j], quad.nodes, lp[j]);
  };

  // E-step: posterior over nodes per person, accumulated into expected counts.
  const auto e_step = [&]() {
    build_tables();
    for (std::size_t j = 0; j < J; ++j) counts[j].assign(Q * static_cast<std::size_t>(items[j].categories), 0.0);
    double total = 0.0;
    std::vector<double> post(Q);
    for (std::size_t i = 0; i < N; ++i) {
      const auto row = train.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < Q; ++q) {
        double s = log_w[q];
        for (std::size_t j = 0; j < J; ++j)
          s += lp[j][q * static_cast<std::size_t>(items[j].categories) + static_cast<std::size_t>(row[j])];
        post[q] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (double& v : post) {
        v = std::exp(v - mx);
        z += v;
      }
      total += mx + std::log(z);
      for (std::size_t q = 0; q < Q; ++q) {
        const double w = post[q] / z;
        if (w < 1e-300) continue;
        for (std::size_t j = 0; j < J; ++j)
          counts[j][q * static_cast<std::size_t>(items[j].categories) + static_cast<std::size_t>(row[j])] += w;
      }
    }
    return total;
  };

  for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
    const double ll = e_step();
    if (!std::isfinite(ll)) fail_numeric("MML marginal log-likelihood is not finite at iteration " + std::to_string(iter));
    trace.marginal_loglik.push_back(ll);
    std::vector<ItemState> before = items;
    parallel_for(J, opts.threads, [&](std::size_t j) { m_step(items[j], quad.nodes, counts[j], opts.newton_steps); });
    double change = 0.0;
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t m = 0; m < items[j].a.size(); ++m)
        change = std::max({change, std::abs(items[j].a[m] - before[j].a[m]), std::abs(items[j].b[m] - before[j].b[m])});
    trace.iterations = iter + 1;
    if (change < opts.tolerance) {
      trace.converged = true;
      break;
    }
  }
  trace.marginal_loglik.push_back(e_step());

  std::vector<NrItemParams> params(J);
  for (std::size_t j = 0; j < J; ++j) {
    params[j].slope = items[j].a;
    params[j].intercept = items[j].b;
  }
  IrtModel model(train.items(), train.missing_as_category(), std::move(params));
  return MmlResult{FittedModel(std::move(model), std::nullopt, "mml", {}, trace.iterations), std::move(trace)};
}

double marginal_loglik(const IrtModel& model, const ResponseMatrix& rm, const QuadratureRule& quad) {
  model.check_compatible(rm);
  const LogProbTable table(model, quad.nodes);
  double total = 0.0;
  std::vector<double> v(quad.nodes.size());
  for (std::size_t i = 0; i < rm.n_persons(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < v.size(); ++q) {
      v[q] = std::log(quad.weights[q]) + table.sum(q, rm.row(i));
      mx = std::max(mx, v[q]);
    }
    double z = 0.0;
    for (double x : v) z += std::exp(x - mx);
    total += mx + std::log(z);
  }
  return total;
}

ThetaEstimates mml_score(const IrtModel& model, const ResponseMatrix& rm, unsigned threads) {
  MlOptions opts;
  opts.threads = threads;
  return score_ml(model, rm, opts);
}

}  // namespace mmcirt
