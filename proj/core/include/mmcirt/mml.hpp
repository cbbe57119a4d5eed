#pragma once

#include <vector>

#include "mmcirt/data.hpp"
#include "mmcirt/models.hpp"
#include "mmcirt/scoring.hpp"
#include "mmcirt/training.hpp"

namespace mmcirt {

/// Equally spaced nodes with standard-normal weights normalized to sum 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  static QuadratureRule normal(std::size_t count = 61, double lo = -5.0, double hi = 5.0);
};

struct MmlOptions {
  QuadratureRule quadrature = QuadratureRule::normal();
  std::size_t max_iter = 500;
  double tolerance = 1e-4;        // max absolute parameter change between EM cycles
  std::size_t newton_steps = 25;  // per item per M-step
  unsigned threads = 1;
};

struct MmlTrace {
  std::vector<double> marginal_loglik;  // at the parameters entering each E-step
  std::size_t iterations = 0;
  bool converged = false;
};

struct MmlResult {
  FittedModel fitted;  // NR decoder, fitter "mml", no encoder
  MmlTrace trace;
};

/// Bock-Aitkin EM for the nominal response model with the first category of
/// each item as reference (slope and intercept fixed at 0).
MmlResult mml_fit_nr(const ResponseMatrix& train, const MmlOptions& opts = {});

/// log sum_q w_q prod_j p_j(x_ij | node_q), summed over persons.
double marginal_loglik(const IrtModel& model, const ResponseMatrix& rm, const QuadratureRule& quad);

/// ML scores for an encoder-less model.
ThetaEstimates mml_score(const IrtModel& model, const ResponseMatrix& rm, unsigned threads = 1);

}  // namespace mmcirt
