#include "mmcirt/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "mmcirt/error.hpp"

namespace mmcirt {

using Eigen::Index;
using Eigen::MatrixXd;

const ParamStore::Slot& ParamStore::add(std::string name, Index rows, Index cols) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter slot '" + name + "'");
  Slot s{std::move(name), size(), rows, cols};
  const Index old = values_.size();
  values_.conservativeResize(old + rows * cols);
  values_.segment(old, rows * cols).setZero();
  slots_.push_back(std::move(s));
  return slots_.back();
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(slots_.begin(), slots_.end(), [&](const Slot& s) { return s.name == name; });
}

const ParamStore::Slot& ParamStore::slot(std::string_view name) const {
  for (const auto& s : slots_)
    if (s.name == name) return s;
  throw std::out_of_range("no parameter slot '" + std::string(name) + "'");
}

Eigen::Map<RowMatrix> ParamStore::view(std::string_view name) {
  const auto& s = slot(name);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const RowMatrix> ParamStore::view(std::string_view name) const {
  const auto& s = slot(name);
  return {values_.data() + s.offset, s.rows, s.cols};
}

DecoderLayout::DecoderLayout(Variant v, std::vector<int> cats, std::vector<int> corr, std::size_t d)
    : variant(v), categories(std::move(cats)), correct(std::move(corr)), depth(d) {
  offsets.assign(categories.size() + 1, 0);
  for (std::size_t j = 0; j < categories.size(); ++j)
    offsets[j + 1] = offsets[j] + static_cast<std::size_t>(categories[j]);
}

Tape::NodeId Tape::push(MatrixXd value, std::function<void(Tape&, NodeId)> backward) {
  nodes_.push_back(Node{std::move(value), MatrixXd(), std::move(backward), -1, false});
  return nodes_.size() - 1;
}

MatrixXd& Tape::adjoint(NodeId id) {
  auto& n = nodes_[id];
  if (n.adjoint.size() == 0) n.adjoint = MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

Tape::NodeId Tape::constant(MatrixXd value) {
  const NodeId id = push(std::move(value));
  nodes_[id].constant = true;
  return id;
}

Tape::NodeId Tape::parameter(const ParamStore& params, std::string_view name) {
  const auto& s = params.slot(name);
  const NodeId id = push(MatrixXd(params.view(name)));
  nodes_[id].param_offset = static_cast<std::ptrdiff_t>(s.offset);
  return id;
}

Tape::NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  MatrixXd y = value(x) * value(w).transpose();
  y.rowwise() += value(b).row(0);
  return push(std::move(y), [x, w, b](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    if (!t.nodes_[x].constant) t.adjoint(x).noalias() += g * t.value(w);
    t.adjoint(w).noalias() += g.transpose() * t.value(x);
    t.adjoint(b).row(0) += g.colwise().sum();
  });
}

Tape::NodeId Tape::elu(NodeId x) {
  MatrixXd y = value(x).unaryExpr([](double v) { return act::elu(v); });
  return push(std::move(y), [x](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    t.adjoint(x).array() += g.array() * t.value(x).unaryExpr([](double v) { return act::elu_derivative(v); }).array();
  });
}

Tape::NodeId Tape::softplus(NodeId x) {
  MatrixXd y = value(x).unaryExpr([](double v) { return act::softplus(v); });
  return push(std::move(y), [x](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    t.adjoint(x).array() += g.array() * t.value(x).unaryExpr([](double v) { return act::sigmoid(v); }).array();
  });
}

Tape::NodeId Tape::monotone_input(NodeId theta, NodeId weights, NodeId bias) {
  const MatrixXd& th = value(theta);
  const MatrixXd& w = value(weights);
  const MatrixXd& bi = value(bias);
  const Index batch = th.rows();
  const Index k_count = w.rows();
  MatrixXd pre(batch, 3 * k_count);
  for (Index b = 0; b < batch; ++b)
    for (Index k = 0; k < k_count; ++k)
      for (Index r = 0; r < 3; ++r) pre(b, 3 * k + r) = th(b, 0) * w(k, r) + bi(k, r);
  return push(std::move(pre), [theta, weights, bias](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    const MatrixXd& th = t.value(theta);
    const MatrixXd& w = t.value(weights);
    MatrixXd& gth = t.adjoint(theta);
    MatrixXd& gw = t.adjoint(weights);
    MatrixXd& gb = t.adjoint(bias);
    for (Index b = 0; b < g.rows(); ++b)
      for (Index k = 0; k < w.rows(); ++k)
        for (Index r = 0; r < 3; ++r) {
          const double gv = g(b, 3 * k + r);
          gth(b, 0) += gv * w(k, r);
          gw(k, r) += gv * th(b, 0);
          gb(k, r) += gv;
        }
  });
}

Tape::NodeId Tape::monotone_hidden(NodeId h, NodeId weights, NodeId bias) {
  const MatrixXd& hv = value(h);
  const MatrixXd& w = value(weights);
  const MatrixXd& bi = value(bias);
  const Index batch = hv.rows();
  const Index k_count = w.rows();
  MatrixXd pre(batch, 3 * k_count);
  for (Index b = 0; b < batch; ++b)
    for (Index k = 0; k < k_count; ++k)
      for (Index r = 0; r < 3; ++r) {
        double s = bi(k, r);
        for (Index c = 0; c < 3; ++c) s += w(k, 3 * r + c) * hv(b, 3 * k + c);
        pre(b, 3 * k + r) = s;
      }
  return push(std::move(pre), [h, weights, bias](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    const MatrixXd& hv = t.value(h);
    const MatrixXd& w = t.value(weights);
    MatrixXd& gh = t.adjoint(h);
    MatrixXd& gw = t.adjoint(weights);
    MatrixXd& gb = t.adjoint(bias);
    for (Index b = 0; b < g.rows(); ++b)
      for (Index k = 0; k < w.rows(); ++k)
        for (Index r = 0; r < 3; ++r) {
          const double gv = g(b, 3 * k + r);
          gb(k, r) += gv;
          for (Index c = 0; c < 3; ++c) {
            gh(b, 3 * k + c) += gv * w(k, 3 * r + c);
            gw(k, 3 * r + c) += gv * hv(b, 3 * k + c);
          }
        }
  });
}

Tape::NodeId Tape::combined_activation(NodeId pre) {
  const MatrixXd& p = value(pre);
  MatrixXd y(p.rows(), p.cols());
  for (Index c = 0; c < p.cols(); ++c) {
    const int slot = static_cast<int>(c % 3);
    for (Index b = 0; b < p.rows(); ++b) y(b, c) = act::combined(slot, p(b, c));
  }
  return push(std::move(y), [pre](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    const MatrixXd& p = t.value(pre);
    MatrixXd& gp = t.adjoint(pre);
    for (Index c = 0; c < p.cols(); ++c) {
      const int slot = static_cast<int>(c % 3);
      for (Index b = 0; b < p.rows(); ++b) gp(b, c) += g(b, c) * act::combined_derivative(slot, p(b, c));
    }
  });
}

Tape::NodeId Tape::sum_triples(NodeId h) {
  const MatrixXd& hv = value(h);
  const Index k_count = hv.cols() / 3;
  MatrixXd y(hv.rows(), k_count);
  for (Index b = 0; b < hv.rows(); ++b)
    for (Index k = 0; k < k_count; ++k) y(b, k) = hv(b, 3 * k) + hv(b, 3 * k + 1) + hv(b, 3 * k + 2);
  return push(std::move(y), [h](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    MatrixXd& gh = t.adjoint(h);
    for (Index b = 0; b < g.rows(); ++b)
      for (Index k = 0; k < g.cols(); ++k)
        for (Index r = 0; r < 3; ++r) gh(b, 3 * k + r) += g(b, k);
  });
}

Tape::NodeId Tape::nr_logits(NodeId theta, NodeId slope, NodeId intercept) {
  MatrixXd z = value(theta) * value(slope);
  z.rowwise() += value(intercept).row(0);
  return push(std::move(z), [theta, slope, intercept](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    t.adjoint(theta).noalias() += g * t.value(slope).transpose();
    t.adjoint(slope).noalias() += t.value(theta).transpose() * g;
    t.adjoint(intercept).row(0) += g.colwise().sum();
  });
}

Tape::NodeId Tape::mmc_logits(NodeId delta, NodeId tau, NodeId intercept, const DecoderLayout& layout) {
  const MatrixXd& d = value(delta);
  const MatrixXd& tv = value(tau);
  const MatrixXd& bv = value(intercept);
  MatrixXd z(d.rows(), d.cols());
  for (Index b = 0; b < d.rows(); ++b) {
    for (std::size_t j = 0; j < layout.n_items(); ++j) {
      const auto off = static_cast<Index>(layout.offsets[j]);
      const Index m_count = layout.categories[j];
      const double s = d.row(b).segment(off, m_count).sum();
      for (Index m = 0; m < m_count; ++m) {
        const double dm = m == layout.correct[j] ? s : d(b, off + m);
        z(b, off + m) = tv(0, static_cast<Index>(j)) * dm + bv(0, off + m);
      }
    }
  }
  return push(std::move(z), [delta, tau, intercept, layout](Tape& t, NodeId self) {
    const MatrixXd& g = t.nodes_[self].adjoint;
    const MatrixXd& d = t.value(delta);
    const MatrixXd& tv = t.value(tau);
    MatrixXd& gd = t.adjoint(delta);
    MatrixXd& gt = t.adjoint(tau);
    t.adjoint(intercept).row(0) += g.colwise().sum();
    for (Index b = 0; b < g.rows(); ++b) {
      for (std::size_t j = 0; j < layout.n_items(); ++j) {
        const auto off = static_cast<Index>(layout.offsets[j]);
        const Index m_count = layout.categories[j];
        const Index c = layout.correct[j];
        const double tau_j = tv(0, static_cast<Index>(j));
        const double gc = g(b, off + c);
        const double s = d.row(b).segment(off, m_count).sum();
        double gtau = gc * s;
        for (Index m = 0; m < m_count; ++m) {
          const double own = m == c ? 0.0 : g(b, off + m);
          gtau += own * d(b, off + m);
          gd(b, off + m) += tau_j * (own + gc);
        }
        gt(0, static_cast<Index>(j)) += gtau;
      }
    }
  });
}

Tape::NodeId Tape::categorical_nll(NodeId logits, const DecoderLayout& layout, std::span<const int> codes) {
  const MatrixXd& z = value(logits);
  const Index batch = z.rows();
  const auto j_count = layout.n_items();
  // Gradient w.r.t. the logits is known after the forward pass; keep it.
  MatrixXd dz = MatrixXd::Zero(z.rows(), z.cols());
  double loss = 0.0;
  std::vector<double> p;
  for (Index b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < j_count; ++j) {
      const auto off = static_cast<Index>(layout.offsets[j]);
      const auto m_count = static_cast<std::size_t>(layout.categories[j]);
      p.assign(m_count, 0.0);
      for (std::size_t m = 0; m < m_count; ++m) p[m] = z(b, off + static_cast<Index>(m));
      softmax_inplace(p);
      const auto obs = static_cast<std::size_t>(codes[static_cast<std::size_t>(b) * j_count + j]);
      const double po = p[obs];
      if (po >= kProbabilityFloor) {
        loss -= std::log(po);
        for (std::size_t m = 0; m < m_count; ++m) dz(b, off + static_cast<Index>(m)) = p[m] - (m == obs ? 1.0 : 0.0);
      } else {
        loss -= std::log(kProbabilityFloor);
      }
    }
  }
  MatrixXd out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), [logits, dz = std::move(dz)](Tape& t, NodeId self) {
    t.adjoint(logits) += t.nodes_[self].adjoint(0, 0) * dz;
  });
}

Eigen::VectorXd Tape::gradient(NodeId loss, std::size_t n_params) {
  for (auto& n : nodes_) n.adjoint.resize(0, 0);
  adjoint(loss)(0, 0) = 1.0;
  for (NodeId id = loss + 1; id-- > 0;) {
    if (nodes_[id].adjoint.size() == 0) continue;
    if (nodes_[id].backward) nodes_[id].backward(*this, id);
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Index>(n_params));
  for (const auto& n : nodes_) {
    if (n.param_offset < 0 || n.adjoint.size() == 0) continue;
    const Index cols = n.adjoint.cols();
    for (Index r = 0; r < n.adjoint.rows(); ++r)
      for (Index c = 0; c < cols; ++c) grad(n.param_offset + r * cols + c) += n.adjoint(r, c);
  }
  return grad;
}

NllGraph forward_nll(const ParamStore& params, const DecoderLayout& layout, const OneHotBatch& batch,
                     std::span<const int> codes) {
  if (codes.size() != static_cast<std::size_t>(batch.values.rows()) * layout.n_items())
    throw std::invalid_argument("forward_nll: codes do not match batch rows");
  NllGraph g;
  Tape& t = g.tape;
  const auto x = t.constant(batch.values);
  const auto hidden = t.elu(t.affine(x, t.parameter(params, "encoder.w1"), t.parameter(params, "encoder.b1")));
  g.theta = t.affine(hidden, t.parameter(params, "encoder.w2"), t.parameter(params, "encoder.b2"));

  Tape::NodeId logits = 0;
  if (layout.variant == Variant::nr) {
    logits = t.nr_logits(g.theta, t.parameter(params, "nr.slope"), t.parameter(params, "nr.intercept"));
  } else {
    auto h = t.combined_activation(t.monotone_input(g.theta, t.softplus(t.parameter(params, "mmc.w0")),
                                                    t.parameter(params, "mmc.b0")));
    for (std::size_t l = 1; l < layout.depth; ++l) {
      const auto suffix = std::to_string(l);
      h = t.combined_activation(t.monotone_hidden(h, t.softplus(t.parameter(params, "mmc.w" + suffix)),
                                                  t.parameter(params, "mmc.b" + suffix)));
    }
    logits = t.mmc_logits(t.sum_triples(h), t.parameter(params, "mmc.tau"), t.parameter(params, "mmc.intercept"),
                          layout);
  }
  if (!t.value(logits).allFinite()) fail_numeric("non-finite logits in forward pass");
  g.loss = t.categorical_nll(logits, layout, codes);
  if (!std::isfinite(g.loss_value())) fail_numeric("non-finite loss in forward pass");
  return g;
}

Eigen::VectorXd backward(NllGraph& graph, const ParamStore& params) {
  return graph.tape.gradient(graph.loss, params.size());
}

}  // namespace mmcirt
