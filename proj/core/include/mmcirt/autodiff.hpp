#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmcirt/data.hpp"
#include "mmcirt/models.hpp"

namespace mmcirt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Flat vector of every trainable scalar, with named row-major matrix slots.
/// Gradients share this exact layout.
class ParamStore {
 public:
  struct Slot {
    std::string name;
    std::size_t offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows * cols); }
  };

  /// Appends a zero-initialized slot. Names must be unique.
  const Slot& add(std::string name, Eigen::Index rows, Eigen::Index cols);

  bool contains(std::string_view name) const;
  const Slot& slot(std::string_view name) const;
  const std::vector<Slot>& slots() const noexcept { return slots_; }

  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  Eigen::VectorXd& values() noexcept { return values_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }

  Eigen::Map<RowMatrix> view(std::string_view name);
  Eigen::Map<const RowMatrix> view(std::string_view name) const;

 private:
  std::vector<Slot> slots_;
  Eigen::VectorXd values_;
};

/// Item structure of the decoder, as seen by the loss graph.
struct DecoderLayout {
  Variant variant = Variant::nr;
  std::vector<int> categories;
  std::vector<int> correct;
  std::size_t depth = 1;  // monotone layers per subnet (MMC only)
  std::vector<std::size_t> offsets;

  DecoderLayout() = default;
  DecoderLayout(Variant v, std::vector<int> categories, std::vector<int> correct, std::size_t depth);

  std::size_t n_items() const noexcept { return categories.size(); }
  std::size_t total_categories() const noexcept { return offsets.back(); }
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order, so creation order is a topological order and `gradient` walks it
/// backwards once.
class Tape {
 public:
  using NodeId = std::size_t;

  NodeId constant(Eigen::MatrixXd value);
  NodeId parameter(const ParamStore& params, std::string_view name);

  /// x (B x in) times w^T (in x out) plus the 1 x out row b.
  NodeId affine(NodeId x, NodeId w, NodeId b);
  NodeId elu(NodeId x);
  NodeId softplus(NodeId x);
  /// theta (B x 1), weights and bias (K x 3) -> pre-activations (B x 3K).
  NodeId monotone_input(NodeId theta, NodeId weights, NodeId bias);
  /// h (B x 3K), per-subnet 3x3 weights (K x 9, row r col c at 3r+c), bias (K x 3) -> B x 3K.
  NodeId monotone_hidden(NodeId h, NodeId weights, NodeId bias);
  /// Column 3k+0 convex, 3k+1 concave, 3k+2 saturated.
  NodeId combined_activation(NodeId pre);
  /// B x 3K -> B x K, summing each neuron triple.
  NodeId sum_triples(NodeId h);
  /// theta (B x 1), slope and intercept (1 x K) -> logits (B x K).
  NodeId nr_logits(NodeId theta, NodeId slope, NodeId intercept);
  /// delta (B x K), tau (1 x J), intercept (1 x K) -> logits (B x K).
  NodeId mmc_logits(NodeId delta, NodeId tau, NodeId intercept, const DecoderLayout& layout);
  /// Sum over rows and items of -log max(softmax block prob of observed code, floor).
  /// `codes` is row-major B x J.
  NodeId categorical_nll(NodeId logits, const DecoderLayout& layout, std::span<const int> codes);

  const Eigen::MatrixXd& value(NodeId id) const { return nodes_[id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// d value(loss) / d params, laid out like the ParamStore the parameter
  /// nodes came from. `loss` must be a 1 x 1 node. Parameters that do not
  /// reach the loss get zero.
  Eigen::VectorXd gradient(NodeId loss, std::size_t n_params);

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd adjoint;
    std::function<void(Tape&, NodeId)> backward;
    std::ptrdiff_t param_offset = -1;
    bool constant = false;
  };

  NodeId push(Eigen::MatrixXd value, std::function<void(Tape&, NodeId)> backward = {});
  Eigen::MatrixXd& adjoint(NodeId id);

  std::vector<Node> nodes_;
};

/// Encoder + decoder graph for one mini-batch.
struct NllGraph {
  Tape tape;
  Tape::NodeId theta = 0;
  Tape::NodeId loss = 0;

  double loss_value() const { return tape.value(loss)(0, 0); }
};

/// Builds the graph  -sum_i sum_j log p_j(x_ij | theta_i(eta)), theta_i from
/// the encoder. Slots read from `params`:
///   encoder.w1 (H x D), encoder.b1 (1 x H), encoder.w2 (1 x H), encoder.b2 (1 x 1)
///   NR:  nr.slope, nr.intercept (1 x K)
///   MMC: mmc.tau (1 x J), mmc.intercept (1 x K), mmc.w0 (K x 3), mmc.b0 (K x 3),
///        mmc.w<l>, mmc.b<l> (K x 9, K x 3) for l = 1 .. depth-1
/// Throws a numeric error when the forward pass produces NaN.
NllGraph forward_nll(const ParamStore& params, const DecoderLayout& layout, const OneHotBatch& batch,
                     std::span<const int> codes);

/// Runs the backward pass of `graph` and returns the gradient vector.
Eigen::VectorXd backward(NllGraph& graph, const ParamStore& params);

}  // namespace mmcirt
