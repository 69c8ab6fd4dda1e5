#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace eegraph::ad {

using Matrix = Eigen::MatrixXd;

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode differentiation over dense double matrices.
///
/// Nodes are appended in evaluation order; backward() walks them in reverse.
/// Only nodes that (transitively) depend on a variable() carry gradients.
class Tape {
 public:
  Var constant(Matrix value);
  Var variable(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value(0, 0); }

  /// Gradient of the last backward() output w.r.t. v. Zero matrix when v did
  /// not influence the output.
  Matrix grad(Var v) const;

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and back-propagates.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }

  // Linear algebra.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x c row over every row of a
  Var scale(Var a, double s);
  Var affine(Var a, double mul, double shift);  // mul*a + shift
  Var hadamard(Var a, Var b);
  Var concat_cols(std::span<const Var> parts);
  Var column(Var a, Eigen::Index j);
  Var middle_rows(Var a, Eigen::Index start, Eigen::Index count);
  Var concat_rows(Var top, Var bottom);

  // Pointwise nonlinearities.
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);

  /// Gradient-reversal: identity forward, -beta * grad backward.
  Var grad_reverse(Var a, double beta);

  // Graph operators.
  /// relu(P) + I with derivative 1 where P >= 0. Keeps every diagonal >= 1.
  Var nonneg_adjacency(Var p);
  /// A_ij / sqrt(|d_i| |d_j|), d_i = sum_j A_ij.
  Var normalize_adjacency(Var a);
  /// Applies an [n x n] operator to each [n x d] block of a stacked
  /// [blocks*n x d] matrix.
  Var propagate(Var op, Var stacked, std::size_t blocks);
  /// [blocks*n x c] -> [blocks x n*c], node-major within each row.
  Var flatten_blocks(Var stacked, std::size_t blocks);
  /// sum_m softmax(logits)_m * mats[m]; logits is 1 x M.
  Var softmax_mix(Var logits, std::span<const Var> mats);

  // Reductions to 1x1.
  /// Mean over rows of KL(target || softmax(logits)). Targets rows sum to 1.
  Var soft_cross_entropy(Var logits, const Matrix& targets);
  /// Mean binary cross-entropy with logits.
  Var bce_with_logits(Var logits, const Matrix& targets);
  Var abs_sum(Var a);
  Var square_sum(Var a);

 private:
  using Backward = std::function<void(Tape&, const Matrix& g)>;

  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };

  Var push(Matrix value, bool needs_grad, Backward backward);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  void accumulate(Var v, const Matrix& g);

  std::vector<Node> nodes_;
};

/// Row-wise softmax, numerically stabilized.
Matrix softmax_rows(const Matrix& logits);

}  // namespace eegraph::ad
