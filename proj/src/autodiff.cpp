#include "eegraph/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "eegraph/graph.hpp"

namespace eegraph::ad {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Matrix(), needs_grad ? std::move(backward) : Backward(), needs_grad});
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::variable(Matrix value) { return push(std::move(value), true, {}); }

void Tape::accumulate(Var v, const Matrix& g) {
  auto& node = nodes_[v.id];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_[v.id];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var out) {
  if (value(out).size() != 1) throw std::invalid_argument("backward: output must be 1x1");
  for (auto& node : nodes_) node.grad.resize(0, 0);
  nodes_[out.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = out.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.backward || node.grad.size() == 0) continue;
    node.backward(*this, node.grad);
  }
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(value(a).cols()) +
                                " vs " + std::to_string(value(b).rows()) + ")");
  }
  return push(value(a) * value(b), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) {
    throw std::invalid_argument("add_row: row must be 1 x cols(a)");
  }
  Matrix out = value(a);
  out.rowwise() += value(row).row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::scale(Var a, double s) { return affine(a, s, 0.0); }

Var Tape::affine(Var a, double mul, double shift) {
  Matrix out = (value(a).array() * mul + shift).matrix();
  return push(std::move(out), needs(a), [a, mul](Tape& t, const Matrix& g) { t.accumulate(a, g * mul); });
}

Var Tape::hadamard(Var a, Var b) {
  require_same_shape(value(a), value(b), "hadamard");
  return push(value(a).cwiseProduct(value(b)), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.needs(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool any = false;
  for (auto p : parts) {
    if (value(p).rows() != rows) throw std::invalid_argument("concat_cols: row counts differ");
    cols += value(p).cols();
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (auto p : parts) {
    out.middleCols(offset, value(p).cols()) = value(p);
    offset += value(p).cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), any, [inputs](Tape& t, const Matrix& g) {
    Eigen::Index off = 0;
    for (auto p : inputs) {
      const auto c = t.value(p).cols();
      if (t.needs(p)) t.accumulate(p, g.middleCols(off, c));
      off += c;
    }
  });
}

Var Tape::column(Var a, Eigen::Index j) {
  return push(value(a).col(j), needs(a), [a, j](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    full.col(j) = g;
    t.accumulate(a, full);
  });
}

Var Tape::middle_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > value(a).rows()) {
    throw std::invalid_argument("middle_rows: range out of bounds");
  }
  return push(value(a).middleRows(start, count), needs(a), [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

Var Tape::concat_rows(Var top, Var bottom) {
  if (value(top).cols() != value(bottom).cols()) throw std::invalid_argument("concat_rows: column counts differ");
  Matrix out(value(top).rows() + value(bottom).rows(), value(top).cols());
  out << value(top), value(bottom);
  return push(std::move(out), needs(top) || needs(bottom), [top, bottom](Tape& t, const Matrix& g) {
    const auto r = t.value(top).rows();
    if (t.needs(top)) t.accumulate(top, g.topRows(r));
    if (t.needs(bottom)) t.accumulate(bottom, g.bottomRows(g.rows() - r));
  });
}

Var Tape::relu(Var a) {
  return push(value(a).cwiseMax(0.0), needs(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (t.value(a).array() > 0.0).select(g, 0.0));
  });
}

Var Tape::sigmoid(Var a) {
  Matrix out = value(a).unaryExpr([](double x) { return stable_sigmoid(x); });
  const std::size_t self = nodes_.size();
  return push(std::move(out), needs(a), [a, self](Tape& t, const Matrix& g) {
    const auto& y = t.nodes_[self].value.array();
    t.accumulate(a, (g.array() * y * (1.0 - y)).matrix());
  });
}

Var Tape::tanh(Var a) {
  Matrix out = value(a).array().tanh().matrix();
  const std::size_t self = nodes_.size();
  return push(std::move(out), needs(a), [a, self](Tape& t, const Matrix& g) {
    const auto& y = t.nodes_[self].value.array();
    t.accumulate(a, (g.array() * (1.0 - y.square())).matrix());
  });
}

Var Tape::grad_reverse(Var a, double beta) {
  return push(value(a), needs(a), [a, beta](Tape& t, const Matrix& g) { t.accumulate(a, -beta * g); });
}

Var Tape::nonneg_adjacency(Var p) {
  const Matrix& pv = value(p);
  if (pv.rows() != pv.cols()) throw std::invalid_argument("nonneg_adjacency: matrix must be square");
  Matrix out = pv.cwiseMax(0.0);
  out.diagonal().array() += 1.0;
  return push(std::move(out), needs(p), [p](Tape& t, const Matrix& g) {
    t.accumulate(p, (t.value(p).array() >= 0.0).select(g, 0.0));
  });
}

Var Tape::normalize_adjacency(Var a) {
  Matrix out = eegraph::normalize_adjacency(value(a));
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(a);
    const Eigen::VectorXd degree = av.rowwise().sum();
    const Eigen::VectorXd s = degree.cwiseAbs().cwiseSqrt().cwiseInverse();
    const Matrix m = g.cwiseProduct(av);
    const Eigen::VectorXd ds = m * s + m.transpose() * s;
    Eigen::VectorXd dd(degree.size());
    for (Eigen::Index i = 0; i < degree.size(); ++i) {
      const double sign = degree(i) < 0.0 ? -1.0 : 1.0;
      dd(i) = ds(i) * (-0.5 * s(i) * s(i) * s(i) * sign);
    }
    Matrix ga = g.cwiseProduct(s * s.transpose());
    ga.colwise() += dd;
    t.accumulate(a, ga);
  });
}

Var Tape::propagate(Var op, Var stacked, std::size_t blocks) {
  const Matrix& opv = value(op);
  const Matrix& h = value(stacked);
  const Eigen::Index n = opv.rows();
  if (opv.cols() != n || h.rows() != n * static_cast<Eigen::Index>(blocks)) {
    throw std::invalid_argument("propagate: operator is " + std::to_string(opv.rows()) + "x" +
                                std::to_string(opv.cols()) + " but input has " +
                                std::to_string(h.rows()) + " rows for " + std::to_string(blocks) +
                                " blocks");
  }
  Matrix out(h.rows(), h.cols());
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto off = static_cast<Eigen::Index>(b) * n;
    out.middleRows(off, n).noalias() = opv * h.middleRows(off, n);
  }
  return push(std::move(out), needs(op) || needs(stacked), [op, stacked, blocks, n](Tape& t, const Matrix& g) {
    const Matrix& opv = t.value(op);
    const Matrix& h = t.value(stacked);
    if (t.needs(stacked)) {
      Matrix gh(h.rows(), h.cols());
      for (std::size_t b = 0; b < blocks; ++b) {
        const auto off = static_cast<Eigen::Index>(b) * n;
        gh.middleRows(off, n).noalias() = opv.transpose() * g.middleRows(off, n);
      }
      t.accumulate(stacked, gh);
    }
    if (t.needs(op)) {
      Matrix gop = Matrix::Zero(n, n);
      for (std::size_t b = 0; b < blocks; ++b) {
        const auto off = static_cast<Eigen::Index>(b) * n;
        gop.noalias() += g.middleRows(off, n) * h.middleRows(off, n).transpose();
      }
      t.accumulate(op, gop);
    }
  });
}

Var Tape::flatten_blocks(Var stacked, std::size_t blocks) {
  const Matrix& h = value(stacked);
  if (blocks == 0 || h.rows() % static_cast<Eigen::Index>(blocks) != 0) {
    throw std::invalid_argument("flatten_blocks: rows not divisible by block count");
  }
  const Eigen::Index n = h.rows() / static_cast<Eigen::Index>(blocks);
  const Eigen::Index c = h.cols();
  Matrix out(static_cast<Eigen::Index>(blocks), n * c);
  for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(blocks); ++b) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < c; ++k) out(b, i * c + k) = h(b * n + i, k);
    }
  }
  return push(std::move(out), needs(stacked), [stacked, n, c](Tape& t, const Matrix& g) {
    Matrix gh(g.rows() * n, c);
    for (Eigen::Index b = 0; b < g.rows(); ++b) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < c; ++k) gh(b * n + i, k) = g(b, i * c + k);
      }
    }
    t.accumulate(stacked, gh);
  });
}

Var Tape::softmax_mix(Var logits, std::span<const Var> mats) {
  const Matrix& lv = value(logits);
  if (lv.rows() != 1 || lv.cols() != static_cast<Eigen::Index>(mats.size()) || mats.empty()) {
    throw std::invalid_argument("softmax_mix: need 1 x M logits for M matrices");
  }
  const Matrix w = softmax_rows(lv);
  Matrix out = Matrix::Zero(value(mats[0]).rows(), value(mats[0]).cols());
  bool any = needs(logits);
  for (std::size_t m = 0; m < mats.size(); ++m) {
    require_same_shape(out, value(mats[m]), "softmax_mix");
    out += w(0, static_cast<Eigen::Index>(m)) * value(mats[m]);
    any = any || needs(mats[m]);
  }
  std::vector<Var> inputs(mats.begin(), mats.end());
  return push(std::move(out), any, [logits, inputs, w](Tape& t, const Matrix& g) {
    Eigen::VectorXd inner(static_cast<Eigen::Index>(inputs.size()));
    for (std::size_t m = 0; m < inputs.size(); ++m) {
      const auto mi = static_cast<Eigen::Index>(m);
      inner(mi) = g.cwiseProduct(t.value(inputs[m])).sum();
      if (t.needs(inputs[m])) t.accumulate(inputs[m], w(0, mi) * g);
    }
    if (t.needs(logits)) {
      const double mean = w.row(0).dot(inner.transpose());
      Matrix gl(1, w.cols());
      for (Eigen::Index m = 0; m < w.cols(); ++m) gl(0, m) = w(0, m) * (inner(m) - mean);
      t.accumulate(logits, gl);
    }
  });
}

Var Tape::soft_cross_entropy(Var logits, const Matrix& targets) {
  const Matrix& z = value(logits);
  require_same_shape(z, targets, "soft_cross_entropy");
  const auto rows = static_cast<double>(z.rows());
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const double tv = targets(r, c);
      if (tv > 0.0) total += tv * (std::log(tv) - (z(r, c) - lse));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total / rows;
  return push(std::move(out), needs(logits), [logits, targets, rows](Tape& t, const Matrix& g) {
    t.accumulate(logits, g(0, 0) * (softmax_rows(t.value(logits)) - targets) / rows);
  });
}

Var Tape::bce_with_logits(Var logits, const Matrix& targets) {
  const Matrix& z = value(logits);
  require_same_shape(z, targets, "bce_with_logits");
  const auto count = static_cast<double>(z.size());
  double total = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double x = z(k);
    total += std::max(x, 0.0) - x * targets(k) + std::log1p(std::exp(-std::abs(x)));
  }
  Matrix out(1, 1);
  out(0, 0) = total / count;
  return push(std::move(out), needs(logits), [logits, targets, count](Tape& t, const Matrix& g) {
    Matrix gz = t.value(logits).unaryExpr([](double x) { return stable_sigmoid(x); }) - targets;
    t.accumulate(logits, g(0, 0) * gz / count);
  });
}

Var Tape::abs_sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).cwiseAbs().sum();
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) {
    const Matrix sign = t.value(a).unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    t.accumulate(a, g(0, 0) * sign);
  });
}

Var Tape::square_sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).squaredNorm();
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, 2.0 * g(0, 0) * t.value(a));
  });
}

}  // namespace eegraph::ad
