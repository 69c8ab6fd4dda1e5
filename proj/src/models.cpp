#include "eegraph/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eegraph/autodiff.hpp"
#include "eegraph/errors.hpp"
#include "eegraph/graph.hpp"

namespace eegraph {

namespace {

using ad::Tape;
using ad::Var;
using Eigen::MatrixXd;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr std::size_t kEvalChunk = 1024;

int stream_count(const ModelConfig& cfg) {
  return cfg.het.streams == HetStreams::dual ? 2 : 1;
}

std::string stream_prefix(int s) { return "s" + std::to_string(s) + "."; }

MatrixXd uniform_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double fan_in) {
  const double bound = 1.0 / std::sqrt(fan_in);
  MatrixXd m(rows, cols);
  // Fill row-major so the draw order does not depend on Eigen's storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

void add_param(Model& m, std::string name, ParamRole role, MatrixXd value) {
  Parameter p;
  p.name = std::move(name);
  p.role = role;
  p.moment1 = MatrixXd::Zero(value.rows(), value.cols());
  p.moment2 = MatrixXd::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  m.params.push_back(std::move(p));
}

void check_batch(const Model& m, const Batch& x) {
  const auto& cfg = m.config;
  if (x.size == 0) throw ValidationError("model_forward: empty batch");
  if (x.n_nodes != static_cast<std::size_t>(cfg.n_nodes) ||
      x.features.rows() != static_cast<Eigen::Index>(x.size * x.n_nodes) ||
      x.features.cols() != cfg.n_features) {
    std::ostringstream msg;
    msg << "model_forward: batch of " << x.size << " samples with features " << x.features.rows()
        << "x" << x.features.cols() << " does not match n_nodes=" << cfg.n_nodes
        << ", n_features=" << cfg.n_features;
    throw ValidationError(msg.str());
  }
}

void check_finite_params(const Model& m) {
  for (const auto& p : m.params) {
    if (!p.value.allFinite()) {
      throw ContractError("model_forward: parameter '" + p.name + "' has non-finite entries (max |x| = " +
                          std::to_string(p.value.cwiseAbs().maxCoeff()) + ")");
    }
  }
}

// Dropout with inverted scaling; only built in training mode.
Var maybe_dropout(Tape& tape, Var h, double rate, Rng* rng) {
  if (!rng || rate <= 0.0) return h;
  const auto& v = tape.value(h);
  MatrixXd mask(v.rows(), v.cols());
  const double keep = 1.0 - rate;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) mask(r, c) = rng->uniform() < keep ? 1.0 / keep : 0.0;
  }
  return tape.hadamard(h, tape.constant(std::move(mask)));
}

struct ForwardPass {
  Tape tape;
  std::vector<Var> vars;
  Var logits;  // source rows only
  std::optional<Var> node_embed;  // every row, source first
  std::size_t source_size = 0;
  std::size_t target_size = 0;
};

Var var_of(const Model& m, const ForwardPass& f, std::string_view name) {
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (m.params[i].name == name) return f.vars[i];
  }
  throw ContractError("missing parameter '" + std::string(name) + "'");
}

Var activate(Tape& tape, Var h, Activation act) {
  return act == Activation::relu ? tape.relu(h) : h;
}

// Graph filtering -> 1x1 convolution -> relu -> flatten -> fully connected.
void forward_gcn_family(const Model& m, ForwardPass& f, Var input, std::size_t blocks, Rng* rng) {
  auto& tape = f.tape;
  const auto& cfg = m.config;
  Var adj = var_of(m, f, "adjacency");
  Var effective = cfg.kind == ModelKind::rgnn ? adj : tape.nonneg_adjacency(adj);
  Var a_hat = tape.normalize_adjacency(effective);

  Var h = input;
  for (int l = 0; l < cfg.n_layers; ++l) {
    Var w = var_of(m, f, "gcn." + std::to_string(l) + ".weight");
    h = activate(tape, tape.matmul(tape.propagate(a_hat, h, blocks), w), cfg.activation);
    h = maybe_dropout(tape, h, cfg.dropout, rng);
  }
  f.node_embed = h;

  Var conv = tape.relu(tape.add_row(tape.matmul(h, var_of(m, f, "conv.weight")), var_of(m, f, "conv.bias")));
  Var flat = tape.flatten_blocks(conv, blocks);
  Var logits = tape.add_row(tape.matmul(flat, var_of(m, f, "fc.weight")), var_of(m, f, "fc.bias"));
  f.logits = blocks == f.source_size ? logits
                                     : tape.middle_rows(logits, 0, static_cast<Eigen::Index>(f.source_size));
}

Var gru_over_columns(const Model& m, ForwardPass& f, const std::string& prefix, Var sequence) {
  auto& tape = f.tape;
  const auto rows = tape.value(sequence).rows();
  const auto steps = tape.value(sequence).cols();
  const auto p = [&](const char* n) { return var_of(m, f, prefix + "gru." + n); };
  Var wz = p("wz"), wr = p("wr"), wh = p("wh");
  Var uz = p("uz"), ur = p("ur"), uh = p("uh");
  Var bz = p("bz"), br = p("br"), bh = p("bh");

  Var h = tape.constant(MatrixXd::Zero(rows, m.config.hidden_dim));
  for (Eigen::Index t = 0; t < steps; ++t) {
    Var x = tape.column(sequence, t);
    Var z = tape.sigmoid(tape.add_row(tape.add(tape.matmul(x, wz), tape.matmul(h, uz)), bz));
    Var r = tape.sigmoid(tape.add_row(tape.add(tape.matmul(x, wr), tape.matmul(h, ur)), br));
    Var c = tape.tanh(tape.add_row(tape.add(tape.matmul(x, wh), tape.matmul(tape.hadamard(r, h), uh)), bh));
    h = tape.add(h, tape.hadamard(z, tape.add(c, tape.scale(h, -1.0))));
  }
  return h;
}

// Per stream: softmax mixture of meta-graphs -> normalized propagation ->
// GRU across the sequence axis -> per-stream linear head; heads are summed.
void forward_het(const Model& m, ForwardPass& f, const Batch& x, Rng* rng) {
  auto& tape = f.tape;
  const auto& cfg = m.config;
  const auto n = static_cast<Eigen::Index>(cfg.n_nodes);
  Var identity = tape.constant(MatrixXd::Identity(n, n));
  Var ones = tape.constant(MatrixXd::Ones(n, n));

  std::optional<Var> logits;
  for (int s = 0; s < stream_count(cfg); ++s) {
    const MatrixXd* input = s == 0 ? &x.features : &x.temporal;
    if (input->size() == 0) continue;  // temporal stream without raw input
    if (input->rows() != x.features.rows()) {
      throw ValidationError("model_forward: temporal input must have batch*n_nodes rows");
    }
    const auto prefix = stream_prefix(s);
    Var learned = tape.nonneg_adjacency(var_of(m, f, prefix + "adjacency"));
    const std::array<Var, 3> candidates = {learned, identity, ones};
    Var mixed = tape.softmax_mix(var_of(m, f, prefix + "mix"), candidates);
    Var a_hat = tape.normalize_adjacency(mixed);

    Var h = tape.constant(*input);
    for (int l = 0; l < cfg.n_layers; ++l) h = tape.propagate(a_hat, h, x.size);
    Var state = gru_over_columns(m, f, prefix, h);
    state = maybe_dropout(tape, state, cfg.dropout, rng);
    Var flat = tape.flatten_blocks(state, x.size);
    Var head = tape.matmul(flat, var_of(m, f, prefix + "fc.weight"));
    logits = logits ? tape.add(*logits, head) : head;
  }
  f.logits = tape.add_row(*logits, var_of(m, f, "fc.bias"));
}

ForwardPass build_forward(const Model& m, const Batch& source, const Batch* target, Rng* rng) {
  check_batch(m, source);
  check_finite_params(m);
  ForwardPass f;
  f.source_size = source.size;
  f.vars.reserve(m.params.size());
  for (const auto& p : m.params) f.vars.push_back(f.tape.variable(p.value));

  if (m.config.kind == ModelKind::het_emotion_net) {
    forward_het(m, f, source, rng);
    return f;
  }
  Var input = f.tape.constant(source.features);
  std::size_t blocks = source.size;
  if (target) {
    check_batch(m, *target);
    f.target_size = target->size;
    input = f.tape.concat_rows(input, f.tape.constant(target->features));
    blocks += target->size;
  }
  forward_gcn_family(m, f, input, blocks, rng);
  return f;
}

MatrixXd onehot(std::span<const int> labels, int n_classes) {
  MatrixXd t = MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return t;
}

void check_labels(std::span<const int> labels, int n_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                            " outside [0, " + std::to_string(n_classes) + ")");
    }
  }
}

MatrixXd task_targets(const Model& m, std::span<const int> labels) {
  const auto& cfg = m.config;
  check_labels(labels, cfg.n_classes);
  if (cfg.kind == ModelKind::rgnn && cfg.rgnn.emotion_dl_eps > 0.0) {
    return emotion_dl_targets(labels, cfg.rgnn.emotion_dl_eps, cfg.rgnn.neighbor_map, cfg.n_classes);
  }
  return onehot(labels, cfg.n_classes);
}

bool node_dat_active(const Model& m, const Batch* target) {
  return target && m.config.kind == ModelKind::rgnn && m.config.rgnn.node_dat;
}

struct LossVars {
  Var task, reg, domain, total;
  bool has_reg = false;
  bool has_domain = false;
};

LossVars build_loss(const Model& m, ForwardPass& f, const Batch& source, const TrainConfig& cfg,
                    const Batch* target) {
  auto& tape = f.tape;
  LossVars lv;
  lv.task = tape.soft_cross_entropy(f.logits, task_targets(m, source.labels));
  lv.total = lv.task;

  std::optional<Var> reg;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (m.params[i].role != ParamRole::weight) continue;
    if (cfg.l1_coef != 0.0) {
      Var t = tape.scale(tape.abs_sum(f.vars[i]), cfg.l1_coef);
      reg = reg ? tape.add(*reg, t) : t;
    }
    if (cfg.l2_coef != 0.0) {
      Var t = tape.scale(tape.square_sum(f.vars[i]), cfg.l2_coef);
      reg = reg ? tape.add(*reg, t) : t;
    }
  }
  if (reg) {
    lv.reg = *reg;
    lv.has_reg = true;
    lv.total = tape.add(lv.total, lv.reg);
  }

  if (node_dat_active(m, target)) {
    const auto n = static_cast<Eigen::Index>(m.config.n_nodes);
    const auto source_rows = static_cast<Eigen::Index>(f.source_size) * n;
    const auto all_rows = tape.value(*f.node_embed).rows();
    MatrixXd domain = MatrixXd::Zero(all_rows, 1);
    domain.topRows(source_rows).setOnes();
    Var reversed = tape.grad_reverse(*f.node_embed, m.config.rgnn.node_dat_beta);
    Var d_logits = tape.add_row(tape.matmul(reversed, var_of(m, f, "domain.weight")), var_of(m, f, "domain.bias"));
    lv.domain = tape.bce_with_logits(d_logits, domain);
    lv.has_domain = true;
    lv.total = tape.add(lv.total, lv.domain);
  }
  return lv;
}

LossParts read_parts(const Tape& tape, const LossVars& lv) {
  LossParts parts;
  parts.task = tape.scalar(lv.task);
  if (lv.has_reg) parts.regularization = tape.scalar(lv.reg);
  if (lv.has_domain) parts.domain = tape.scalar(lv.domain);
  return parts;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::dgcnn: return "dgcnn";
    case ModelKind::rgnn: return "rgnn";
    case ModelKind::sparse_dgcnn: return "sparse_dgcnn";
    case ModelKind::het_emotion_net: return "het_emotion_net";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "dgcnn") return ModelKind::dgcnn;
  if (name == "rgnn") return ModelKind::rgnn;
  if (name == "sparse_dgcnn" || name == "sparsedgcnn") return ModelKind::sparse_dgcnn;
  if (name == "het_emotion_net" || name == "hetemotionnet") return ModelKind::het_emotion_net;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string to_string(HetStreams streams) {
  return streams == HetStreams::dual ? "dual" : "spectral_only";
}

HetStreams parse_het_streams(std::string_view name) {
  if (name == "spectral_only") return HetStreams::spectral_only;
  if (name == "dual") return HetStreams::dual;
  throw ConfigError("unknown het stream mode '" + std::string(name) + "'");
}

void validate(const ModelConfig& cfg) {
  if (cfg.n_classes < 2) throw ConfigError("model: n_classes must be at least 2");
  if (cfg.n_nodes <= 0 || cfg.n_features <= 0) throw ConfigError("model: n_nodes and n_features must be positive");
  if (cfg.hidden_dim <= 0) throw ConfigError("model: hidden_dim must be positive");
  if (cfg.n_layers <= 0) throw ConfigError("model: n_layers must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  if (!(cfg.rgnn.emotion_dl_eps >= 0.0 && cfg.rgnn.emotion_dl_eps < 1.0)) {
    throw ConfigError("model: emotion_dl_eps must lie in [0, 1)");
  }
  if (!(cfg.rgnn.node_dat_beta >= 0.0)) throw ConfigError("model: node_dat_beta must be nonnegative");
  if (!(cfg.sparse.adj_l1 >= 0.0)) throw ConfigError("model: adj_l1 must be nonnegative");
  if (!cfg.rgnn.neighbor_map.empty()) {
    if (cfg.rgnn.neighbor_map.size() != static_cast<std::size_t>(cfg.n_classes)) {
      throw ConfigError("model: neighbor_map needs one entry per class");
    }
    for (const auto& row : cfg.rgnn.neighbor_map) {
      for (int c : row) {
        if (c < 0 || c >= cfg.n_classes) throw ConfigError("model: neighbor_map refers to an unknown class");
      }
    }
  }
  if (cfg.initial_adjacency) {
    const auto& a = *cfg.initial_adjacency;
    if (a.rows() != cfg.n_nodes || a.cols() != cfg.n_nodes) {
      throw ConfigError("model: initial adjacency must be n_nodes x n_nodes");
    }
    if (!a.allFinite()) throw ConfigError("model: initial adjacency has non-finite entries");
  }
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("train: learning_rate must be a finite nonnegative number");
  }
  if (!(cfg.l1_coef >= 0.0) || !(cfg.l2_coef >= 0.0)) throw ConfigError("train: l1/l2 coefficients must be nonnegative");
  if (cfg.batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (cfg.max_epochs <= 0) throw ConfigError("train: max_epochs must be positive");
}

Parameter& Model::param(std::string_view name) {
  for (auto& p : params) {
    if (p.name == name) return p;
  }
  throw ContractError("model has no parameter '" + std::string(name) + "'");
}

const Parameter& Model::param(std::string_view name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw ContractError("model has no parameter '" + std::string(name) + "'");
}

bool Model::has_param(std::string_view name) const {
  return std::any_of(params.begin(), params.end(), [&](const Parameter& p) { return p.name == name; });
}

Model make_model(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Model m;
  m.config = cfg;
  m.seed = seed;
  Rng init(mix_seed(seed, 0));
  m.rng = Rng(mix_seed(seed, 1));

  const int n = cfg.n_nodes;
  const int h = cfg.hidden_dim;
  const MatrixXd adjacency = cfg.initial_adjacency ? *cfg.initial_adjacency : fully_connected(n);

  if (cfg.kind == ModelKind::het_emotion_net) {
    for (int s = 0; s < stream_count(cfg); ++s) {
      const auto prefix = stream_prefix(s);
      add_param(m, prefix + "adjacency", ParamRole::adjacency, adjacency);
      add_param(m, prefix + "mix", ParamRole::mixing, MatrixXd::Zero(1, 3));
      for (const char* g : {"wz", "wr", "wh"}) add_param(m, prefix + "gru." + g, ParamRole::weight, uniform_init(init, 1, h, h));
      for (const char* g : {"uz", "ur", "uh"}) add_param(m, prefix + "gru." + g, ParamRole::weight, uniform_init(init, h, h, h));
      for (const char* g : {"bz", "br", "bh"}) add_param(m, prefix + "gru." + g, ParamRole::bias, uniform_init(init, 1, h, h));
      add_param(m, prefix + "fc.weight", ParamRole::weight, uniform_init(init, n * h, cfg.n_classes, n * h));
    }
    add_param(m, "fc.bias", ParamRole::bias, uniform_init(init, 1, cfg.n_classes, n * h));
    return m;
  }

  add_param(m, "adjacency", ParamRole::adjacency, adjacency);
  int in = cfg.n_features;
  for (int l = 0; l < cfg.n_layers; ++l) {
    add_param(m, "gcn." + std::to_string(l) + ".weight", ParamRole::weight, uniform_init(init, in, h, in));
    in = h;
  }
  add_param(m, "conv.weight", ParamRole::weight, uniform_init(init, h, h, h));
  add_param(m, "conv.bias", ParamRole::bias, uniform_init(init, 1, h, h));
  add_param(m, "fc.weight", ParamRole::weight, uniform_init(init, n * h, cfg.n_classes, n * h));
  add_param(m, "fc.bias", ParamRole::bias, uniform_init(init, 1, cfg.n_classes, n * h));
  if (cfg.kind == ModelKind::rgnn && cfg.rgnn.node_dat) {
    add_param(m, "domain.weight", ParamRole::discriminator, uniform_init(init, h, 1, h));
    add_param(m, "domain.bias", ParamRole::discriminator, MatrixXd::Zero(1, 1));
  }
  return m;
}

MatrixXd gcn_layer_forward(const MatrixXd& h, const MatrixXd& a_hat, const MatrixXd& w, Activation activation) {
  if (a_hat.rows() != a_hat.cols() || a_hat.cols() != h.rows() || h.cols() != w.rows()) {
    std::ostringstream msg;
    msg << "gcn_layer_forward: shapes A " << a_hat.rows() << "x" << a_hat.cols() << ", H " << h.rows() << "x"
        << h.cols() << ", W " << w.rows() << "x" << w.cols() << " do not conform";
    throw ValidationError(msg.str());
  }
  MatrixXd out = (a_hat * h) * w;
  if (activation == Activation::relu) out = out.cwiseMax(0.0);
  return out;
}

MatrixXd effective_adjacency(const Model& m, int stream) {
  if (m.config.kind == ModelKind::het_emotion_net) {
    MatrixXd a = m.param(stream_prefix(stream) + "adjacency").value.cwiseMax(0.0);
    a.diagonal().array() += 1.0;
    return a;
  }
  const auto& p = m.param("adjacency").value;
  if (m.config.kind == ModelKind::rgnn) return p;
  MatrixXd a = p.cwiseMax(0.0);
  a.diagonal().array() += 1.0;
  return a;
}

MatrixXd model_forward(const Model& m, const Batch& x) {
  auto f = build_forward(m, x, nullptr, nullptr);
  return f.tape.value(f.logits);
}

MatrixXd softmax(const MatrixXd& logits) { return ad::softmax_rows(logits); }

MatrixXd emotion_dl_targets(std::span<const int> labels, double eps,
                            const std::vector<std::vector<int>>& neighbor_map, int n_classes) {
  if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError("emotion_dl: eps must lie in [0, 1)");
  check_labels(labels, n_classes);
  MatrixXd t = onehot(labels, n_classes);
  if (eps == 0.0) return t;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    std::vector<int> neighbors;
    if (neighbor_map.empty()) {
      for (int c = 0; c < n_classes; ++c) {
        if (c != label) neighbors.push_back(c);
      }
    } else {
      neighbors = neighbor_map.at(static_cast<std::size_t>(label));
    }
    if (neighbors.empty()) {
      throw ConfigError("emotion_dl: class " + std::to_string(label) + " has no neighbors but eps > 0");
    }
    const auto row = static_cast<Eigen::Index>(i);
    t.row(row) *= (1.0 - eps);
    const double share = eps / static_cast<double>(neighbors.size());
    for (int c : neighbors) t(row, c) += share;
  }
  return t;
}

double weight_l1(const Model& m) {
  double total = 0.0;
  for (const auto& p : m.params) {
    if (p.role == ParamRole::weight) total += p.value.cwiseAbs().sum();
  }
  return total;
}

double weight_l2(const Model& m) {
  double total = 0.0;
  for (const auto& p : m.params) {
    if (p.role == ParamRole::weight) total += p.value.squaredNorm();
  }
  return total;
}

double loss(const Model& m, const MatrixXd& logits, std::span<const int> labels, const TrainConfig& cfg,
            double extra_terms) {
  if (logits.rows() != static_cast<Eigen::Index>(labels.size()) || logits.cols() != m.config.n_classes) {
    throw ValidationError("loss: logits shape does not match labels / n_classes");
  }
  Tape tape;
  Var z = tape.constant(logits);
  const double task = tape.scalar(tape.soft_cross_entropy(z, task_targets(m, labels)));
  return task + cfg.l1_coef * weight_l1(m) + cfg.l2_coef * weight_l2(m) + extra_terms;
}

NodeDatResult node_dat_term(const Model& m, const MatrixXd& source_nodes, const MatrixXd& target_nodes,
                            double beta) {
  if (m.config.kind != ModelKind::rgnn || !m.config.rgnn.node_dat) {
    throw ContractError("node_dat_term: NodeDAT is not enabled for this model");
  }
  if (!(beta >= 0.0)) throw ValidationError("node_dat_term: beta must be nonnegative");
  const auto& w = m.param("domain.weight").value;
  const auto& b = m.param("domain.bias").value;
  if (source_nodes.cols() != w.rows() || target_nodes.cols() != w.rows()) {
    throw ValidationError("node_dat_term: embedding width does not match the discriminator");
  }
  Tape tape;
  Var src = tape.variable(source_nodes);
  Var tgt = tape.variable(target_nodes);
  Var wv = tape.variable(w);
  Var bv = tape.variable(b);
  Var all = tape.grad_reverse(tape.concat_rows(src, tgt), beta);
  Var logits = tape.add_row(tape.matmul(all, wv), bv);
  MatrixXd domain = MatrixXd::Zero(source_nodes.rows() + target_nodes.rows(), 1);
  domain.topRows(source_nodes.rows()).setOnes();
  Var out = tape.bce_with_logits(logits, domain);
  tape.backward(out);
  return {tape.scalar(out), tape.grad(src), tape.grad(tgt), tape.grad(wv), tape.grad(bv)};
}

MatrixXd prox_l1(const MatrixXd& a, double lam) {
  if (!(lam >= 0.0)) throw ValidationError("prox_l1: lambda must be nonnegative");
  MatrixXd out = a;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (i == j) continue;
      const double v = a(i, j);
      const double mag = std::max(std::abs(v) - lam, 0.0);
      out(i, j) = mag == 0.0 ? 0.0 : std::copysign(mag, v);
    }
  }
  return out;
}

GradientResult compute_gradients(const Model& m, const Batch& source, const TrainConfig& cfg,
                                 const Batch* domain_target, Rng* dropout_rng) {
  const Batch* target = node_dat_active(m, domain_target) ? domain_target : nullptr;
  auto f = build_forward(m, source, target, dropout_rng);
  auto lv = build_loss(m, f, source, cfg, target);
  f.tape.backward(lv.total);
  GradientResult out;
  out.loss = read_parts(f.tape, lv);
  out.logits = f.tape.value(f.logits);
  out.grads.reserve(f.vars.size());
  for (auto v : f.vars) out.grads.push_back(f.tape.grad(v));
  return out;
}

LossParts loss_parts(const Model& m, const Batch& source, const TrainConfig& cfg, const Batch* domain_target) {
  const Batch* target = node_dat_active(m, domain_target) ? domain_target : nullptr;
  auto f = build_forward(m, source, target, nullptr);
  auto lv = build_loss(m, f, source, cfg, target);
  return read_parts(f.tape, lv);
}

void apply_gradients(Model& m, const std::vector<MatrixXd>& grads, const TrainConfig& cfg) {
  if (grads.size() != m.params.size()) throw ContractError("apply_gradients: gradient count mismatch");
  const double lr = cfg.learning_rate;
  ++m.optimizer_steps;
  const auto t = static_cast<double>(m.optimizer_steps);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    auto& p = m.params[i];
    const auto& g = grads[i];
    if (cfg.optimizer == OptimizerKind::sgd) {
      p.value -= lr * g;
    } else {
      p.moment1 = kAdamBeta1 * p.moment1 + (1.0 - kAdamBeta1) * g;
      p.moment2 = kAdamBeta2 * p.moment2 + (1.0 - kAdamBeta2) * g.cwiseAbs2();
      const MatrixXd step = (p.moment1 / c1).array() / ((p.moment2 / c2).array().sqrt() + kAdamEps);
      p.value -= lr * step;
    }
  }

  if (m.config.kind == ModelKind::sparse_dgcnn) {
    // Backward (proximal) step of forward-backward splitting, then projection
    // of the off-diagonal entries onto the nonnegative orthant.
    auto& adj = m.param("adjacency").value;
    adj = prox_l1(adj, lr * m.config.sparse.adj_l1);
    for (Eigen::Index i = 0; i < adj.rows(); ++i) {
      for (Eigen::Index j = 0; j < adj.cols(); ++j) {
        if (i != j && adj(i, j) < 0.0) adj(i, j) = 0.0;
      }
    }
  }

  for (const auto& p : m.params) {
    if (!p.value.allFinite()) {
      throw DivergenceError("parameter '" + p.name + "' became non-finite after optimizer step " +
                                std::to_string(m.optimizer_steps),
                            -1);
    }
  }
}

EpochMetrics train_epoch(Model& m, const DatasetView& data, const TrainConfig& cfg, const TrainExtras& extras) {
  validate(cfg);
  if (data.empty()) throw ValidationError("train_epoch: empty training set");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  m.rng.shuffle(std::span<std::size_t>(order));

  const bool use_target = m.config.kind == ModelKind::rgnn && m.config.rgnn.node_dat &&
                          extras.domain_target && !extras.domain_target->empty();
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  long batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
    const auto end = std::min(order.size(), start + batch_size);
    const std::span<const std::size_t> positions(order.data() + start, end - start);
    const Batch batch = data.gather(positions);

    std::optional<Batch> target;
    if (use_target) {
      const auto& pool = *extras.domain_target;
      std::vector<std::size_t> picks(std::min(batch.size, pool.size()));
      for (auto& p : picks) p = m.rng.below(pool.size());
      target = pool.gather(picks);
    }

    auto result = compute_gradients(m, batch, cfg, target ? &*target : nullptr, &m.rng);
    const double batch_loss = result.loss.total();
    if (!std::isfinite(batch_loss)) {
      throw DivergenceError("train_epoch: non-finite loss in batch " + std::to_string(batch_index), batch_index);
    }
    try {
      apply_gradients(m, result.grads, cfg);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " (batch " + std::to_string(batch_index) + ")", batch_index);
    }
    loss_sum += batch_loss * static_cast<double>(batch.size);
    const auto predicted = argmax_rows(result.logits);
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == batch.labels[i] ? 1 : 0;
  }
  const auto n = static_cast<double>(data.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

std::vector<int> argmax_rows(const MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double evaluate(const Model& m, const DatasetView& data) {
  if (data.empty()) throw ValidationError("evaluate: empty slice");
  std::size_t correct = 0;
  std::vector<std::size_t> positions;
  for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
    const auto end = std::min(data.size(), start + kEvalChunk);
    positions.clear();
    for (std::size_t p = start; p < end; ++p) positions.push_back(p);
    const Batch batch = data.gather(positions);
    const auto predicted = argmax_rows(model_forward(m, batch));
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == batch.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

nlohmann::json config_to_json(const ModelConfig& cfg) {
  return {
      {"kind", to_string(cfg.kind)},
      {"n_classes", cfg.n_classes},
      {"n_nodes", cfg.n_nodes},
      {"n_features", cfg.n_features},
      {"hidden_dim", cfg.hidden_dim},
      {"n_layers", cfg.n_layers},
      {"dropout", cfg.dropout},
      {"activation", cfg.activation == Activation::relu ? "relu" : "identity"},
      {"rgnn",
       {{"node_dat", cfg.rgnn.node_dat},
        {"node_dat_beta", cfg.rgnn.node_dat_beta},
        {"emotion_dl_eps", cfg.rgnn.emotion_dl_eps},
        {"neighbor_map", cfg.rgnn.neighbor_map}}},
      {"sparse", {{"adj_l1", cfg.sparse.adj_l1}}},
      {"het", {{"streams", to_string(cfg.het.streams)}}},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.kind = parse_model_kind(j.at("kind").get<std::string>());
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.n_nodes = j.at("n_nodes").get<int>();
  cfg.n_features = j.at("n_features").get<int>();
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.activation = j.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::identity;
  const auto& r = j.at("rgnn");
  cfg.rgnn.node_dat = r.at("node_dat").get<bool>();
  cfg.rgnn.node_dat_beta = r.at("node_dat_beta").get<double>();
  cfg.rgnn.emotion_dl_eps = r.at("emotion_dl_eps").get<double>();
  cfg.rgnn.neighbor_map = r.at("neighbor_map").get<std::vector<std::vector<int>>>();
  cfg.sparse.adj_l1 = j.at("sparse").at("adj_l1").get<double>();
  cfg.het.streams = parse_het_streams(j.at("het").at("streams").get<std::string>());
  return cfg;
}

double to_little(double v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(double)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<double>(bytes);
  }
  return v;
}

}  // namespace

void save_checkpoint(const Model& m, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(DataErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["dtype"] = "float64";
  meta["seed"] = m.seed;
  meta["optimizer_steps"] = m.optimizer_steps;
  meta["config"] = config_to_json(m.config);
  nlohmann::json layout = nlohmann::json::array();
  std::vector<double> blob;
  for (const auto& p : m.params) {
    layout.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) blob.push_back(to_little(p.value(r, c)));
    }
  }
  meta["params"] = layout;

  std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!bin) throw DataError(DataErrorKind::io, "write failed: " + (dir / "params.bin").string());
  std::ofstream js(dir / "meta.json", std::ios::trunc);
  js << meta.dump(2) << '\n';
  if (!js) throw DataError(DataErrorKind::io, "write failed: " + (dir / "meta.json").string());
}

Model load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream js(dir / "meta.json");
  if (!js) throw DataError(DataErrorKind::missing_file, "missing file: " + (dir / "meta.json").string());
  nlohmann::json meta;
  ModelConfig cfg;
  try {
    meta = nlohmann::json::parse(js);
    if (meta.at("format_version") != 1 || meta.at("dtype") != "float64") {
      throw DataError(DataErrorKind::bad_version, "checkpoint: unsupported format");
    }
    cfg = config_from_json(meta.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::malformed, "checkpoint meta.json: " + std::string(e.what()));
  }
  Model m = make_model(cfg, meta.at("seed").get<std::uint64_t>());
  m.optimizer_steps = meta.value("optimizer_steps", std::int64_t{0});

  const auto bin_path = dir / "params.bin";
  if (!std::filesystem::exists(bin_path)) throw DataError(DataErrorKind::missing_file, "missing file: " + bin_path.string());
  std::size_t expected = 0;
  for (const auto& p : m.params) expected += static_cast<std::size_t>(p.value.size());
  if (std::filesystem::file_size(bin_path) != expected * sizeof(double)) {
    throw DataError(DataErrorKind::size_mismatch, bin_path.string() + ": size does not match parameter layout");
  }
  std::vector<double> blob(expected);
  std::ifstream bin(bin_path, std::ios::binary);
  bin.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(expected * sizeof(double)));
  std::size_t k = 0;
  const auto& layout = meta.at("params");
  if (layout.size() != m.params.size()) throw DataError(DataErrorKind::malformed, "checkpoint: parameter count differs");
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    auto& p = m.params[i];
    if (layout[i].at("name") != p.name) throw DataError(DataErrorKind::malformed, "checkpoint: unexpected parameter " + layout[i].at("name").dump());
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = to_little(blob[k++]);
    }
  }
  return m;
}

}  // namespace eegraph
