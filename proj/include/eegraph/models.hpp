#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "eegraph/dataset.hpp"
#include "eegraph/rng.hpp"

namespace eegraph {

enum class ModelKind { dgcnn, rgnn, sparse_dgcnn, het_emotion_net };
enum class Activation { relu, identity };
enum class HetStreams { spectral_only, dual };
enum class OptimizerKind { adam, sgd };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);
std::string to_string(HetStreams streams);
HetStreams parse_het_streams(std::string_view name);

struct RgnnOptions {
  bool node_dat = false;
  double node_dat_beta = 0.1;  // gradient-reversal scale
  double emotion_dl_eps = 0.0;
  /// neighbor_map[c] lists the classes that share label mass with c. Empty
  /// means "every other class".
  std::vector<std::vector<int>> neighbor_map;
};

struct SparseOptions {
  double adj_l1 = 0.01;  // lambda of the L1 penalty on the adjacency
};

struct HetOptions {
  HetStreams streams = HetStreams::spectral_only;
};

struct ModelConfig {
  ModelKind kind = ModelKind::dgcnn;
  int n_classes = 2;
  int n_nodes = 1;
  int n_features = 1;
  int hidden_dim = 40;
  int n_layers = 2;
  double dropout = 0.5;
  Activation activation = Activation::relu;
  RgnnOptions rgnn;
  SparseOptions sparse;
  HetOptions het;
  /// Starting value of the trainable adjacency; all-ones when absent.
  std::optional<Eigen::MatrixXd> initial_adjacency;
};

/// Throws ConfigError on the first violated constraint.
void validate(const ModelConfig& cfg);

struct TrainConfig {
  double learning_rate = 1e-3;
  double l1_coef = 0.001;
  double l2_coef = 0.001;
  int batch_size = 256;
  int max_epochs = 100;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  std::string device = "cpu";
};

void validate(const TrainConfig& cfg);

enum class ParamRole {
  adjacency,      // trainable graph
  weight,         // layer/head weights, subject to L1/L2
  bias,
  mixing,         // meta-graph mixing logits
  discriminator,  // NodeDAT domain classifier
};

struct Parameter {
  std::string name;
  ParamRole role = ParamRole::weight;
  Eigen::MatrixXd value;
  Eigen::MatrixXd moment1;  // optimizer state
  Eigen::MatrixXd moment2;
};

/// A GNN classifier: configuration, parameters, optimizer state and the
/// random stream used for shuffling and dropout.
struct Model {
  ModelConfig config;
  std::vector<Parameter> params;
  Rng rng;
  std::uint64_t seed = 0;
  std::int64_t optimizer_steps = 0;

  Parameter& param(std::string_view name);
  const Parameter& param(std::string_view name) const;
  bool has_param(std::string_view name) const;
};

/// Fresh model; parameters drawn uniformly in +-1/sqrt(fan_in).
Model make_model(const ModelConfig& cfg, std::uint64_t seed);

/// sigma(A_hat * H * W).
Eigen::MatrixXd gcn_layer_forward(const Eigen::MatrixXd& h, const Eigen::MatrixXd& a_hat,
                                  const Eigen::MatrixXd& w, Activation activation);

/// The adjacency the first graph layer actually uses: relu(P) + I for
/// dgcnn/sparse_dgcnn (and every HetEmotionNet stream), P itself for rgnn.
Eigen::MatrixXd effective_adjacency(const Model& m, int stream = 0);

/// Evaluation-mode logits [batch x n_classes].
Eigen::MatrixXd model_forward(const Model& m, const Batch& x);

/// Row-wise softmax.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

/// (1-eps)*onehot(label) + eps spread uniformly over neighbor_map[label].
Eigen::MatrixXd emotion_dl_targets(std::span<const int> labels, double eps,
                                   const std::vector<std::vector<int>>& neighbor_map, int n_classes);

/// Cross-entropy against one-hot or EmotionDL targets (mean over rows), plus
/// l1*sum|w| + l2*sum w^2 over weight parameters, plus `extra_terms`.
double loss(const Model& m, const Eigen::MatrixXd& logits, std::span<const int> labels,
            const TrainConfig& cfg, double extra_terms = 0.0);

/// Sum of |w| and w^2 over weight-role parameters.
double weight_l1(const Model& m);
double weight_l2(const Model& m);

struct NodeDatResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_source;  // reversed and scaled by beta
  Eigen::MatrixXd grad_target;
  Eigen::MatrixXd grad_weight;  // discriminator, not reversed
  Eigen::MatrixXd grad_bias;
};

/// Per-node domain discriminator on node embeddings ([rows x hidden]),
/// source labelled 1 and target 0. Requires node_dat to be enabled.
NodeDatResult node_dat_term(const Model& m, const Eigen::MatrixXd& source_nodes,
                            const Eigen::MatrixXd& target_nodes, double beta);

/// Soft-threshold of the off-diagonal entries; the diagonal is copied.
Eigen::MatrixXd prox_l1(const Eigen::MatrixXd& a, double lam);

struct LossParts {
  double task = 0.0;
  double regularization = 0.0;
  double domain = 0.0;

  double total() const { return task + regularization + domain; }
};

struct GradientResult {
  LossParts loss;
  std::vector<Eigen::MatrixXd> grads;  // aligned with Model::params
  Eigen::MatrixXd logits;
};

/// Loss and parameter gradients for one batch. When `dropout_rng` is given
/// the forward pass runs in training mode. `domain_target` feeds NodeDAT;
/// its gradient reaches the feature extractor reversed and scaled.
GradientResult compute_gradients(const Model& m, const Batch& source, const TrainConfig& cfg,
                                 const Batch* domain_target = nullptr, Rng* dropout_rng = nullptr);

/// Same loss as compute_gradients, without the backward pass.
LossParts loss_parts(const Model& m, const Batch& source, const TrainConfig& cfg,
                     const Batch* domain_target = nullptr);

/// Applies one optimizer step and the kind-specific adjacency constraint.
void apply_gradients(Model& m, const std::vector<Eigen::MatrixXd>& grads, const TrainConfig& cfg);

struct TrainExtras {
  /// Unlabelled samples for NodeDAT. Only consulted when enabled.
  const DatasetView* domain_target = nullptr;
};

struct EpochMetrics {
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

EpochMetrics train_epoch(Model& m, const DatasetView& data, const TrainConfig& cfg,
                         const TrainExtras& extras = {});

/// Fraction of samples whose argmax logit (lowest index on ties) equals the label.
double evaluate(const Model& m, const DatasetView& data);

/// Index of the largest entry in each row, lowest on ties.
std::vector<int> argmax_rows(const Eigen::MatrixXd& logits);

void save_checkpoint(const Model& m, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

}  // namespace eegraph
