#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegraph/audit.hpp"
#include "eegraph/dataset.hpp"
#include "eegraph/models.hpp"
#include "eegraph/splitting.hpp"

namespace eegraph {

enum class ProtocolKind { cv, fcv, ncv };

std::string to_string(ProtocolKind kind);
ProtocolKind parse_protocol_kind(std::string_view name);

/// One grid point. Unset fields keep the base configuration.
struct HyperParams {
  std::optional<double> learning_rate;
  std::optional<int> hidden_dim;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

nlohmann::json to_json(const HyperParams& hp);

/// Cartesian product, learning rate varying slowest. Empty lists leave the
/// field unset; two empty lists give a single default point.
std::vector<HyperParams> make_grid(const std::vector<double>& learning_rates, const std::vector<int>& hidden_dims);

TrainConfig with_overrides(TrainConfig cfg, const HyperParams& hp);

/// Builds a freshly initialized model for a grid point and seed.
using ModelFactory = std::function<Model(const HyperParams&, std::uint64_t seed)>;

/// acc[i][j]: accuracy of fold i after epoch j+1.
struct AccuracyMatrix {
  std::vector<std::vector<double>> acc;

  std::size_t folds() const { return acc.size(); }
  std::size_t epochs() const { return acc.empty() ? 0 : acc.front().size(); }

  /// Throws ValidationError unless rectangular, non-empty and within [0, 1].
  void validate() const;
};

/// Per-epoch mean over folds.
std::vector<double> column_means(const AccuracyMatrix& m);

struct ProtocolOptions {
  int epochs = 100;        // T
  int jobs = 1;            // folds trained concurrently
  AuditLog* audit = nullptr;
};

/// Trains a fresh model (seed = train_cfg.seed + fold) on every fold's
/// complement and records the fold's accuracy after each epoch.
AccuracyMatrix collect_acc_matrix(const ModelFactory& factory, const FoldPlan& plan, const Dataset& ds,
                                  const TrainConfig& train_cfg, const ProtocolOptions& opts,
                                  const HyperParams& hp = {});

/// Inner-loop outcome of NCV for one outer fold.
struct OuterFoldTrace {
  std::vector<std::optional<AccuracyMatrix>> inner;  // per grid point; empty when it failed
  std::vector<std::string> failures;                 // per grid point; empty when it succeeded
  std::size_t selected_grid_point = 0;
  int selected_epoch = 0;  // T', 1-based
  double inner_score = 0.0;
  double test_accuracy = 0.0;
  std::size_t test_size = 0;
};

struct ProtocolResult {
  ProtocolKind protocol = ProtocolKind::cv;
  double summary_accuracy = 0.0;
  std::vector<double> per_fold;
  /// 1-based. CV: EPO_i per fold. FCV: the fixed epoch, once. NCV: T' per outer fold.
  std::vector<int> selected_epochs;
  std::vector<HyperParams> grid;
  std::optional<AccuracyMatrix> acc_matrix;  // cv / fcv
  std::vector<OuterFoldTrace> outer;         // ncv
  nlohmann::json audit_summary;              // per fold and phase, without sequence numbers
};

/// MAX_i = max_j acc[i][j]; summary = mean_i MAX_i.
ProtocolResult cv_summary(const AccuracyMatrix& acc);

/// AVG_j = mean_i acc[i][j]; summary = max_j AVG_j.
ProtocolResult fcv_summary(const AccuracyMatrix& acc);

struct GridChoice {
  std::size_t grid_point = 0;
  int epoch_index = 0;  // 0-based
  double score = 0.0;
};

/// Maximizes max_t AVG_t; ties go to the earlier grid point, then the
/// earlier epoch. Throws DivergenceError when every point failed.
GridChoice tune_grid(const std::vector<std::optional<AccuracyMatrix>>& inner);

struct NcvSettings {
  int k = 10;
  int k_inner = 3;
  SplitMode mode = SplitMode::cross;
  std::uint64_t seed = 0;
};

/// Nested cross-validation. Each outer test fold is read exactly once, after
/// its model was retrained for T' epochs on the outer training side. Throws
/// LeakageError if the audit shows otherwise.
ProtocolResult ncv_run(const ModelFactory& factory, const Dataset& ds, const NcvSettings& settings,
                       const std::vector<HyperParams>& grid, const TrainConfig& train_cfg,
                       const ProtocolOptions& opts);

/// Per-fold accuracy curve of one training run. The NodeDAT target pool, when
/// the model uses one, comes from `train` only.
std::vector<double> train_and_track(Model& model, const DatasetView& train, const DatasetView* eval,
                                    const TrainConfig& cfg, int epochs);

nlohmann::json to_json(const AccuracyMatrix& m);
nlohmann::json to_json(const ProtocolResult& r);

/// One CSV row per fold (per outer fold and grid point for NCV).
std::string acc_matrix_csv(const ProtocolResult& r);

/// Per (phase, outer, inner, grid) tag: number of distinct samples read.
nlohmann::json summarize_audit(const AuditLog& log);

}  // namespace eegraph
