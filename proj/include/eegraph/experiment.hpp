#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegraph/dataset.hpp"
#include "eegraph/graph.hpp"
#include "eegraph/models.hpp"
#include "eegraph/protocols.hpp"
#include "eegraph/splitting.hpp"

namespace eegraph {

struct DatasetSource {
  std::optional<std::filesystem::path> path;
  std::optional<SynthSpec> synth;
};

struct TaskConfig {
  SplitMode split = SplitMode::cross;
  std::optional<int> n_classes;
  std::string name;  // e.g. "cross-9"; selects regularization defaults
};

struct GraphInit {
  std::optional<std::filesystem::path> positions;
  double delta = 5.0;
  std::vector<NodePair> global_pairs;
  double global_weight = -1.0;
};

struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::ncv;
  int k = 10;
  int k_inner = 3;
  std::vector<double> grid_learning_rate{1e-4, 1e-3, 1e-2};
  std::vector<int> grid_hidden_dim{20, 40, 80};
  std::uint64_t seed = 0;
};

/// Fully resolved experiment. Dataset shape fields of `model` are filled in
/// when the dataset is loaded.
struct ExperimentConfig {
  DatasetSource dataset;
  TaskConfig task;
  ModelConfig model;
  GraphInit graph;
  ProtocolConfig protocol;
  TrainConfig train;
  std::vector<std::string> warnings;
};

/// 0.001 for intra-2, 0.003 for cross-2 and intra-9, 0.005 for cross-9, else 0.001.
double default_regularization(const std::string& task_name);

/// Validates and fills defaults. Unknown keys, type errors and range errors
/// raise ConfigError naming the JSON path. Also accepts a run_meta.json.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::filesystem::path& file);

/// Round-trips through parse_config.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

Dataset load_experiment_dataset(const ExperimentConfig& cfg);

/// Builds models for `ds` with grid overrides applied.
ModelFactory make_factory(const ExperimentConfig& cfg, const Dataset& ds);

struct RunOutcome {
  ProtocolResult result;
  nlohmann::json run_meta;
};

RunOutcome run_experiment(const ExperimentConfig& cfg, int jobs = 1);

/// Runs and writes results.json, acc_matrix.csv and run_meta.json into
/// `out_dir`, each atomically. Nothing is written when the run fails.
RunOutcome cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int jobs = 1);

enum class SweepAxis { learning_rate, hidden_dim };

SweepAxis parse_sweep_axis(std::string_view name);

struct SweepCell {
  double value = 0.0;
  std::optional<double> summary_accuracy;
  std::string error;  // set when the cell failed
};

/// One cmd_run per distinct value, in subdirectories of `out_dir`, plus
/// sweep.csv. Failed cells are recorded and the sweep continues.
std::vector<SweepCell> cmd_sweep(const ExperimentConfig& cfg, SweepAxis axis, std::vector<double> values,
                                 const std::filesystem::path& out_dir, int jobs = 1);

SynthSpec parse_synth_spec(const nlohmann::json& doc);
void cmd_synth(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Exit code for an exception: 2 config/validation, 3 data, 4 divergence,
/// 5 leakage, 1 otherwise.
int exit_code_for(const std::exception& e);

/// Writes `content` to a temporary sibling and renames it over `file`.
void write_atomic(const std::filesystem::path& file, const std::string& content);

}  // namespace eegraph
