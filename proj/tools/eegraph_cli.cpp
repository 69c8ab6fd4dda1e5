#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eegraph/dataset.hpp"
#include "eegraph/errors.hpp"
#include "eegraph/experiment.hpp"
#include "eegraph/features.hpp"

namespace {

eegraph::ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  auto cfg = eegraph::parse_config_file(path);
  if (seed) {
    cfg.train.seed = *seed;
    cfg.protocol.seed = *seed;
  }
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph neural network toolkit for EEG feature classification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run one validation protocol and write results.json, acc_matrix.csv, run_meta.json");
  run->add_option("--config", config_path, "Experiment JSON (or a run_meta.json to replay)")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override train.seed and protocol.seed");
  run->add_option("--jobs", jobs, "Folds trained concurrently")->check(CLI::PositiveNumber);

  std::string axis;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "Repeat run over values of one hyper-parameter and write sweep.csv");
  sweep->add_option("--config", config_path, "Experiment JSON")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--axis", axis, "learning_rate or hidden_dim")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--seed", seed, "Override train.seed and protocol.seed");
  sweep->add_option("--jobs", jobs, "Folds trained concurrently")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  synth->add_option("--config", config_path, "JSON with synthetic-data fields")->required();
  synth->add_option("--out", out_dir, "Dataset directory")->required();
  synth->add_option("--seed", seed, "Override the generator seed");

  std::string input;
  double fs = 0.0;
  double window = 1.0;
  bool lds = false;
  int label = 0;
  int subject = 0;
  int n_classes = 2;
  auto* extract = app.add_subcommand("extract", "Differential-entropy features from a CSV recording");
  extract->add_option("--input", input, "CSV, one row per timestep, one column per channel")->required();
  extract->add_option("--out", out_dir, "Dataset directory")->required();
  extract->add_option("--fs", fs, "Sampling rate in Hz")->required()->check(CLI::PositiveNumber);
  extract->add_option("--window", window, "Window length in seconds")->check(CLI::PositiveNumber);
  extract->add_flag("--lds", lds, "Smooth features across windows");
  extract->add_option("--label", label, "Class label of every window");
  extract->add_option("--subject", subject, "Subject id of every window");
  extract->add_option("--n-classes", n_classes, "Number of classes")->check(CLI::Range(2, 1 << 20));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = load_config(config_path, seed);
      auto outcome = eegraph::cmd_run(cfg, out_dir, jobs);
      std::printf("%s summary_accuracy %.4f\n", eegraph::to_string(outcome.result.protocol).c_str(),
                  outcome.result.summary_accuracy);
    } else if (*sweep) {
      auto cfg = load_config(config_path, seed);
      auto cells = eegraph::cmd_sweep(cfg, eegraph::parse_sweep_axis(axis), values, out_dir, jobs);
      for (const auto& c : cells) {
        if (c.summary_accuracy) {
          std::printf("%s=%g summary_accuracy %.4f\n", axis.c_str(), c.value, *c.summary_accuracy);
        } else {
          std::printf("%s=%g failed\n", axis.c_str(), c.value);
        }
      }
    } else if (*synth) {
      std::ifstream in(config_path);
      if (!in) throw eegraph::DataError(eegraph::DataErrorKind::missing_file, "cannot open " + config_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw eegraph::ConfigError(config_path + ": invalid JSON: " + e.what());
      }
      auto spec = eegraph::parse_synth_spec(doc);
      if (seed) spec.seed = *seed;
      eegraph::cmd_synth(spec, out_dir);
    } else if (*extract) {
      const auto bands = eegraph::default_bands();
      auto rec = eegraph::load_recording_csv(input, fs);
      auto features = eegraph::extract_de(rec, bands, window);
      if (lds) eegraph::lds_smooth_features(features);
      eegraph::save_dataset(eegraph::features_to_dataset(features, bands, label, subject, n_classes), out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return eegraph::exit_code_for(e);
  }
  return 0;
}
