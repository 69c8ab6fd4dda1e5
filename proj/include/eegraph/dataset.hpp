#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace eegraph {

/// Sample-major feature tensor [n_samples x n_nodes x n_features] with a
/// class label and subject id per sample.
struct Dataset {
  std::size_t n_samples = 0;
  std::size_t n_nodes = 0;
  std::size_t n_features = 0;
  int n_classes = 0;
  std::vector<float> features;  // row-major sample -> node -> feature
  std::vector<std::int32_t> labels;
  std::vector<std::int32_t> subjects;
  std::vector<std::string> band_names;  // empty or length n_features

  std::size_t sample_stride() const { return n_nodes * n_features; }

  std::span<const float> sample(std::size_t i) const {
    return std::span<const float>(features).subspan(i * sample_stride(), sample_stride());
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SynthSpec {
  int n_subjects = 8;
  int samples_per_subject = 50;
  int n_nodes = 30;
  int n_features = 5;
  int n_classes = 2;
  double class_separation = 3.0;
  double subject_shift = 0.0;
  double noise_std = 0.5;
  std::uint64_t seed = 0;
};

/// One entry per invariant violation. Empty means valid.
struct ValidationReport {
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
};

ValidationReport validate_dataset(const Dataset& ds);

/// Throws ValidationError listing the first violations when `ds` is invalid.
void require_valid(const Dataset& ds);

/// Writes meta.json, features.bin, labels.bin, subjects.bin.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

Dataset load_dataset(const std::filesystem::path& dir);

/// Reads a CSV of features, one sample per line with n_nodes*n_features
/// values, plus a label and subject column at the front. Only accepted when
/// n_nodes*n_features <= 1024.
Dataset load_features_csv(const std::filesystem::path& file, std::size_t n_nodes,
                          std::size_t n_features, int n_classes);

Dataset synth_generate(const SynthSpec& spec);

/// Subject ids in ascending order, without duplicates.
std::vector<std::int32_t> distinct_subjects(std::span<const std::int32_t> subjects);

/// A mini-batch laid out for graph propagation: node rows of every sample are
/// stacked, giving a [batch*n_nodes x n_features] matrix.
struct Batch {
  std::size_t size = 0;
  std::size_t n_nodes = 0;
  Eigen::MatrixXd features;
  std::vector<int> labels;
  /// Optional raw time series, [batch*n_nodes x n_steps]. Empty when absent.
  Eigen::MatrixXd temporal;
};

class AuditLog;

/// Tag attached to every data access made through a view.
struct AccessTag {
  std::string phase;  // e.g. "train", "val", "inner_train", "final_train", "test"
  int outer_fold = -1;
  int inner_fold = -1;
  int grid_point = -1;
};

/// Read-only window onto a Dataset. Every gather is reported to the audit
/// log, when one is attached.
class DatasetView {
 public:
  DatasetView(const Dataset& ds, std::vector<std::size_t> indices, AccessTag tag = {},
              AuditLog* log = nullptr);

  /// View over every sample.
  static DatasetView all(const Dataset& ds);

  const Dataset& dataset() const { return *ds_; }
  std::span<const std::size_t> indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  const AccessTag& tag() const { return tag_; }

  /// Sample index in the underlying dataset at position `pos`.
  std::size_t at(std::size_t pos) const { return indices_[pos]; }

  /// Builds a batch from view positions (not dataset indices).
  Batch gather(std::span<const std::size_t> positions) const;
  Batch gather_all() const;

  /// Labels and subjects are metadata used for splitting; reading them is not
  /// logged as a feature access.
  std::int32_t label(std::size_t pos) const { return ds_->labels[indices_[pos]]; }
  std::int32_t subject(std::size_t pos) const { return ds_->subjects[indices_[pos]]; }

  DatasetView subview(std::vector<std::size_t> positions, AccessTag tag) const;
  DatasetView retag(AccessTag tag) const;

 private:
  const Dataset* ds_;
  std::vector<std::size_t> indices_;
  AccessTag tag_;
  AuditLog* log_;
};

}  // namespace eegraph
