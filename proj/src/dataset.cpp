#include "eegraph/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eegraph/audit.hpp"
#include "eegraph/errors.hpp"
#include "eegraph/rng.hpp"

namespace eegraph {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

template <typename T>
void write_array(const fs::path& file, std::span<const T> values) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::io, "cannot open for writing: " + file.string());
  std::vector<T> buffer(values.begin(), values.end());
  for (auto& v : buffer) v = to_little(v);
  out.write(reinterpret_cast<const char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(T)));
  if (!out) throw DataError(DataErrorKind::io, "write failed: " + file.string());
}

template <typename T>
std::vector<T> read_array(const fs::path& file, std::size_t expected_count) {
  if (!fs::exists(file)) throw DataError(DataErrorKind::missing_file, "missing file: " + file.string());
  const auto bytes = fs::file_size(file);
  if (bytes != expected_count * sizeof(T)) {
    std::ostringstream msg;
    msg << file.string() << ": expected " << expected_count * sizeof(T) << " bytes, found "
        << bytes;
    throw DataError(DataErrorKind::size_mismatch, msg.str());
  }
  std::vector<T> values(expected_count);
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::io, "cannot open: " + file.string());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw DataError(DataErrorKind::io, "read failed: " + file.string());
  for (auto& v : values) v = to_little(v);
  return values;
}

std::size_t meta_size(const json& meta, const char* key) {
  if (!meta.contains(key) || !meta[key].is_number_integer() || meta[key].get<long long>() < 0) {
    throw DataError(DataErrorKind::malformed, std::string("meta.json: missing or invalid '") + key + "'");
  }
  return meta[key].get<std::size_t>();
}

}  // namespace

ValidationReport validate_dataset(const Dataset& ds) {
  ValidationReport report;
  auto& issues = report.issues;
  if (ds.n_classes <= 0) issues.push_back("n_classes must be positive");
  if (ds.n_nodes == 0) issues.push_back("n_nodes must be positive");
  if (ds.n_features == 0) issues.push_back("n_features must be positive");
  if (ds.features.size() != ds.n_samples * ds.n_nodes * ds.n_features) {
    issues.push_back("features length " + std::to_string(ds.features.size()) +
                     " does not match n_samples*n_nodes*n_features");
  }
  if (ds.labels.size() != ds.n_samples) issues.push_back("labels length does not match n_samples");
  if (ds.subjects.size() != ds.n_samples) issues.push_back("subjects length does not match n_samples");
  if (!ds.band_names.empty() && ds.band_names.size() != ds.n_features) {
    issues.push_back("band_names length does not match n_features");
  }
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.n_classes) {
      issues.push_back("sample " + std::to_string(i) + ": label " + std::to_string(ds.labels[i]) +
                       " outside [0, " + std::to_string(ds.n_classes) + ")");
    }
  }
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
    if (ds.subjects[i] < 0) {
      issues.push_back("sample " + std::to_string(i) + ": negative subject id " +
                       std::to_string(ds.subjects[i]));
    }
  }
  const std::size_t stride = ds.n_nodes * ds.n_features;
  for (std::size_t k = 0; k < ds.features.size(); ++k) {
    if (!std::isfinite(ds.features[k])) {
      const std::size_t sample = stride ? k / stride : 0;
      issues.push_back("sample " + std::to_string(sample) + ": non-finite feature at node " +
                       std::to_string(stride ? (k % stride) / ds.n_features : 0) + ", feature " +
                       std::to_string(ds.n_features ? k % ds.n_features : 0));
    }
  }
  return report;
}

void require_valid(const Dataset& ds) {
  const auto report = validate_dataset(ds);
  if (report.ok()) return;
  std::string msg = "invalid dataset:";
  const std::size_t shown = std::min<std::size_t>(report.issues.size(), 5);
  for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + report.issues[i];
  if (report.issues.size() > shown) {
    msg += "\n  (" + std::to_string(report.issues.size() - shown) + " more)";
  }
  throw ValidationError(msg);
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  require_valid(ds);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(DataErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());

  json meta = {
      {"format_version", kFormatVersion},
      {"n_samples", ds.n_samples},
      {"n_nodes", ds.n_nodes},
      {"n_features", ds.n_features},
      {"n_classes", ds.n_classes},
      {"band_names", ds.band_names},
  };
  write_array<float>(dir / "features.bin", ds.features);
  write_array<std::int32_t>(dir / "labels.bin", ds.labels);
  write_array<std::int32_t>(dir / "subjects.bin", ds.subjects);

  const auto meta_path = dir / "meta.json";
  std::ofstream out(meta_path, std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::io, "cannot open for writing: " + meta_path.string());
  out << meta.dump(2) << '\n';
  if (!out) throw DataError(DataErrorKind::io, "write failed: " + meta_path.string());
}

Dataset load_dataset(const fs::path& dir) {
  const auto meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) {
    throw DataError(DataErrorKind::missing_file, "missing file: " + meta_path.string());
  }
  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(DataErrorKind::malformed, meta_path.string() + ": " + e.what());
  }
  if (!meta.contains("format_version") || meta["format_version"] != kFormatVersion) {
    throw DataError(DataErrorKind::bad_version,
                    meta_path.string() + ": unsupported format_version " +
                        (meta.contains("format_version") ? meta["format_version"].dump() : "(none)"));
  }

  Dataset ds;
  ds.n_samples = meta_size(meta, "n_samples");
  ds.n_nodes = meta_size(meta, "n_nodes");
  ds.n_features = meta_size(meta, "n_features");
  ds.n_classes = static_cast<int>(meta_size(meta, "n_classes"));
  if (meta.contains("band_names")) {
    try {
      ds.band_names = meta["band_names"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DataError(DataErrorKind::malformed, "meta.json: band_names: " + std::string(e.what()));
    }
  }

  ds.features = read_array<float>(dir / "features.bin", ds.n_samples * ds.n_nodes * ds.n_features);
  ds.labels = read_array<std::int32_t>(dir / "labels.bin", ds.n_samples);
  ds.subjects = read_array<std::int32_t>(dir / "subjects.bin", ds.n_samples);

  for (std::size_t k = 0; k < ds.features.size(); ++k) {
    if (!std::isfinite(ds.features[k])) {
      throw DataError(DataErrorKind::non_finite,
                      "features.bin: non-finite value in sample " +
                          std::to_string(k / std::max<std::size_t>(1, ds.sample_stride())));
    }
  }
  for (std::size_t i = 0; i < ds.n_samples; ++i) {
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.n_classes) {
      throw DataError(DataErrorKind::label_range,
                      "labels.bin: sample " + std::to_string(i) + " has label " +
                          std::to_string(ds.labels[i]) + " but n_classes=" + std::to_string(ds.n_classes));
    }
    if (ds.subjects[i] < 0) {
      throw DataError(DataErrorKind::subject_range,
                      "subjects.bin: sample " + std::to_string(i) + " has negative subject id");
    }
  }
  const auto report = validate_dataset(ds);
  if (!report.ok()) throw DataError(DataErrorKind::malformed, report.issues.front());
  return ds;
}

Dataset load_features_csv(const fs::path& file, std::size_t n_nodes, std::size_t n_features,
                          int n_classes) {
  if (n_nodes * n_features > 1024) {
    throw ValidationError("CSV input is limited to n_nodes*n_features <= 1024");
  }
  std::ifstream in(file);
  if (!in) throw DataError(DataErrorKind::missing_file, "missing file: " + file.string());
  Dataset ds;
  ds.n_nodes = n_nodes;
  ds.n_features = n_features;
  ds.n_classes = n_classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DataError(DataErrorKind::malformed,
                        file.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
    }
    if (cells.size() != 2 + n_nodes * n_features) {
      throw DataError(DataErrorKind::size_mismatch,
                      file.string() + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(2 + n_nodes * n_features) + " columns");
    }
    ds.labels.push_back(static_cast<std::int32_t>(cells[0]));
    ds.subjects.push_back(static_cast<std::int32_t>(cells[1]));
    for (std::size_t k = 2; k < cells.size(); ++k) ds.features.push_back(static_cast<float>(cells[k]));
    ++ds.n_samples;
  }
  require_valid(ds);
  return ds;
}

Dataset synth_generate(const SynthSpec& spec) {
  if (spec.n_subjects <= 0 || spec.samples_per_subject <= 0 || spec.n_nodes <= 0 ||
      spec.n_features <= 0 || spec.n_classes <= 0) {
    throw ValidationError("synth: n_subjects, samples_per_subject, n_nodes, n_features and n_classes must be positive");
  }
  if (!(spec.noise_std > 0.0)) throw ValidationError("synth: noise_std must be positive");
  if (!(spec.class_separation >= 0.0) || !(spec.subject_shift >= 0.0)) {
    throw ValidationError("synth: class_separation and subject_shift must be nonnegative");
  }
  const std::size_t stride = static_cast<std::size_t>(spec.n_nodes) * spec.n_features;
  if (static_cast<std::size_t>(spec.n_classes) > stride) {
    throw ValidationError("synth: n_classes exceeds n_nodes*n_features (one corner per class)");
  }

  Dataset ds;
  ds.n_nodes = static_cast<std::size_t>(spec.n_nodes);
  ds.n_features = static_cast<std::size_t>(spec.n_features);
  ds.n_classes = spec.n_classes;
  ds.n_samples = static_cast<std::size_t>(spec.n_subjects) * spec.samples_per_subject;
  ds.features.reserve(ds.n_samples * stride);
  ds.labels.reserve(ds.n_samples);
  ds.subjects.reserve(ds.n_samples);

  Rng rng(spec.seed);
  // Class c sits at class_separation * e_c, e_c the c-th one-hot corner.
  std::vector<std::vector<double>> offsets(spec.n_subjects, std::vector<double>(stride));
  for (auto& offset : offsets) {
    for (auto& v : offset) v = rng.normal(0.0, spec.subject_shift);
  }
  for (int s = 0; s < spec.n_subjects; ++s) {
    for (int k = 0; k < spec.samples_per_subject; ++k) {
      const int label = k % spec.n_classes;
      for (std::size_t j = 0; j < stride; ++j) {
        const double mean = (j == static_cast<std::size_t>(label)) ? spec.class_separation : 0.0;
        ds.features.push_back(static_cast<float>(mean + offsets[s][j] + rng.normal(0.0, spec.noise_std)));
      }
      ds.labels.push_back(label);
      ds.subjects.push_back(s);
    }
  }
  return ds;
}

std::vector<std::int32_t> distinct_subjects(std::span<const std::int32_t> subjects) {
  std::vector<std::int32_t> out(subjects.begin(), subjects.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DatasetView::DatasetView(const Dataset& ds, std::vector<std::size_t> indices, AccessTag tag,
                         AuditLog* log)
    : ds_(&ds), indices_(std::move(indices)), tag_(std::move(tag)), log_(log) {
  for (auto i : indices_) {
    if (i >= ds.n_samples) throw ValidationError("view index " + std::to_string(i) + " out of range");
  }
}

DatasetView DatasetView::all(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.n_samples);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return DatasetView(ds, std::move(idx));
}

Batch DatasetView::gather(std::span<const std::size_t> positions) const {
  Batch batch;
  batch.size = positions.size();
  batch.n_nodes = ds_->n_nodes;
  batch.features.resize(static_cast<Eigen::Index>(positions.size() * ds_->n_nodes),
                        static_cast<Eigen::Index>(ds_->n_features));
  batch.labels.reserve(positions.size());
  std::vector<std::size_t> touched;
  touched.reserve(positions.size());
  for (std::size_t b = 0; b < positions.size(); ++b) {
    const std::size_t idx = indices_.at(positions[b]);
    touched.push_back(idx);
    const auto x = ds_->sample(idx);
    for (std::size_t n = 0; n < ds_->n_nodes; ++n) {
      for (std::size_t f = 0; f < ds_->n_features; ++f) {
        batch.features(static_cast<Eigen::Index>(b * ds_->n_nodes + n), static_cast<Eigen::Index>(f)) =
            x[n * ds_->n_features + f];
      }
    }
    batch.labels.push_back(ds_->labels[idx]);
  }
  if (log_) log_->touch(tag_, touched);
  return batch;
}

Batch DatasetView::gather_all() const {
  std::vector<std::size_t> positions(indices_.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  return gather(positions);
}

DatasetView DatasetView::subview(std::vector<std::size_t> positions, AccessTag tag) const {
  std::vector<std::size_t> idx;
  idx.reserve(positions.size());
  for (auto p : positions) idx.push_back(indices_.at(p));
  return DatasetView(*ds_, std::move(idx), std::move(tag), log_);
}

DatasetView DatasetView::retag(AccessTag tag) const {
  return DatasetView(*ds_, indices_, std::move(tag), log_);
}

}  // namespace eegraph
