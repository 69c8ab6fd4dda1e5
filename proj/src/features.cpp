#include "eegraph/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "eegraph/errors.hpp"

namespace eegraph {

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;  // normalized so a0 == 1

  void run(std::vector<double>& x) const {
    double z1 = 0.0;
    double z2 = 0.0;
    for (auto& v : x) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
  }
};

// Q factors of the two second-order sections of a 4th-order Butterworth.
constexpr std::array<double, 2> kButterworthQ = {0.54119610014619698, 1.3065629648763766};

Biquad lowpass(double fs, double f0, double q) {
  const double w0 = 2.0 * std::numbers::pi * f0 / fs;
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
}

Biquad highpass(double fs, double f0, double q) {
  const double w0 = 2.0 * std::numbers::pi * f0 / fs;
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
}

double variance(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size() - 1);
}

void check_bands(const std::vector<BandDef>& bands, double fs_hz) {
  if (bands.empty()) throw ConfigError("extract_de: no frequency bands given");
  for (const auto& b : bands) {
    if (!(b.lo_hz > 0.0) || !(b.lo_hz < b.hi_hz)) {
      throw ConfigError("band '" + b.name + "': need 0 < lo_hz < hi_hz");
    }
    if (!(b.hi_hz < fs_hz / 2.0)) {
      std::ostringstream msg;
      msg << "band '" << b.name << "': hi_hz " << b.hi_hz << " is not below the Nyquist frequency "
          << fs_hz / 2.0;
      throw ConfigError(msg.str());
    }
  }
}

}  // namespace

std::vector<BandDef> default_bands() {
  return {{"delta", 1.0, 4.0}, {"theta", 4.0, 8.0}, {"alpha", 8.0, 14.0}, {"beta", 14.0, 30.0}, {"gamma", 30.0, 47.0}};
}

double differential_entropy(std::span<const double> window) {
  if (window.size() < 2) throw ValidationError("differential_entropy: window needs at least 2 samples");
  const double var = std::max(variance(window), kVarianceFloor);
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * var);
}

std::vector<double> bandpass_zero_phase(std::span<const double> signal, double fs_hz, double lo_hz,
                                        double hi_hz) {
  const std::size_t n = signal.size();
  if (n < 2) return {signal.begin(), signal.end()};

  std::vector<Biquad> sections;
  for (double q : kButterworthQ) sections.push_back(highpass(fs_hz, lo_hz, q));
  for (double q : kButterworthQ) sections.push_back(lowpass(fs_hz, hi_hz, q));

  // Odd reflection about the end points damps start-up transients.
  const auto pad = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(3.0 * fs_hz / lo_hz)));
  std::vector<double> x;
  x.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) x.push_back(2.0 * signal[0] - signal[i]);
  x.insert(x.end(), signal.begin(), signal.end());
  for (std::size_t i = 1; i <= pad; ++i) x.push_back(2.0 * signal[n - 1] - signal[n - 1 - i]);

  for (const auto& s : sections) s.run(x);
  std::reverse(x.begin(), x.end());
  for (const auto& s : sections) s.run(x);
  std::reverse(x.begin(), x.end());

  return {x.begin() + static_cast<std::ptrdiff_t>(pad), x.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

FeatureTensor extract_de(const RawRecording& rec, const std::vector<BandDef>& bands, double window_sec) {
  if (!(rec.fs_hz > 0.0)) throw ValidationError("extract_de: sampling rate must be positive");
  if (!(window_sec > 0.0)) throw ValidationError("extract_de: window length must be positive");
  if (!rec.signal.allFinite()) throw ValidationError("extract_de: recording contains non-finite values");
  check_bands(bands, rec.fs_hz);

  const auto window_len = static_cast<std::size_t>(std::floor(rec.fs_hz * window_sec));
  if (window_len < 2) throw ValidationError("extract_de: window shorter than 2 samples");
  const auto n_steps = static_cast<std::size_t>(rec.signal.cols());

  FeatureTensor out;
  out.n_windows = static_cast<std::size_t>(std::floor(static_cast<double>(n_steps) / (rec.fs_hz * window_sec)));
  out.n_channels = static_cast<std::size_t>(rec.signal.rows());
  out.n_bands = bands.size();
  if (out.n_windows == 0) throw ValidationError("extract_de: recording shorter than one window");
  out.values.assign(out.n_windows * out.n_channels * out.n_bands, 0.0);

  std::vector<double> channel(n_steps);
  for (std::size_t c = 0; c < out.n_channels; ++c) {
    for (std::size_t t = 0; t < n_steps; ++t) channel[t] = rec.signal(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t));
    for (std::size_t b = 0; b < bands.size(); ++b) {
      const auto filtered = bandpass_zero_phase(channel, rec.fs_hz, bands[b].lo_hz, bands[b].hi_hz);
      for (std::size_t w = 0; w < out.n_windows; ++w) {
        const std::span<const double> window(filtered.data() + w * window_len, window_len);
        out.at(w, c, b) = differential_entropy(window);
      }
    }
  }
  return out;
}

std::vector<double> lds_smooth(std::span<const double> series, double q, double r) {
  if (!(q > 0.0) || !(r > 0.0)) throw ValidationError("lds_smooth: q and r must be positive");
  if (series.empty()) throw ValidationError("lds_smooth: empty series");
  for (double v : series) {
    if (!std::isfinite(v)) throw ValidationError("lds_smooth: non-finite input");
  }
  const std::size_t n = series.size();
  std::vector<double> mean(n);
  std::vector<double> var(n);

  double m_pred = series[0];
  double p_pred = r;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      m_pred = mean[t - 1];
      p_pred = var[t - 1] + q;
    }
    const double gain = p_pred / (p_pred + r);
    mean[t] = m_pred + gain * (series[t] - m_pred);
    var[t] = (1.0 - gain) * p_pred;
  }

  std::vector<double> smoothed(n);
  smoothed[n - 1] = mean[n - 1];
  for (std::size_t t = n - 1; t-- > 0;) {
    const double c = var[t] / (var[t] + q);
    smoothed[t] = mean[t] + c * (smoothed[t + 1] - mean[t]);
  }
  return smoothed;
}

void lds_smooth_features(FeatureTensor& features, double q_scale) {
  if (features.n_windows < 2) return;
  std::vector<double> series(features.n_windows);
  for (std::size_t c = 0; c < features.n_channels; ++c) {
    for (std::size_t b = 0; b < features.n_bands; ++b) {
      for (std::size_t w = 0; w < features.n_windows; ++w) series[w] = features.at(w, c, b);
      const double v = variance(series);
      if (!(v > kVarianceFloor)) continue;
      const auto smoothed = lds_smooth(series, q_scale * v, v);
      for (std::size_t w = 0; w < features.n_windows; ++w) features.at(w, c, b) = smoothed[w];
    }
  }
}

Dataset features_to_dataset(const FeatureTensor& features, const std::vector<BandDef>& bands,
                            int label, int subject, int n_classes) {
  Dataset ds;
  ds.n_samples = features.n_windows;
  ds.n_nodes = features.n_channels;
  ds.n_features = features.n_bands;
  ds.n_classes = n_classes;
  for (const auto& b : bands) ds.band_names.push_back(b.name);
  ds.features.reserve(features.values.size());
  for (double v : features.values) ds.features.push_back(static_cast<float>(v));
  ds.labels.assign(ds.n_samples, label);
  ds.subjects.assign(ds.n_samples, subject);
  require_valid(ds);
  return ds;
}

RawRecording load_recording_csv(const std::string& path, double fs_hz) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::missing_file, "missing file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DataError(DataErrorKind::malformed, path + ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(DataErrorKind::malformed, path + ": ragged row " + std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(DataErrorKind::malformed, path + ": no samples");
  RawRecording rec;
  rec.fs_hz = fs_hz;
  rec.signal.resize(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t c = 0; c < rows[t].size(); ++c) {
      rec.signal(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = rows[t][c];
    }
  }
  return rec;
}

}  // namespace eegraph
