#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eegraph/dataset.hpp"

namespace eegraph {

struct BandDef {
  std::string name;
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

/// delta 1-4, theta 4-8, alpha 8-14, beta 14-30, gamma 30-47 Hz.
std::vector<BandDef> default_bands();

struct RawRecording {
  Eigen::MatrixXd signal;  // [n_channels x n_timesteps]
  double fs_hz = 0.0;
};

/// Dense [n_windows x n_channels x n_bands] tensor.
struct FeatureTensor {
  std::size_t n_windows = 0;
  std::size_t n_channels = 0;
  std::size_t n_bands = 0;
  std::vector<double> values;

  double& at(std::size_t w, std::size_t c, std::size_t b) {
    return values[(w * n_channels + c) * n_bands + b];
  }
  double at(std::size_t w, std::size_t c, std::size_t b) const {
    return values[(w * n_channels + c) * n_bands + b];
  }
};

/// Variances below this are clamped before taking the log.
inline constexpr double kVarianceFloor = 1e-12;

/// Gaussian differential entropy 0.5*ln(2*pi*e*var), var the unbiased sample
/// variance of the window.
double differential_entropy(std::span<const double> window);

/// Zero-phase band-pass: 4th-order Butterworth high-pass at lo and low-pass at
/// hi, run forward then backward over an odd-reflected signal.
std::vector<double> bandpass_zero_phase(std::span<const double> signal, double fs_hz, double lo_hz,
                                        double hi_hz);

FeatureTensor extract_de(const RawRecording& rec, const std::vector<BandDef>& bands,
                         double window_sec = 1.0);

/// Fixed-interval (Rauch-Tung-Striebel) smoother for the random walk
/// x_t = x_{t-1} + w, y_t = x_t + v with Var(w) = q, Var(v) = r. The first state
/// has prior N(y_0, r).
std::vector<double> lds_smooth(std::span<const double> series, double q, double r);

/// Smooths every (channel, band) series across windows, using
/// q = q_scale * var(series), r = var(series). Constant series are left as is.
void lds_smooth_features(FeatureTensor& features, double q_scale = 0.01);

/// Wraps a feature tensor as a Dataset with one sample per window.
Dataset features_to_dataset(const FeatureTensor& features, const std::vector<BandDef>& bands,
                            int label, int subject, int n_classes);

/// Reads a CSV recording: one row per timestep, one column per channel.
RawRecording load_recording_csv(const std::string& path, double fs_hz);

}  // namespace eegraph
