#pragma once

// Reference computations written independently of the library code paths
// they check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Central finite differences of f with respect to every entry of x.
inline Eigen::MatrixXd fd_gradient(const std::function<double()>& f, Eigen::MatrixXd& x, double h = 1e-6) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double keep = x(r, c);
      x(r, c) = keep + h;
      const double up = f();
      x(r, c) = keep - h;
      const double down = f();
      x(r, c) = keep;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// ||a - b|| / max(||a|| + ||b||, floor).
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-6) {
  return (a - b).norm() / std::max(a.norm() + b.norm(), floor);
}

/// Ideal band-pass by zeroing DFT bins outside [lo, hi] Hz.
inline std::vector<double> dft_bandpass(const std::vector<double>& x, double fs, double lo, double hi) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> spec(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k) * double(t) / double(n));
    }
    const double f = std::min(k, n - k) * fs / double(n);
    spec[k] = (f >= lo && f <= hi) ? acc : 0.0;
  }
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += spec[k] * std::polar(1.0, 2.0 * std::numbers::pi * double(k) * double(t) / double(n));
    }
    y[t] = acc.real() / double(n);
  }
  return y;
}

/// 0.5*ln(2*pi*e*var), var the unbiased variance from a two-pass sum.
inline double gaussian_de(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = std::max(ss / double(x.size() - 1), 1e-12);
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * var);
}

/// Posterior mean of the random-walk model as the solution of its dense
/// normal equations:
///   min (x0-y0)^2/r + sum_t (y_t-x_t)^2/r + sum_t (x_t-x_{t-1})^2/q.
inline std::vector<double> lds_least_squares(const std::vector<double>& y, double q, double r) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    h(t, t) += 1.0 / r;
    b(t) = y[t] / r;
  }
  h(0, 0) += 1.0 / r;
  b(0) += y[0] / r;
  for (Eigen::Index t = 1; t < n; ++t) {
    h(t, t) += 1.0 / q;
    h(t - 1, t - 1) += 1.0 / q;
    h(t, t - 1) -= 1.0 / q;
    h(t - 1, t) -= 1.0 / q;
  }
  const Eigen::VectorXd x = h.ldlt().solve(b);
  return std::vector<double>(x.data(), x.data() + n);
}

/// Nearest-centroid classifier accuracy on held-out rows.
inline double nearest_centroid_accuracy(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                                        const Eigen::MatrixXd& test_x, const std::vector<int>& test_y,
                                        int n_classes) {
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(n_classes, train_x.cols());
  std::vector<double> counts(n_classes, 0.0);
  for (Eigen::Index i = 0; i < train_x.rows(); ++i) {
    centroids.row(train_y[i]) += train_x.row(i);
    counts[train_y[i]] += 1.0;
  }
  for (int c = 0; c < n_classes; ++c) centroids.row(c) /= std::max(counts[c], 1.0);
  int hits = 0;
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    int best = 0;
    double best_d = (test_x.row(i) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < n_classes; ++c) {
      const double d = (test_x.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best = c;
        best_d = d;
      }
    }
    hits += best == test_y[i] ? 1 : 0;
  }
  return double(hits) / double(test_x.rows());
}

}  // namespace oracle
