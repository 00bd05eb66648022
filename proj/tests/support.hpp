#pragma once

// Shared fixtures for the test suites: random instances and central
// finite-difference oracles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "qdf/data.hpp"
#include "qdf/weighting.hpp"

namespace qdf::testing {

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                      double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

inline Eigen::MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

/// Well-conditioned random weighting: diagonal of L in roughly [0.7, 1.6],
/// strictly-lower entries in [-spread, spread].
inline WeightingParams random_params(std::mt19937_64& rng, Eigen::Index t,
                                     WeightingMode mode = WeightingMode::Full,
                                     double spread = 0.5) {
  Eigen::MatrixXd raw = uniform_matrix(rng, t, t, -spread, spread);
  std::uniform_real_distribution<double> diag(0.7, 1.6);
  for (Eigen::Index i = 0; i < t; ++i) raw(i, i) = softplus_inverse(diag(rng));
  return WeightingParams(raw, mode);
}

/// Central differences of f over every entry of `at` (or only the
/// lower-triangular ones when `lower_only`).
inline Eigen::MatrixXd central_difference(const std::function<double(const Eigen::MatrixXd&)>& f,
                                          const Eigen::MatrixXd& at, double step,
                                          bool lower_only = false) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(at.rows(), at.cols());
  for (Eigen::Index j = 0; j < at.cols(); ++j)
    for (Eigen::Index i = 0; i < at.rows(); ++i) {
      if (lower_only && j > i) continue;
      Eigen::MatrixXd plus = at, minus = at;
      plus(i, j) += step;
      minus(i, j) -= step;
      grad(i, j) = (f(plus) - f(minus)) / (2.0 * step);
    }
  return grad;
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

/// Largest per-entry relative error over entries whose magnitude exceeds
/// `floor` in either matrix.
inline double max_entry_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                       double floor) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double scale = std::max(std::abs(a(i, j)), std::abs(b(i, j)));
      if (scale > floor) worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  return worst;
}

inline SeriesFrame frame_of(Eigen::MatrixXd values, std::string source = "test") {
  SeriesFrame f;
  f.names.reserve(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index j = 0; j < values.cols(); ++j) f.names.push_back("v" + std::to_string(j));
  f.values = std::move(values);
  f.source = std::move(source);
  return f;
}

inline SeriesFrame ramp_frame(Eigen::Index n) {
  return frame_of(Eigen::VectorXd::LinSpaced(n, 1.0, static_cast<double>(n)));
}

}  // namespace qdf::testing
