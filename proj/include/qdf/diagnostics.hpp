#pragma once

// Partial correlation of label steps given the history: regress each label
// step on [1, history] by OLS and correlate the residuals. Each step is
// regressed once and its residuals are shared by every pair.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qdf/data.hpp"
#include "qdf/errors.hpp"
#include "qdf/rng.hpp"

namespace qdf {

inline constexpr double kRidgeFallback = 1e-8;
inline constexpr double kMinResidualVariance = 1e-12;

struct PartialCorrReport {
  Eigen::MatrixXd matrix;    // T x T, unit diagonal
  Eigen::VectorXd cond_var;  // residual variance per label step
  Index history = 0;
  std::size_t samples = 0;
  Index variable = 0;
  bool degraded = false;  // ridge fallback was used
  std::vector<std::pair<Index, Index>> undefined_pairs;
};

struct RegressionSample {
  Eigen::MatrixXd design;  // n x (H + 1): intercept then the variable's own history
  Eigen::MatrixXd labels;  // n x T
};

inline RegressionSample regression_sample(const WindowSet& windows, Index variable) {
  require(variable >= 0 && variable < windows.variables(), ErrorKind::InvalidDimension,
          "variable index out of range");
  const auto n = static_cast<Index>(windows.size());
  RegressionSample s{Eigen::MatrixXd(n, windows.history() + 1),
                     Eigen::MatrixXd(n, windows.horizon())};
  for (Index i = 0; i < n; ++i) {
    const auto w = static_cast<std::size_t>(i);
    s.design(i, 0) = 1.0;
    s.design.row(i).tail(windows.history()) = windows.x(w).col(variable).transpose();
    s.labels.row(i) = windows.y(w).col(variable).transpose();
  }
  return s;
}

/// Residuals of every label column regressed on the design. Falls back to a
/// tiny ridge penalty when the design is rank deficient.
inline Eigen::MatrixXd ols_residuals(const Eigen::MatrixXd& design, const Eigen::MatrixXd& labels,
                                     bool& degraded) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::MatrixXd beta;
  if (qr.rank() < design.cols()) {
    degraded = true;
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += kRidgeFallback;
    beta = gram.ldlt().solve(design.transpose() * labels);
  } else {
    beta = qr.solve(labels);
  }
  return labels - design * beta;
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return std::clamp(ca.dot(cb) / denom, -1.0, 1.0);
}

namespace detail {

inline void check_sample_size(const WindowSet& windows) {
  require(static_cast<Index>(windows.size()) >= windows.history() + 3, ErrorKind::InsufficientData,
          "partial correlation needs at least H+3 windows, got " + std::to_string(windows.size()));
}

inline double residual_variance(const Eigen::VectorXd& r) {
  return (r.array() - r.mean()).square().mean();
}

}  // namespace detail

/// Partial correlation between label steps t and t2 (0-based) of `variable`.
inline double partial_correlation(const WindowSet& windows, Index t, Index t2, Index variable = 0) {
  detail::check_sample_size(windows);
  require(t != t2, ErrorKind::InvalidDimension, "partial correlation needs two distinct steps");
  require(t >= 0 && t2 >= 0 && t < windows.horizon() && t2 < windows.horizon(),
          ErrorKind::InvalidDimension, "label step out of range");
  const RegressionSample s = regression_sample(windows, variable);
  Eigen::MatrixXd pair(s.labels.rows(), 2);
  pair << s.labels.col(t), s.labels.col(t2);
  bool degraded = false;
  const Eigen::MatrixXd r = ols_residuals(s.design, pair, degraded);
  require(detail::residual_variance(r.col(0)) >= kMinResidualVariance &&
              detail::residual_variance(r.col(1)) >= kMinResidualVariance,
          ErrorKind::UndefinedCorrelation, "residual variance is numerically zero");
  return pearson(r.col(0), r.col(1));
}

inline PartialCorrReport partial_corr_matrix(const WindowSet& windows, Index variable = 0) {
  detail::check_sample_size(windows);
  const RegressionSample s = regression_sample(windows, variable);
  PartialCorrReport report;
  report.history = windows.history();
  report.samples = windows.size();
  report.variable = variable;
  const Eigen::MatrixXd r = ols_residuals(s.design, s.labels, report.degraded);

  const Index t = windows.horizon();
  report.cond_var.resize(t);
  for (Index i = 0; i < t; ++i) report.cond_var(i) = detail::residual_variance(r.col(i));
  report.matrix = Eigen::MatrixXd::Identity(t, t);
  for (Index i = 0; i < t; ++i)
    for (Index j = i + 1; j < t; ++j) {
      double rho = 0.0;
      if (report.cond_var(i) < kMinResidualVariance || report.cond_var(j) < kMinResidualVariance)
        report.undefined_pairs.emplace_back(i, j);
      else
        rho = pearson(r.col(i), r.col(j));
      report.matrix(i, j) = report.matrix(j, i) = rho;
    }
  return report;
}

/// Windows of (history, horizon) over `frame`, subsampled without replacement
/// to at most `subsample` windows (seeded), kept in chronological order.
inline PartialCorrReport partial_corr_matrix(const SeriesFrame& frame, Index history, Index horizon,
                                             std::size_t subsample, Index variable = 0,
                                             std::uint64_t seed = 0) {
  const WindowSet all = make_windows(frame, history, horizon);
  if (subsample >= all.size()) return partial_corr_matrix(all, variable);
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = make_stream(seed, "subsample");
  for (std::size_t i = 0; i < subsample; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(subsample);
  std::sort(idx.begin(), idx.end());
  return partial_corr_matrix(all.select(idx), variable);
}

/// Fraction of off-diagonal entries with |value| > threshold.
inline double fraction_above(const PartialCorrReport& report, double threshold) {
  const Index t = report.matrix.rows();
  if (t < 2) return 0.0;
  std::size_t above = 0;
  for (Index i = 0; i < t; ++i)
    for (Index j = 0; j < t; ++j)
      if (i != j && std::abs(report.matrix(i, j)) > threshold) ++above;
  return static_cast<double>(above) / static_cast<double>(t * (t - 1));
}

}  // namespace qdf
