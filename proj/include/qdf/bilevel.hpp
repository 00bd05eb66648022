#pragma once

// Atomic bilevel update: N plain gradient steps on the forecaster over the
// inner split, then one step on the weighting parameters driven by the outer
// split loss. The outer gradient flows only through the trained parameters;
// the Sigma that appears directly in the outer loss is held constant.
//
// For the linear forecaster with augmented input x~ = [x; 1] and stacked
// parameters Theta = [W b], one inner step reads
//
//   Theta_{k+1} = Theta_k + 2 a P (C_yx - Theta_k C_xx),   P = Sigma^{-1},
//
// with C_xx, C_yx the inner second moments, so the unrolled trajectory is
// differentiated exactly by a reverse sweep over the stored Theta_k.

#include <Eigen/Dense>

#include <chrono>
#include <cstddef>
#include <optional>
#include <vector>

#include "qdf/data.hpp"
#include "qdf/errors.hpp"
#include "qdf/model.hpp"
#include "qdf/objective.hpp"
#include "qdf/weighting.hpp"

namespace qdf {

/// Chronologically ordered, disjoint inner/outer window sets.
class SplitPair {
 public:
  SplitPair(WindowSet inner, WindowSet outer) : inner_(std::move(inner)), outer_(std::move(outer)) {
    require(!inner_.empty() && !outer_.empty(), ErrorKind::InvalidSplit,
            "inner and outer splits must be nonempty");
    require(inner_.history() == outer_.history() && inner_.horizon() == outer_.horizon(),
            ErrorKind::InvalidSplit, "inner and outer splits disagree on H or T");
    require(inner_.start(inner_.size() - 1) < outer_.start(0), ErrorKind::InvalidSplit,
            "inner windows must all precede outer windows (no shared windows)");
  }

  /// Chronological 50/50 split of one window set.
  static SplitPair halves(const WindowSet& windows) {
    require(windows.size() >= 2, ErrorKind::InvalidSplit,
            "need at least two windows to form an inner/outer split");
    const std::size_t mid = windows.size() / 2;
    return {windows.slice(0, mid), windows.slice(mid, windows.size())};
  }

  const WindowSet& inner() const { return inner_; }
  const WindowSet& outer() const { return outer_; }

 private:
  WindowSet inner_;
  WindowSet outer_;
};

struct AtomicConfig {
  std::size_t inner_steps = 1;
  double inner_lr = 0.01;
  double eta = 0.0;
  bool normalize = true;

  void validate() const {
    require(inner_steps >= 1, ErrorKind::Usage, "inner_steps must be >= 1");
    require(inner_lr > 0.0 && std::isfinite(inner_lr), ErrorKind::Usage, "inner_lr must be > 0");
    require(eta >= 0.0 && std::isfinite(eta), ErrorKind::Usage, "eta must be >= 0");
  }
};

/// Wall-clock per phase, in milliseconds, with the number of timed steps.
struct PhaseTimings {
  double inner_fwd_ms = 0.0;
  double inner_bwd_ms = 0.0;
  double outer_fwd_ms = 0.0;
  double outer_bwd_ms = 0.0;
  std::size_t inner_steps = 0;
  std::size_t outer_steps = 0;

  PhaseTimings& operator+=(const PhaseTimings& o) {
    inner_fwd_ms += o.inner_fwd_ms;
    inner_bwd_ms += o.inner_bwd_ms;
    outer_fwd_ms += o.outer_fwd_ms;
    outer_bwd_ms += o.outer_bwd_ms;
    inner_steps += o.inner_steps;
    outer_steps += o.outer_steps;
    return *this;
  }
};

struct AtomicResult {
  WeightingParams weighting;
  LinearForecaster model;
  Eigen::MatrixXd hypergradient;  // over raw entries; zero when eta == 0
  double outer_loss = 0.0;
  PhaseTimings timings;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline Eigen::MatrixXd stacked_theta(const LinearForecaster& m) {
  Eigen::MatrixXd theta(m.horizon(), m.history() + 1);
  theta << m.weights(), m.bias();
  return theta;
}

inline Eigen::MatrixXd augment(const Eigen::MatrixXd& x_rows) {
  Eigen::MatrixXd out(x_rows.rows(), x_rows.cols() + 1);
  out << x_rows, Eigen::VectorXd::Ones(x_rows.rows());
  return out;
}

/// One plain-GD inner step under the quadratic objective.
inline LinearForecaster inner_step(const LinearForecaster& model, const StackedRows& rows,
                                   const Materialized& m, double lr, PhaseTimings& timings) {
  Stopwatch fwd;
  const ResidualBatch residuals(rows.y - model.forecast_rows(rows.x));
  [[maybe_unused]] const double loss = quadratic_loss(residuals, m);
  timings.inner_fwd_ms += fwd.elapsed_ms();

  Stopwatch bwd;
  const Eigen::MatrixXd upstream = -grad_wrt_residual(residuals, m);
  LinearForecaster next = sgd_step(model, grad_params_rows(model, rows.x, upstream), lr);
  timings.inner_bwd_ms += bwd.elapsed_ms();
  ++timings.inner_steps;
  return next;
}

struct Unrolled {
  LinearForecaster model;
  std::optional<Eigen::MatrixXd> hypergradient;
  double outer_loss = 0.0;
};

inline Unrolled unroll(const LinearForecaster& theta0, const WeightingParams& w,
                       const StackedRows& inner, const StackedRows& outer,
                       const AtomicConfig& cfg, bool want_hypergradient, PhaseTimings& timings) {
  cfg.validate();
  require(theta0.horizon() == static_cast<Eigen::Index>(w.horizon()) &&
              inner.y.cols() == theta0.horizon() && outer.y.cols() == theta0.horizon() &&
              inner.x.cols() == theta0.history() && outer.x.cols() == theta0.history(),
          ErrorKind::InvalidDimension, "model, weighting and splits disagree on H or T");
  const Materialized m = materialize(w);
  require_conditioned(m);

  std::vector<Eigen::MatrixXd> trajectory;
  trajectory.reserve(cfg.inner_steps);
  LinearForecaster model = theta0;
  for (std::size_t k = 0; k < cfg.inner_steps; ++k) {
    if (want_hypergradient) trajectory.push_back(stacked_theta(model));
    model = inner_step(model, inner, m, cfg.inner_lr, timings);
  }

  Stopwatch fwd;
  const ResidualBatch outer_residuals(outer.y - model.forecast_rows(outer.x));
  Unrolled out{model, std::nullopt, quadratic_loss(outer_residuals, m)};
  timings.outer_fwd_ms += fwd.elapsed_ms();
  ++timings.outer_steps;
  if (!want_hypergradient) return out;

  Stopwatch bwd;
  // Adjoint of Theta_N under the outer loss with Sigma frozen.
  const Eigen::MatrixXd upstream = -grad_wrt_residual(outer_residuals, m);
  const ForecasterGrad g = grad_params_rows(model, outer.x, upstream);
  Eigen::MatrixXd adjoint(g.d_weights.rows(), g.d_weights.cols() + 1);
  adjoint << g.d_weights, g.d_bias;

  const Eigen::MatrixXd xa = augment(inner.x);
  const double rows = static_cast<double>(inner.x.rows());
  const Eigen::MatrixXd c_xx = (xa.transpose() * xa) / rows;
  const Eigen::MatrixXd c_yx = (inner.y.transpose() * xa) / rows;
  const Eigen::MatrixXd p = precision(m);
  const double two_lr = 2.0 * cfg.inner_lr;

  Eigen::MatrixXd grad_p = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  for (std::size_t k = cfg.inner_steps; k-- > 0;) {
    const Eigen::MatrixXd residual_moment = c_yx - trajectory[k] * c_xx;
    grad_p.noalias() += two_lr * adjoint * residual_moment.transpose();
    adjoint -= two_lr * (p * adjoint * c_xx);
  }
  const Eigen::MatrixXd grad_sigma = -p * grad_p * p;
  out.hypergradient = raw_gradient_from_factor(factor_gradient_from_sigma(grad_sigma, m.factor), w);
  timings.outer_bwd_ms += bwd.elapsed_ms();
  return out;
}

inline AtomicResult atomic_update_rows(const LinearForecaster& model, const WeightingParams& w,
                                       const StackedRows& inner, const StackedRows& outer,
                                       const AtomicConfig& cfg) {
  PhaseTimings timings;
  const bool learn = cfg.eta > 0.0;
  Unrolled u = unroll(model, w, inner, outer, cfg, learn, timings);
  if (!learn) {
    const auto t = static_cast<Eigen::Index>(w.horizon());
    return {w, std::move(u.model), Eigen::MatrixXd::Zero(t, t), u.outer_loss, timings};
  }
  WeightingParams next = apply_gradient(w, *u.hypergradient, cfg.eta);
  if (cfg.normalize) next = normalize_scale(next);
  return {std::move(next), std::move(u.model), std::move(*u.hypergradient), u.outer_loss, timings};
}

}  // namespace detail

/// d[outer loss at Theta_N(w)]/d(raw w), Sigma in the outer loss frozen.
inline Eigen::MatrixXd hypergradient(const LinearForecaster& theta0, const WeightingParams& w,
                                     const SplitPair& split, const AtomicConfig& cfg) {
  PhaseTimings timings;
  return *detail::unroll(theta0, w, split.inner().stack(), split.outer().stack(), cfg, true,
                         timings)
              .hypergradient;
}

/// N inner steps on the forecaster, then w <- w - eta * hypergradient,
/// followed by scale normalization when enabled. eta == 0 returns w untouched.
inline AtomicResult atomic_update(const LinearForecaster& model, const WeightingParams& w,
                                  const SplitPair& split, const AtomicConfig& cfg) {
  return detail::atomic_update_rows(model, w, split.inner().stack(), split.outer().stack(), cfg);
}

}  // namespace qdf
