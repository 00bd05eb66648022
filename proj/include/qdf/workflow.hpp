#pragma once

// End-to-end procedure: learn the weighting matrix on chronological subsets
// of the training windows, then train the forecaster under the learned
// quadratic objective with mini-batch Adam and early stopping.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "qdf/bilevel.hpp"
#include "qdf/data.hpp"
#include "qdf/errors.hpp"
#include "qdf/model.hpp"
#include "qdf/objective.hpp"
#include "qdf/rng.hpp"
#include "qdf/weighting.hpp"

namespace qdf {

struct QdfConfig {
  std::size_t k_splits = 3;
  std::size_t outer_rounds = 10;
  std::size_t inner_steps = 1;
  double inner_lr = 0.01;
  double eta = 0.1;
  double tol = 1e-4;
  double final_lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t patience = 3;
  double valid_fraction = 0.2;  // used only when no validation set is given
  WeightingMode mode = WeightingMode::Full;
  bool normalize = true;
  bool reset_theta = false;
  std::uint64_t seed = 0;

  AtomicConfig atomic() const { return {inner_steps, inner_lr, eta, normalize}; }

  void validate() const {
    atomic().validate();
    require(k_splits >= 1, ErrorKind::Usage, "k_splits must be >= 1");
    require(outer_rounds >= 1, ErrorKind::Usage, "outer_rounds must be >= 1");
    require(tol >= 0.0, ErrorKind::Usage, "tol must be >= 0");
    require(final_lr > 0.0, ErrorKind::Usage, "final learning rate must be > 0");
    require(epochs >= 1 && batch_size >= 1 && patience >= 1, ErrorKind::Usage,
            "epochs, batch size and patience must be >= 1");
    require(valid_fraction > 0.0 && valid_fraction < 1.0, ErrorKind::Usage,
            "valid_fraction must lie in (0, 1)");
  }
};

struct LearnResult {
  WeightingParams weighting;
  std::vector<double> deltas;  // Frobenius change of Sigma per round
  std::size_t rounds = 0;
  std::size_t atomic_updates = 0;
  PhaseTimings timings;
};

inline LearnResult learn_weighting(const WindowSet& train, const LinearForecaster& model_init,
                                   const QdfConfig& cfg) {
  cfg.validate();
  require(train.size() >= 2 * cfg.k_splits, ErrorKind::InvalidSplit,
          "learn_weighting needs at least 2*K = " + std::to_string(2 * cfg.k_splits) +
              " windows, got " + std::to_string(train.size()));
  struct StackedSplit {
    StackedRows inner, outer;
  };
  std::vector<StackedSplit> subsets;
  for (const WindowSet& part : chrono_split_equal(train, cfg.k_splits)) {
    const SplitPair split = SplitPair::halves(part);
    subsets.push_back({split.inner().stack(), split.outer().stack()});
  }

  const AtomicConfig atomic = cfg.atomic();
  LearnResult out{identity_params(static_cast<std::size_t>(train.horizon()), cfg.mode), {}, 0, 0,
                  {}};
  LinearForecaster model = model_init;
  for (std::size_t round = 0; round < cfg.outer_rounds; ++round) {
    const WeightingParams previous = out.weighting;
    for (const StackedSplit& s : subsets) {
      if (cfg.reset_theta) model = model_init;
      AtomicResult r = detail::atomic_update_rows(model, out.weighting, s.inner, s.outer, atomic);
      out.weighting = std::move(r.weighting);
      model = std::move(r.model);
      out.timings += r.timings;
      ++out.atomic_updates;
    }
    ++out.rounds;
    out.deltas.push_back(frobenius_distance(out.weighting, previous));
    if (out.deltas.back() < cfg.tol) break;
  }
  return out;
}

// ----------------------------------------------------- final training ----

/// Training objective: the quadratic form under a fixed Sigma, or plain MSE.
class Objective {
 public:
  static Objective quadratic(const WeightingParams& w) {
    Objective o;
    o.m_ = materialize(w);
    require_conditioned(*o.m_);
    return o;
  }
  static Objective mse() { return Objective{}; }

  double loss(const ResidualBatch& e) const { return m_ ? quadratic_loss(e, *m_) : mse_loss(e); }
  Eigen::MatrixXd grad(const ResidualBatch& e) const {
    return m_ ? grad_wrt_residual(e, *m_) : mse_grad_wrt_residual(e);
  }

 private:
  std::optional<Materialized> m_;
};

struct FinalResult {
  LinearForecaster model;
  std::size_t epochs_run = 0;
  double best_valid_loss = 0.0;
  double train_loss = 0.0;  // objective over the fitting windows at the returned model
  double elapsed_ms = 0.0;
};

namespace detail {

inline StackedRows gather_windows(const StackedRows& rows, const std::vector<std::size_t>& windows,
                                  std::size_t begin, std::size_t end, Eigen::Index vars) {
  const auto count = static_cast<Eigen::Index>(end - begin) * vars;
  StackedRows out{Eigen::MatrixXd(count, rows.x.cols()), Eigen::MatrixXd(count, rows.y.cols())};
  Eigen::Index r = 0;
  for (std::size_t i = begin; i < end; ++i)
    for (Eigen::Index v = 0; v < vars; ++v, ++r) {
      const auto src = static_cast<Eigen::Index>(windows[i]) * vars + v;
      out.x.row(r) = rows.x.row(src);
      out.y.row(r) = rows.y.row(src);
    }
  return out;
}

inline double objective_on(const Objective& objective, const LinearForecaster& model,
                           const StackedRows& rows) {
  return objective.loss(ResidualBatch(rows.y - model.forecast_rows(rows.x)));
}

}  // namespace detail

/// Mini-batch Adam on `objective`, early stopping on the validation
/// objective with the configured patience; returns the best-validation model.
/// Without `valid`, the last `valid_fraction` of `train` validates.
inline FinalResult train_with_objective(const WindowSet& train, const Objective& objective,
                                        const LinearForecaster& model_init, const QdfConfig& cfg,
                                        const std::optional<WindowSet>& valid = std::nullopt) {
  cfg.validate();
  detail::Stopwatch clock;
  WindowSet fit = train;
  WindowSet held_out;
  if (valid) {
    held_out = *valid;
  } else {
    auto parts = chrono_split(train, {1.0 - cfg.valid_fraction, cfg.valid_fraction});
    fit = std::move(parts[0]);
    held_out = std::move(parts[1]);
  }
  require(!fit.empty() && !held_out.empty(), ErrorKind::InvalidSplit,
          "final training needs nonempty fitting and validation windows");
  require(fit.horizon() == model_init.horizon() && fit.history() == model_init.history() &&
              held_out.horizon() == fit.horizon() && held_out.history() == fit.history(),
          ErrorKind::InvalidDimension, "model and windows disagree on H or T");

  const StackedRows rows = fit.stack();
  const StackedRows valid_rows = held_out.stack();
  const Eigen::Index vars = fit.variables();

  auto rng = make_stream(cfg.seed, "batch");
  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Adam adam(cfg.final_lr);
  LinearForecaster model = model_init;
  FinalResult out{model_init, 0, detail::objective_on(objective, model_init, valid_rows), 0.0, 0.0};
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const StackedRows batch = detail::gather_windows(rows, order, begin, end, vars);
      const ResidualBatch residuals(batch.y - model.forecast_rows(batch.x));
      const Eigen::MatrixXd upstream = -objective.grad(residuals);
      model = adam.step(model, grad_params_rows(model, batch.x, upstream));
    }
    ++out.epochs_run;
    const double v = detail::objective_on(objective, model, valid_rows);
    require(std::isfinite(v), ErrorKind::Numeric, "validation loss diverged");
    if (v < out.best_valid_loss) {
      out.best_valid_loss = v;
      out.model = model;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  out.train_loss = detail::objective_on(objective, out.model, rows);
  out.elapsed_ms = clock.elapsed_ms();
  return out;
}

inline FinalResult train_final(const WindowSet& train, const WeightingParams& w,
                               const LinearForecaster& model_init, const QdfConfig& cfg,
                               const std::optional<WindowSet>& valid = std::nullopt) {
  require(static_cast<Eigen::Index>(w.horizon()) == train.horizon(), ErrorKind::InvalidDimension,
          "weighting horizon does not match the training windows");
  return train_with_objective(train, Objective::quadratic(w), model_init, cfg, valid);
}

inline FinalResult train_mse(const WindowSet& train, const LinearForecaster& model_init,
                             const QdfConfig& cfg,
                             const std::optional<WindowSet>& valid = std::nullopt) {
  return train_with_objective(train, Objective::mse(), model_init, cfg, valid);
}

// ---------------------------------------------------------- variants ----

enum class Variant { DF, QDFdiag, QDFoffdiag, QDFfull };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::DF: return "df";
    case Variant::QDFdiag: return "qdf-diag";
    case Variant::QDFoffdiag: return "qdf-offdiag";
    case Variant::QDFfull: return "qdf";
  }
  return "df";
}

inline Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::DF, Variant::QDFdiag, Variant::QDFoffdiag, Variant::QDFfull})
    if (name == to_string(v)) return v;
  fail(ErrorKind::Usage, "unknown variant '" + std::string(name) +
                             "' (expected df, qdf, qdf-diag or qdf-offdiag)");
}

inline WeightingMode mode_for(Variant v) {
  switch (v) {
    case Variant::QDFdiag: return WeightingMode::DiagOnly;
    case Variant::QDFoffdiag: return WeightingMode::OffDiagOnly;
    default: return WeightingMode::Full;
  }
}

struct Metrics {
  double mse = 0.0;  // per element
  double mae = 0.0;  // per element
  double nll = 0.0;  // mean e^T Sigma^{-1} e under the evaluation Sigma
};

inline Metrics evaluate(const LinearForecaster& model, const WindowSet& windows,
                        const WeightingParams& w) {
  require(!windows.empty(), ErrorKind::EmptyInput, "evaluation set is empty");
  const StackedRows rows = windows.stack();
  const Eigen::MatrixXd e = rows.y - model.forecast_rows(rows.x);
  const auto n = static_cast<double>(e.size());
  return {e.squaredNorm() / n, e.cwiseAbs().sum() / n, quadratic_loss(ResidualBatch(e), w)};
}

struct RunReport {
  Variant variant = Variant::DF;
  QdfConfig config;
  Metrics metrics;
  Eigen::MatrixXd sigma;
  std::string sigma_path;
  PhaseTimings timings;
  double final_train_ms = 0.0;
  std::vector<double> deltas;
  std::size_t epochs_run = 0;
  LinearForecaster model = LinearForecaster::zeros(1, 1);
  WeightingParams weighting = identity_params(1);
};

inline LinearForecaster initial_model(const WindowSet& train, std::uint64_t seed) {
  auto rng = make_stream(seed, "init");
  return LinearForecaster::random_init(train.history(), train.horizon(), rng);
}

/// Runs one variant. Only `train` (and `valid` for early stopping) feed the
/// learning phases; `test` is read once, for the reported metrics.
inline RunReport run_variant(const WindowSet& train, const std::optional<WindowSet>& valid,
                             const WindowSet& test, Variant variant, const QdfConfig& base) {
  QdfConfig cfg = base;
  cfg.mode = mode_for(variant);
  cfg.validate();
  const LinearForecaster model_init = initial_model(train, cfg.seed);

  RunReport report;
  report.variant = variant;
  report.config = cfg;
  WeightingParams w = identity_params(static_cast<std::size_t>(train.horizon()), cfg.mode);
  if (variant != Variant::DF) {
    LearnResult learned = learn_weighting(train, model_init, cfg);
    w = std::move(learned.weighting);
    report.timings = learned.timings;
    report.deltas = std::move(learned.deltas);
  }
  FinalResult final = train_final(train, w, model_init, cfg, valid);
  report.final_train_ms = final.elapsed_ms;
  report.epochs_run = final.epochs_run;
  report.metrics = evaluate(final.model, test, w);
  report.sigma = materialize(w).sigma;
  report.model = std::move(final.model);
  report.weighting = std::move(w);
  return report;
}

}  // namespace qdf
