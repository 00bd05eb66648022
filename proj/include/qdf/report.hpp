#pragma once

// JSON serialization for run reports (schema 1) and configs.

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

#include "qdf/workflow.hpp"

namespace qdf {

inline constexpr int kReportSchema = 1;

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json config_json(const QdfConfig& c) {
  return {{"k_splits", c.k_splits},
          {"outer_rounds", c.outer_rounds},
          {"inner_steps", c.inner_steps},
          {"inner_lr", c.inner_lr},
          {"eta", c.eta},
          {"tol", c.tol},
          {"final_lr", c.final_lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"valid_fraction", c.valid_fraction},
          {"mode", std::string(to_string(c.mode))},
          {"normalize", c.normalize},
          {"reset_theta", c.reset_theta},
          {"seed", c.seed}};
}

inline double per_step(double total_ms, std::size_t steps) {
  return steps == 0 ? 0.0 : total_ms / static_cast<double>(steps);
}

/// `extra_config` is merged into the config echo (data path, H, T, ...).
inline nlohmann::json report_json(const RunReport& r,
                              const nlohmann::json& extra_config = nlohmann::json::object()) {
  nlohmann::json config = config_json(r.config);
  for (auto it = extra_config.begin(); it != extra_config.end(); ++it) config[it.key()] = it.value();
  const PhaseTimings& t = r.timings;
  return {{"schema", kReportSchema},
          {"variant", std::string(to_string(r.variant))},
          {"seed", r.config.seed},
          {"config", config},
          {"metrics", {{"mse", r.metrics.mse}, {"mae", r.metrics.mae}, {"nll", r.metrics.nll}}},
          {"sigma_path", r.sigma_path},
          {"timings_ms",
           {{"inner_fwd", t.inner_fwd_ms},
            {"inner_bwd", t.inner_bwd_ms},
            {"outer_fwd", t.outer_fwd_ms},
            {"outer_bwd", t.outer_bwd_ms},
            {"final_train", r.final_train_ms}}},
          {"timing_steps", {{"inner", t.inner_steps}, {"outer", t.outer_steps}}},
          {"per_step_ms",
           {{"inner_fwd", per_step(t.inner_fwd_ms, t.inner_steps)},
            {"inner_bwd", per_step(t.inner_bwd_ms, t.inner_steps)},
            {"outer_fwd", per_step(t.outer_fwd_ms, t.outer_steps)},
            {"outer_bwd", per_step(t.outer_bwd_ms, t.outer_steps)}}},
          {"deltas", r.deltas},
          {"rounds", r.deltas.size()},
          {"epochs_run", r.epochs_run}};
}

}  // namespace qdf
