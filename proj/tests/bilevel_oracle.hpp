#pragma once

// Finite-difference hypergradient oracle: re-run N plain gradient steps at a
// perturbed weighting, then evaluate the outer loss with the unperturbed
// weighting held in its direct slot.

#include <Eigen/Dense>

#include "qdf/model.hpp"
#include "qdf/objective.hpp"
#include "qdf/weighting.hpp"
#include "support.hpp"

namespace qdf::testing {

struct BilevelInstance {
  LinearForecaster theta0;
  Eigen::MatrixXd inner_x, inner_y, outer_x, outer_y;
};

inline LinearForecaster descend(const LinearForecaster& theta0, const WeightingParams& w,
                                const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                std::size_t steps, double lr) {
  const Eigen::MatrixXd p = materialize(w).sigma.inverse();
  LinearForecaster m = theta0;
  const double rows = static_cast<double>(x.rows());
  for (std::size_t k = 0; k < steps; ++k) {
    // d/dW mean_r e_r^T P e_r with e = y - (W x + b).
    const Eigen::MatrixXd e = y - m.forecast_rows(x);
    const Eigen::MatrixXd pe = e * p;  // rows of P e_r (P symmetric)
    const Eigen::MatrixXd dw = -(2.0 / rows) * pe.transpose() * x;
    const Eigen::VectorXd db = -(2.0 / rows) * pe.colwise().sum().transpose();
    m = LinearForecaster(m.weights() - lr * dw, m.bias() - lr * db);
  }
  return m;
}

inline double outer_loss_at(const BilevelInstance& inst, const WeightingParams& w_inner,
                            const WeightingParams& w_direct, std::size_t steps, double lr) {
  const LinearForecaster m = descend(inst.theta0, w_inner, inst.inner_x, inst.inner_y, steps, lr);
  const Eigen::MatrixXd e = inst.outer_y - m.forecast_rows(inst.outer_x);
  const Eigen::MatrixXd p = materialize(w_direct).sigma.inverse();
  return (e * p).cwiseProduct(e).sum() / static_cast<double>(e.rows());
}

inline Eigen::MatrixXd fd_hypergradient(const BilevelInstance& inst, const WeightingParams& w,
                                        std::size_t steps, double lr, double step) {
  const auto f = [&](const Eigen::MatrixXd& raw) {
    return outer_loss_at(inst, WeightingParams(raw, w.mode()), w, steps, lr);
  };
  return central_difference(f, w.raw(), step, true);
}

}  // namespace qdf::testing
