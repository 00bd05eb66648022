#pragma once

// Quadratic-form objective mean_i e_i^T Sigma^{-1} e_i and the plain MSE
// baseline, with analytic gradients. Each row of a ResidualBatch is one
// (window, variable) residual sequence of length T, so the batch mean is
// also the mean over variables.

#include <Eigen/Dense>

#include <string>

#include "qdf/errors.hpp"
#include "qdf/weighting.hpp"

namespace qdf {

class ResidualBatch {
 public:
  explicit ResidualBatch(Eigen::MatrixXd residuals) : e_(std::move(residuals)) {
    require(e_.allFinite(), ErrorKind::Numeric, "residual batch has non-finite entries");
  }

  const Eigen::MatrixXd& rows() const { return e_; }
  Eigen::Index size() const { return e_.rows(); }
  Eigen::Index horizon() const { return e_.cols(); }
  bool empty() const { return e_.rows() == 0; }

 private:
  Eigen::MatrixXd e_;
};

namespace detail {

inline void check_batch(const ResidualBatch& batch, Eigen::Index horizon) {
  require(!batch.empty(), ErrorKind::EmptyInput, "residual batch is empty");
  require(batch.horizon() == horizon, ErrorKind::InvalidDimension,
          "residual horizon " + std::to_string(batch.horizon()) +
              " does not match weighting horizon " + std::to_string(horizon));
}

// Z = L^{-1} E^T, one whitened residual per column.
inline Eigen::MatrixXd whiten(const ResidualBatch& batch, const Materialized& m) {
  return m.factor.triangularView<Eigen::Lower>().solve(batch.rows().transpose());
}

}  // namespace detail

inline double quadratic_loss(const ResidualBatch& batch, const Materialized& m) {
  require_conditioned(m);
  detail::check_batch(batch, m.factor.rows());
  return detail::whiten(batch, m).squaredNorm() / static_cast<double>(batch.size());
}

inline double quadratic_loss(const ResidualBatch& batch, const WeightingParams& w) {
  return quadratic_loss(batch, materialize(w));
}

inline double mse_loss(const ResidualBatch& batch) {
  require(!batch.empty(), ErrorKind::EmptyInput, "residual batch is empty");
  return batch.rows().squaredNorm() / static_cast<double>(batch.size());
}

/// Row i is (2/B) * Sigma^{-1} e_i.
inline Eigen::MatrixXd grad_wrt_residual(const ResidualBatch& batch, const Materialized& m) {
  require_conditioned(m);
  detail::check_batch(batch, m.factor.rows());
  const auto lower = m.factor.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd z = lower.solve(batch.rows().transpose());
  const Eigen::MatrixXd pe = lower.transpose().solve(z);
  return (2.0 / static_cast<double>(batch.size())) * pe.transpose();
}

inline Eigen::MatrixXd grad_wrt_residual(const ResidualBatch& batch, const WeightingParams& w) {
  return grad_wrt_residual(batch, materialize(w));
}

/// Gradient of the MSE objective w.r.t. residuals, (2/B) * e_i.
inline Eigen::MatrixXd mse_grad_wrt_residual(const ResidualBatch& batch) {
  require(!batch.empty(), ErrorKind::EmptyInput, "residual batch is empty");
  return (2.0 / static_cast<double>(batch.size())) * batch.rows();
}

/// dLoss/dL for a loss whose gradient w.r.t. Sigma is `grad_sigma`.
inline Eigen::MatrixXd factor_gradient_from_sigma(const Eigen::MatrixXd& grad_sigma,
                                                  const Eigen::MatrixXd& factor) {
  return (grad_sigma + grad_sigma.transpose()) * factor;
}

/// d(mean quadratic loss)/d(raw). With M = (1/B) Z Z^T the factor gradient
/// is -2 L^{-T} M, evaluated by a triangular solve.
inline Eigen::MatrixXd grad_wrt_weighting(const ResidualBatch& batch, const WeightingParams& w) {
  const Materialized m = materialize(w);
  require_conditioned(m);
  detail::check_batch(batch, m.factor.rows());
  const Eigen::MatrixXd z = detail::whiten(batch, m);
  const Eigen::MatrixXd moment = (z * z.transpose()) / static_cast<double>(batch.size());
  const Eigen::MatrixXd grad_factor =
      -2.0 * m.factor.triangularView<Eigen::Lower>().transpose().solve(moment);
  return raw_gradient_from_factor(grad_factor, w);
}

}  // namespace qdf
