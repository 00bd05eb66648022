#pragma once

// Learnable weighting matrix Sigma = L * L^T, with L lower-triangular and a
// softplus-positive diagonal. The quadratic objective weights residuals by
// Sigma^{-1}.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "qdf/errors.hpp"

namespace qdf {

/// Lower bound applied to softplus outputs on the diagonal of L.
inline constexpr double kDiagonalFloor = 1e-6;

enum class WeightingMode {
  Full,         // every lower-triangular entry is learned
  DiagOnly,     // strictly-lower entries of L are pinned to zero
  OffDiagOnly,  // diagonal of L is pinned to one
};

inline std::string_view to_string(WeightingMode mode) {
  switch (mode) {
    case WeightingMode::Full: return "full";
    case WeightingMode::DiagOnly: return "diag";
    case WeightingMode::OffDiagOnly: return "offdiag";
  }
  return "full";
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double softplus_inverse(double y) {
  require(y > 0.0 && std::isfinite(y), ErrorKind::Numeric,
          "softplus_inverse requires a positive finite argument");
  return y + std::log(-std::expm1(-y));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct Materialized {
  Eigen::MatrixXd factor;  // L
  Eigen::MatrixXd sigma;   // L * L^T
  bool floored = false;    // some diagonal softplus value fell under the floor
};

/// Raw (unconstrained) parameterization of the weighting matrix. Immutable:
/// every update produces a new value.
class WeightingParams {
 public:
  WeightingParams(Eigen::MatrixXd raw, WeightingMode mode = WeightingMode::Full)
      : raw_(std::move(raw)), mode_(mode) {
    require(raw_.rows() >= 1 && raw_.rows() == raw_.cols(), ErrorKind::InvalidDimension,
            "weighting raw matrix must be square with horizon >= 1");
    require(raw_.allFinite(), ErrorKind::Numeric, "weighting raw matrix has non-finite entries");
    raw_.triangularView<Eigen::StrictlyUpper>().setZero();
  }

  std::size_t horizon() const { return static_cast<std::size_t>(raw_.rows()); }
  WeightingMode mode() const { return mode_; }
  const Eigen::MatrixXd& raw() const { return raw_; }

  bool operator==(const WeightingParams& other) const {
    return mode_ == other.mode_ && raw_.rows() == other.raw_.rows() && raw_ == other.raw_;
  }

 private:
  Eigen::MatrixXd raw_;
  WeightingMode mode_;
};

inline WeightingParams identity_params(std::size_t horizon,
                                       WeightingMode mode = WeightingMode::Full) {
  require(horizon >= 1, ErrorKind::InvalidDimension, "horizon must be >= 1");
  const auto t = static_cast<Eigen::Index>(horizon);
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(t, t);
  raw.diagonal().setConstant(softplus_inverse(1.0));
  return WeightingParams(std::move(raw), mode);
}

inline Materialized materialize(const WeightingParams& params) {
  const Eigen::MatrixXd& raw = params.raw();
  const Eigen::Index t = raw.rows();
  Materialized out;
  out.factor = Eigen::MatrixXd::Zero(t, t);
  if (params.mode() != WeightingMode::DiagOnly) {
    out.factor.triangularView<Eigen::StrictlyLower>() = raw.triangularView<Eigen::StrictlyLower>();
  }
  for (Eigen::Index i = 0; i < t; ++i) {
    if (params.mode() == WeightingMode::OffDiagOnly) {
      out.factor(i, i) = 1.0;
      continue;
    }
    const double d = softplus(raw(i, i));
    if (d < kDiagonalFloor) out.floored = true;
    out.factor(i, i) = std::max(d, kDiagonalFloor);
  }
  out.sigma = out.factor * out.factor.transpose();
  return out;
}

/// Throws a conditioning error when the factor was clamped at the floor.
inline void require_conditioned(const Materialized& m) {
  require(!m.floored, ErrorKind::Conditioning,
          "weighting matrix is numerically singular (Cholesky diagonal under floor)");
}

/// Sigma^{-1} via two triangular solves against the identity.
inline Eigen::MatrixXd precision(const Materialized& m) {
  const Eigen::Index t = m.factor.rows();
  const Eigen::MatrixXd inv_l =
      m.factor.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(t, t));
  return inv_l.transpose() * inv_l;
}

/// Zeroes the gradient entries that the mode freezes, and the upper triangle.
inline Eigen::MatrixXd mask_gradient(const Eigen::MatrixXd& grad, WeightingMode mode) {
  Eigen::MatrixXd out = grad;
  out.triangularView<Eigen::StrictlyUpper>().setZero();
  if (mode == WeightingMode::DiagOnly) out.triangularView<Eigen::StrictlyLower>().setZero();
  if (mode == WeightingMode::OffDiagOnly) out.diagonal().setZero();
  return out;
}

/// Chains dLoss/dL (dense T x T) back to the raw entries: strictly-lower
/// entries pass through, the diagonal picks up the softplus derivative.
inline Eigen::MatrixXd raw_gradient_from_factor(const Eigen::MatrixXd& grad_factor,
                                                const WeightingParams& params) {
  Eigen::MatrixXd out = grad_factor;
  const Eigen::MatrixXd& raw = params.raw();
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double d = softplus(raw(i, i));
    out(i, i) = d < kDiagonalFloor ? 0.0 : grad_factor(i, i) * sigmoid(raw(i, i));
  }
  return mask_gradient(out, params.mode());
}

/// raw' = raw - rate * mask(grad).
inline WeightingParams apply_gradient(const WeightingParams& params, const Eigen::MatrixXd& grad,
                                      double rate) {
  require(grad.rows() == params.raw().rows() && grad.cols() == params.raw().cols(),
          ErrorKind::InvalidDimension, "weighting gradient shape mismatch");
  require(grad.allFinite(), ErrorKind::Numeric, "weighting gradient has non-finite entries");
  return WeightingParams(params.raw() - rate * mask_gradient(grad, params.mode()), params.mode());
}

/// Rescales Sigma by c > 0 so that trace(Sigma^{-1}) == T. The argmin of the
/// quadratic objective over predictions does not depend on c. OffDiagOnly
/// parameters are returned unchanged: their unit diagonal already fixes
/// det(Sigma) = 1 and cannot absorb a scale.
inline WeightingParams normalize_scale(const WeightingParams& params) {
  if (params.mode() == WeightingMode::OffDiagOnly) return params;
  const Materialized m = materialize(params);
  require_conditioned(m);
  const Eigen::Index t = m.factor.rows();
  const Eigen::MatrixXd inv_l =
      m.factor.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(t, t));
  const double c = inv_l.squaredNorm() / static_cast<double>(t);
  require(std::isfinite(c) && c > 0.0, ErrorKind::Conditioning,
          "weighting matrix scale is not finite");
  if (c == 1.0) return params;
  const double s = std::sqrt(c);
  Eigen::MatrixXd raw = params.raw();
  raw.triangularView<Eigen::StrictlyLower>() *= s;
  for (Eigen::Index i = 0; i < t; ++i) raw(i, i) = softplus_inverse(s * m.factor(i, i));
  return WeightingParams(std::move(raw), params.mode());
}

/// Builds parameters whose materialized Sigma equals `sigma` (Cholesky).
inline WeightingParams params_from_covariance(const Eigen::MatrixXd& sigma,
                                              WeightingMode mode = WeightingMode::Full) {
  require(sigma.rows() >= 1 && sigma.rows() == sigma.cols(), ErrorKind::InvalidDimension,
          "covariance must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  require(llt.info() == Eigen::Success, ErrorKind::Conditioning,
          "covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::MatrixXd raw = l;
  for (Eigen::Index i = 0; i < l.rows(); ++i) raw(i, i) = softplus_inverse(l(i, i));
  return WeightingParams(std::move(raw), mode);
}

inline double frobenius_distance(const WeightingParams& a, const WeightingParams& b) {
  require(a.horizon() == b.horizon(), ErrorKind::InvalidDimension,
          "frobenius_distance: horizon mismatch");
  return (materialize(a).sigma - materialize(b).sigma).norm();
}

}  // namespace qdf
