#pragma once

// Channel-independent linear direct forecaster: each variable's T-step
// forecast is weights * history + bias, with weights shared across variables.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>

#include "qdf/errors.hpp"
#include "qdf/rng.hpp"

namespace qdf {

struct ForecasterGrad {
  Eigen::MatrixXd d_weights;  // T x H
  Eigen::VectorXd d_bias;     // T
};

class LinearForecaster {
 public:
  LinearForecaster(Eigen::MatrixXd weights, Eigen::VectorXd bias)
      : weights_(std::move(weights)), bias_(std::move(bias)) {
    require(weights_.rows() >= 1 && weights_.cols() >= 1, ErrorKind::InvalidDimension,
            "forecaster needs H >= 1 and T >= 1");
    require(bias_.size() == weights_.rows(), ErrorKind::InvalidDimension,
            "bias length must equal the horizon");
    require(weights_.allFinite() && bias_.allFinite(), ErrorKind::Numeric,
            "forecaster parameters must be finite");
  }

  static LinearForecaster zeros(Eigen::Index history, Eigen::Index horizon) {
    return {Eigen::MatrixXd::Zero(horizon, history), Eigen::VectorXd::Zero(horizon)};
  }

  /// weights ~ U[-1/sqrt(H), 1/sqrt(H)], bias = 0.
  template <class Engine>
  static LinearForecaster random_init(Eigen::Index history, Eigen::Index horizon, Engine& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(history));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(horizon, history);
    for (Eigen::Index j = 0; j < history; ++j)
      for (Eigen::Index i = 0; i < horizon; ++i) w(i, j) = dist(rng);
    return {std::move(w), Eigen::VectorXd::Zero(horizon)};
  }

  Eigen::Index history() const { return weights_.cols(); }
  Eigen::Index horizon() const { return weights_.rows(); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }

  /// H x D history -> T x D forecast.
  Eigen::MatrixXd forecast(const Eigen::MatrixXd& x) const {
    require(x.rows() == history(), ErrorKind::InvalidDimension,
            "input has " + std::to_string(x.rows()) + " steps, model expects " +
                std::to_string(history()));
    require(x.allFinite(), ErrorKind::Numeric, "input has non-finite entries");
    Eigen::MatrixXd out = weights_ * x;
    out.colwise() += bias_;
    return out;
  }

  /// Row-stacked variant: R x H histories -> R x T forecasts.
  Eigen::MatrixXd forecast_rows(const Eigen::MatrixXd& x_rows) const {
    require(x_rows.cols() == history(), ErrorKind::InvalidDimension,
            "stacked input width does not match history");
    Eigen::MatrixXd out = x_rows * weights_.transpose();
    out.rowwise() += bias_.transpose();
    return out;
  }

  bool operator==(const LinearForecaster& o) const {
    return weights_.rows() == o.weights_.rows() && weights_.cols() == o.weights_.cols() &&
           weights_ == o.weights_ && bias_ == o.bias_;
  }

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
};

/// Backprop of an upstream gradient (dLoss/dForecast, T x D) for one window.
inline ForecasterGrad grad_params(const LinearForecaster& m, const Eigen::MatrixXd& x,
                                  const Eigen::MatrixXd& upstream) {
  require(x.rows() == m.history() && upstream.rows() == m.horizon() && x.cols() == upstream.cols(),
          ErrorKind::InvalidDimension, "grad_params: shape mismatch");
  return {upstream * x.transpose(), upstream.rowwise().sum()};
}

/// Row-stacked variant: upstream is R x T, x_rows is R x H.
inline ForecasterGrad grad_params_rows(const LinearForecaster& m, const Eigen::MatrixXd& x_rows,
                                       const Eigen::MatrixXd& upstream_rows) {
  require(x_rows.cols() == m.history() && upstream_rows.cols() == m.horizon() &&
              x_rows.rows() == upstream_rows.rows(),
          ErrorKind::InvalidDimension, "grad_params_rows: shape mismatch");
  return {upstream_rows.transpose() * x_rows, upstream_rows.colwise().sum().transpose()};
}

inline LinearForecaster sgd_step(const LinearForecaster& m, const ForecasterGrad& g, double lr) {
  require(lr > 0.0, ErrorKind::Numeric, "learning rate must be positive");
  require(g.d_weights.rows() == m.horizon() && g.d_weights.cols() == m.history() &&
              g.d_bias.size() == m.horizon(),
          ErrorKind::InvalidDimension, "gradient shape mismatch");
  require(g.d_weights.allFinite() && g.d_bias.allFinite(), ErrorKind::Numeric,
          "non-finite gradient");
  return {m.weights() - lr * g.d_weights, m.bias() - lr * g.d_bias};
}

/// Adam with PyTorch defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    require(lr > 0.0, ErrorKind::Numeric, "learning rate must be positive");
  }

  LinearForecaster step(const LinearForecaster& m, const ForecasterGrad& g) {
    require(g.d_weights.allFinite() && g.d_bias.allFinite(), ErrorKind::Numeric,
            "non-finite gradient");
    if (t_ == 0) {
      m_w_ = Eigen::MatrixXd::Zero(m.horizon(), m.history());
      v_w_ = m_w_;
      m_b_ = Eigen::VectorXd::Zero(m.horizon());
      v_b_ = m_b_;
    }
    ++t_;
    m_w_ = beta1_ * m_w_ + (1.0 - beta1_) * g.d_weights;
    v_w_ = beta2_ * v_w_ + (1.0 - beta2_) * g.d_weights.cwiseAbs2();
    m_b_ = beta1_ * m_b_ + (1.0 - beta1_) * g.d_bias;
    v_b_ = beta2_ * v_b_ + (1.0 - beta2_) * g.d_bias.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const Eigen::MatrixXd step_w =
        ((m_w_ / c1).array() / ((v_w_ / c2).array().sqrt() + eps_)).matrix();
    const Eigen::VectorXd step_b =
        ((m_b_ / c1).array() / ((v_b_ / c2).array().sqrt() + eps_)).matrix();
    return {m.weights() - lr_ * step_w, m.bias() - lr_ * step_b};
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::MatrixXd m_w_, v_w_;
  Eigen::VectorXd m_b_, v_b_;
};

}  // namespace qdf
