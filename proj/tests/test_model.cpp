#include <gtest/gtest.h>

#include <random>

#include "qdf/errors.hpp"
#include "qdf/model.hpp"
#include "qdf/objective.hpp"
#include "qdf/rng.hpp"
#include "support.hpp"

using namespace qdf;
namespace qt = qdf::testing;

TEST(Forecast, ZeroWeightsGiveBias) {
  Eigen::VectorXd b(3);
  b << 1, -2, 0.5;
  const LinearForecaster m(Eigen::MatrixXd::Zero(3, 4), b);
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd out = m.forecast(qt::normal_matrix(rng, 4, 2));
  for (Eigen::Index d = 0; d < 2; ++d) EXPECT_TRUE(out.col(d) == b);
}

TEST(Forecast, IdentityPersistence) {
  const LinearForecaster m(Eigen::MatrixXd::Identity(5, 5), Eigen::VectorXd::Zero(5));
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = qt::normal_matrix(rng, 5, 3);
  EXPECT_TRUE(m.forecast(x) == x);
}

TEST(Forecast, HandArithmetic) {
  Eigen::MatrixXd w(1, 2);
  w << 0.5, 0.5;
  const LinearForecaster m(w, Eigen::VectorXd::Ones(1));
  Eigen::MatrixXd x(2, 1);
  x << 2, 4;
  EXPECT_EQ(m.forecast(x)(0, 0), 4.0);
}

TEST(Forecast, ShapeMismatch) {
  const LinearForecaster m = LinearForecaster::zeros(3, 2);
  try {
    m.forecast(Eigen::MatrixXd::Zero(4, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidDimension);
  }
}

TEST(Forecast, RowsAgreeWithColumns) {
  std::mt19937_64 rng(3);
  const LinearForecaster m(qt::normal_matrix(rng, 3, 4), qt::normal_matrix(rng, 3, 1).col(0));
  const Eigen::MatrixXd x = qt::normal_matrix(rng, 4, 5);
  EXPECT_LE((m.forecast_rows(x.transpose()) - m.forecast(x).transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Forecast, ChannelIndependence) {
  std::mt19937_64 rng(4);
  const LinearForecaster m(qt::normal_matrix(rng, 3, 4), Eigen::VectorXd::Ones(3));
  const Eigen::MatrixXd x = qt::normal_matrix(rng, 4, 3);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(3);
  perm.indices() << 2, 0, 1;
  EXPECT_TRUE(m.forecast(x * perm) == m.forecast(x) * perm);
}

TEST(RandomInit, BoundsAndDeterminism) {
  auto a = make_stream(5, "init");
  auto b = make_stream(5, "init");
  const LinearForecaster m1 = LinearForecaster::random_init(16, 8, a);
  const LinearForecaster m2 = LinearForecaster::random_init(16, 8, b);
  EXPECT_TRUE(m1 == m2);
  EXPECT_LE(m1.weights().cwiseAbs().maxCoeff(), 0.25);
  EXPECT_TRUE(m1.bias().isZero(0.0));
}

TEST(GradParams, Examples) {
  const LinearForecaster m = LinearForecaster::zeros(1, 1);
  const ForecasterGrad g = grad_params(m, Eigen::MatrixXd::Constant(1, 1, 3.0),
                                       Eigen::MatrixXd::Constant(1, 1, 2.0));
  EXPECT_EQ(g.d_weights(0, 0), 6.0);
  EXPECT_EQ(g.d_bias(0), 2.0);
  const ForecasterGrad z = grad_params(LinearForecaster::zeros(3, 2), Eigen::MatrixXd::Ones(3, 2),
                                       Eigen::MatrixXd::Zero(2, 2));
  EXPECT_TRUE(z.d_weights.isZero(0.0) && z.d_bias.isZero(0.0));
}

TEST(GradParams, ChainRuleMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const Eigen::Index h = 4, t = 3;
  const Eigen::MatrixXd x = qt::normal_matrix(rng, 5, h);
  const Eigen::MatrixXd y = qt::normal_matrix(rng, 5, t);
  const WeightingParams w = qt::random_params(rng, t);
  const LinearForecaster m(qt::normal_matrix(rng, t, h), qt::normal_matrix(rng, t, 1).col(0));
  for (bool weighted : {false, true}) {
    const auto loss = [&](const LinearForecaster& f) {
      const ResidualBatch e(y - f.forecast_rows(x));
      return weighted ? quadratic_loss(e, w) : mse_loss(e);
    };
    const ResidualBatch e(y - m.forecast_rows(x));
    const Eigen::MatrixXd up = weighted ? grad_wrt_residual(e, w) : mse_grad_wrt_residual(e);
    const ForecasterGrad g = grad_params_rows(m, x, -up);
    const Eigen::MatrixXd fd_w = qt::central_difference(
        [&](const Eigen::MatrixXd& wt) { return loss(LinearForecaster(wt, m.bias())); }, m.weights(),
        1e-5);
    const Eigen::MatrixXd fd_b = qt::central_difference(
        [&](const Eigen::MatrixXd& b) { return loss(LinearForecaster(m.weights(), b.col(0))); },
        Eigen::MatrixXd(m.bias()), 1e-5);
    EXPECT_LE((g.d_weights - fd_w).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE((Eigen::MatrixXd(g.d_bias) - fd_b).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(SgdStep, Examples) {
  const LinearForecaster m = LinearForecaster(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1));
  const ForecasterGrad zero{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)};
  EXPECT_TRUE(sgd_step(m, zero, 0.3) == m);
  const ForecasterGrad g{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::VectorXd::Zero(1)};
  EXPECT_DOUBLE_EQ(sgd_step(m, g, 0.1).weights()(0, 0), 0.95);
  const LinearForecaster twice = sgd_step(sgd_step(m, g, 0.1), g, 0.1);
  EXPECT_NEAR(twice.weights()(0, 0), sgd_step(m, g, 0.2).weights()(0, 0), 1e-15);
}

TEST(SgdStep, NonFiniteGradientRejected) {
  const LinearForecaster m = LinearForecaster::zeros(1, 1);
  const ForecasterGrad g{Eigen::MatrixXd::Constant(1, 1, std::nan("")), Eigen::VectorXd::Zero(1)};
  try {
    sgd_step(m, g, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
  }
}

TEST(SgdStep, NoiselessLinearProcessFitsExactly) {
  std::mt19937_64 rng(7);
  const Eigen::Index h = 6, t = 5;
  const Eigen::MatrixXd a = qt::uniform_matrix(rng, t, h, -0.5, 0.5);
  const Eigen::MatrixXd x = qt::normal_matrix(rng, 200, h);
  const Eigen::MatrixXd y = x * a.transpose();
  LinearForecaster m = LinearForecaster::zeros(h, t);
  double loss = 0.0;
  for (int step = 0; step < 5000; ++step) {
    const ResidualBatch e(y - m.forecast_rows(x));
    loss = mse_loss(e);
    m = sgd_step(m, grad_params_rows(m, x, -mse_grad_wrt_residual(e)), 0.1);
  }
  EXPECT_LT(loss, 1e-6);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam opt(0.01);
  const LinearForecaster m = LinearForecaster::zeros(2, 1);
  Eigen::MatrixXd gw(1, 2);
  gw << 3.0, -0.2;
  const LinearForecaster next = opt.step(m, {gw, Eigen::VectorXd::Constant(1, 5.0)});
  EXPECT_NEAR(next.weights()(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(next.weights()(0, 1), 0.01, 1e-9);
  EXPECT_NEAR(next.bias()(0), -0.01, 1e-9);
}
