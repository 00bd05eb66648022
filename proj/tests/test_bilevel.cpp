#include <gtest/gtest.h>

#include <random>

#include "bilevel_oracle.hpp"
#include "qdf/bilevel.hpp"
#include "qdf/errors.hpp"
#include "support.hpp"

using namespace qdf;
namespace qt = qdf::testing;

namespace {

// A series whose windows are reproduced exactly by stacking.
struct SeriesInstance {
  WindowSet windows;
  LinearForecaster theta0;
};

SeriesInstance random_series(std::mt19937_64& rng, Eigen::Index h, Eigen::Index t, Eigen::Index n,
                             Eigen::Index vars = 1) {
  ArSpec spec;
  spec.coeffs = {0.6};
  spec.length = n;
  spec.variables = vars;
  spec.seed = rng();
  return {make_windows(gen_ar(spec), h, t),
          LinearForecaster(qt::uniform_matrix(rng, t, h, -0.3, 0.3),
                           qt::uniform_matrix(rng, t, 1, -0.2, 0.2).col(0))};
}

qt::BilevelInstance as_instance(const SplitPair& split, const LinearForecaster& theta0) {
  const StackedRows in = split.inner().stack();
  const StackedRows out = split.outer().stack();
  return {theta0, in.x, in.y, out.x, out.y};
}

}  // namespace

TEST(SplitPair, RequiresOrderedNonemptyParts) {
  const WindowSet w = make_windows(qt::ramp_frame(20), 3, 2);
  EXPECT_NO_THROW(SplitPair(w.slice(0, 5), w.slice(5, 10)));
  for (auto bad : {std::pair<std::size_t, std::size_t>{5, 3}, {0, 0}}) {
    try {
      SplitPair(w.slice(bad.first, 10), w.slice(bad.second, 6));
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidSplit);
    }
  }
  EXPECT_THROW(SplitPair(w.slice(0, 0), w.slice(0, 3)), Error);
  const WindowSet other = make_windows(qt::ramp_frame(20), 4, 2);
  EXPECT_THROW(SplitPair(w.slice(0, 3), other.slice(8, 10)), Error);
}

TEST(SplitPair, HalvesIsChronological) {
  const WindowSet w = make_windows(qt::ramp_frame(20), 3, 2);
  const SplitPair s = SplitPair::halves(w);
  EXPECT_EQ(s.inner().size(), 8u);
  EXPECT_EQ(s.outer().size(), 8u);
  EXPECT_EQ(s.outer().start(0), 8);
}

TEST(Hypergradient, SingleStepTwoByTwoAgainstFiniteDifferences) {
  std::mt19937_64 rng(21);
  const SeriesInstance s = random_series(rng, 2, 2, 80);
  const SplitPair split = SplitPair::halves(s.windows);
  const WeightingParams w = qt::random_params(rng, 2);
  const AtomicConfig cfg{1, 0.05, 0.0, true};
  const Eigen::MatrixXd g = hypergradient(s.theta0, w, split, cfg);
  const Eigen::MatrixXd fd = qt::fd_hypergradient(as_instance(split, s.theta0), w, 1, 0.05, 1e-4);
  EXPECT_LE(qt::max_entry_relative_error(g, fd, 1e-8), 1e-3) << g << "\n\n" << fd;
  EXPECT_GT(g.norm(), 1e-6);
}

TEST(Hypergradient, MultiStepMultivariateAgainstFiniteDifferences) {
  std::mt19937_64 rng(22);
  for (std::size_t steps : {1u, 2u, 3u, 5u}) {
    const SeriesInstance s = random_series(rng, 5, 4, 120, 2);
    const SplitPair split = SplitPair::halves(s.windows);
    const WeightingParams w = qt::random_params(rng, 4);
    const AtomicConfig cfg{steps, 0.03, 0.0, true};
    const Eigen::MatrixXd g = hypergradient(s.theta0, w, split, cfg);
    const Eigen::MatrixXd fd =
        qt::fd_hypergradient(as_instance(split, s.theta0), w, steps, 0.03, 1e-4);
    EXPECT_LE(qt::max_entry_relative_error(g, fd, 1e-8), 1e-3) << "N=" << steps;
  }
}

TEST(Hypergradient, RespectsModeMasks) {
  std::mt19937_64 rng(23);
  const SeriesInstance s = random_series(rng, 4, 5, 90);
  const SplitPair split = SplitPair::halves(s.windows);
  const AtomicConfig cfg{2, 0.05, 0.0, true};
  const Eigen::MatrixXd diag =
      hypergradient(s.theta0, qt::random_params(rng, 5, WeightingMode::DiagOnly), split, cfg);
  const Eigen::MatrixXd off =
      hypergradient(s.theta0, qt::random_params(rng, 5, WeightingMode::OffDiagOnly), split, cfg);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) {
      if (i != j) EXPECT_EQ(diag(i, j), 0.0);
      if (j >= i) EXPECT_EQ(off(i, j), 0.0);
    }
  EXPECT_GT(diag.diagonal().norm(), 0.0);
}

TEST(Hypergradient, MaskedModesAgainstFiniteDifferences) {
  std::mt19937_64 rng(24);
  for (WeightingMode mode : {WeightingMode::DiagOnly, WeightingMode::OffDiagOnly}) {
    const SeriesInstance s = random_series(rng, 3, 4, 70);
    const SplitPair split = SplitPair::halves(s.windows);
    const WeightingParams w = qt::random_params(rng, 4, mode);
    const AtomicConfig cfg{2, 0.04, 0.0, true};
    const Eigen::MatrixXd fd = qt::fd_hypergradient(as_instance(split, s.theta0), w, 2, 0.04, 1e-4);
    EXPECT_LE(qt::max_entry_relative_error(hypergradient(s.theta0, w, split, cfg), fd, 1e-8), 1e-3);
  }
}

TEST(Hypergradient, VanishesWithInnerRate) {
  std::mt19937_64 rng(25);
  const SeriesInstance s = random_series(rng, 4, 3, 60);
  const SplitPair split = SplitPair::halves(s.windows);
  const WeightingParams w = qt::random_params(rng, 3);
  double previous = hypergradient(s.theta0, w, split, {1, 1e-2, 0.0, true}).norm();
  for (double lr : {1e-4, 1e-6, 1e-8}) {
    const double norm = hypergradient(s.theta0, w, split, {1, lr, 0.0, true}).norm();
    EXPECT_LT(norm, previous * 0.05);
    previous = norm;
  }
}

TEST(Hypergradient, StopGradientOnDirectSlot) {
  // Inner residuals are nonzero but orthogonal to [x, 1], so the inner step
  // leaves theta exactly in place; outer residuals at theta are exactly zero.
  Eigen::MatrixXd inner_x(4, 1), outer_x(3, 1);
  inner_x << 1, 1, -1, -1;
  outer_x << 2, -3, 5;
  Eigen::MatrixXd a(2, 1);
  a << 2, -1;
  Eigen::MatrixXd noise(4, 2);
  noise << 1, 2, -1, -2, 1, 2, -1, -2;
  const LinearForecaster theta(a, Eigen::VectorXd::Zero(2));
  const StackedRows inner{inner_x, inner_x * a.transpose() + noise};
  const StackedRows outer{outer_x, outer_x * a.transpose()};

  std::mt19937_64 rng(26);
  const WeightingParams w = qt::random_params(rng, 2);
  PhaseTimings timings;
  const auto u = detail::unroll(theta, w, inner, outer, {3, 0.1, 0.0, true}, true, timings);
  EXPECT_TRUE(u.model == theta);
  EXPECT_TRUE(u.hypergradient->isZero(0.0));
  // The direct derivative of the inner quadratic form is not zero here.
  EXPECT_GT(grad_wrt_weighting(ResidualBatch(noise), w).norm(), 0.1);
}

TEST(AtomicUpdate, ZeroEtaLeavesWeightingBitIdentical) {
  std::mt19937_64 rng(27);
  const SeriesInstance s = random_series(rng, 4, 3, 60);
  const SplitPair split = SplitPair::halves(s.windows);
  const WeightingParams w = qt::random_params(rng, 3);
  const AtomicResult r = atomic_update(s.theta0, w, split, {2, 0.05, 0.0, true});
  EXPECT_TRUE(r.weighting == w);
  const StackedRows inner = split.inner().stack();
  const LinearForecaster expected = qt::descend(s.theta0, w, inner.x, inner.y, 2, 0.05);
  EXPECT_LE((r.model.weights() - expected.weights()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_FALSE(r.model == s.theta0);
}

TEST(AtomicUpdate, StepsAgainstHypergradientThenNormalizes) {
  std::mt19937_64 rng(28);
  const SeriesInstance s = random_series(rng, 4, 3, 60);
  const SplitPair split = SplitPair::halves(s.windows);
  const WeightingParams w = qt::random_params(rng, 3);
  const AtomicConfig raw_cfg{1, 0.05, 0.2, false};
  const AtomicResult r = atomic_update(s.theta0, w, split, raw_cfg);
  const Eigen::MatrixXd g = hypergradient(s.theta0, w, split, raw_cfg);
  EXPECT_TRUE(r.weighting == apply_gradient(w, g, 0.2));
  const AtomicResult n = atomic_update(s.theta0, w, split, {1, 0.05, 0.2, true});
  EXPECT_NEAR(materialize(n.weighting).sigma.inverse().trace(), 3.0, 1e-10);
}

TEST(AtomicUpdate, ZeroOuterResidualKeepsWeightingUpToNormalization) {
  Eigen::MatrixXd x(6, 2);
  x << 1, 0, 0, 1, 1, 1, 2, -1, -1, 3, 0.5, 0.5;
  Eigen::MatrixXd a(3, 2);
  a << 1, 2, -1, 0.5, 0, 1;
  const LinearForecaster theta(a, Eigen::VectorXd::Zero(3));
  const StackedRows rows{x, x * a.transpose()};
  std::mt19937_64 rng(29);
  const WeightingParams w = qt::random_params(rng, 3);
  const AtomicResult r = detail::atomic_update_rows(theta, w, rows, rows, {2, 0.1, 0.5, false});
  EXPECT_TRUE(r.hypergradient.isZero(0.0));
  EXPECT_TRUE(r.weighting == w);
}

TEST(AtomicUpdate, DeterministicAndTimed) {
  std::mt19937_64 rng(30);
  const SeriesInstance s = random_series(rng, 6, 4, 100);
  const SplitPair split = SplitPair::halves(s.windows);
  const WeightingParams w = identity_params(4);
  const AtomicConfig cfg{3, 0.05, 0.1, true};
  const AtomicResult a = atomic_update(s.theta0, w, split, cfg);
  const AtomicResult b = atomic_update(s.theta0, w, split, cfg);
  EXPECT_TRUE(a.weighting == b.weighting);
  EXPECT_TRUE(a.model == b.model);
  EXPECT_TRUE(a.hypergradient == b.hypergradient);
  EXPECT_EQ(a.timings.inner_steps, 3u);
  EXPECT_EQ(a.timings.outer_steps, 1u);
  for (double ms : {a.timings.inner_fwd_ms, a.timings.inner_bwd_ms, a.timings.outer_fwd_ms,
                    a.timings.outer_bwd_ms})
    EXPECT_GE(ms, 0.0);
}

TEST(AtomicConfig, Validation) {
  EXPECT_THROW((AtomicConfig{0, 0.1, 0.0, true}.validate()), Error);
  EXPECT_THROW((AtomicConfig{1, 0.0, 0.0, true}.validate()), Error);
  EXPECT_THROW((AtomicConfig{1, 0.1, -1.0, true}.validate()), Error);
}
