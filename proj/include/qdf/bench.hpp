#pragma once

// Dataset preparation shared by the CLI and the benchmark harness, plus the
// seeded synthetic benchmarks used for the ablation comparisons.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qdf/data.hpp"
#include "qdf/errors.hpp"
#include "qdf/rng.hpp"
#include "qdf/workflow.hpp"

namespace qdf {

struct PreparedData {
  WindowSet train;
  WindowSet valid;
  WindowSet test;
  Standardization stats;
};

/// Chronological row split into train/valid/test, standardization with
/// training statistics, then windows per part (none straddle a boundary).
inline PreparedData prepare(const SeriesFrame& frame, Index history, Index horizon,
                            const std::vector<double>& fractions = {0.7, 0.1, 0.2},
                            Index stride = 1) {
  require(fractions.size() == 3, ErrorKind::Usage, "expected train/valid/test fractions");
  const auto parts = chrono_split(frame, fractions);
  auto [train_std, stats] = standardize(parts[0], 0, parts[0].length());
  PreparedData out;
  out.train = make_windows(train_std, history, horizon, stride);
  out.valid = make_windows(apply_standardization(parts[1], stats), history, horizon, stride);
  out.test = make_windows(apply_standardization(parts[2], stats), history, horizon, stride);
  out.stats = std::move(stats);
  return out;
}

enum class BenchmarkKind {
  CorrHetero,  // AR(1) labels with an innovation ramp across the horizon
  RampOnly,    // independent labels, innovation ramp across the horizon
  CorrOnly,    // AR(1) labels with unit conditional variance on every step
  WhiteNoise,  // independent, equal-variance labels
};

inline std::string_view to_string(BenchmarkKind k) {
  switch (k) {
    case BenchmarkKind::CorrHetero: return "corr-hetero";
    case BenchmarkKind::RampOnly: return "ramp-only";
    case BenchmarkKind::CorrOnly: return "corr-only";
    case BenchmarkKind::WhiteNoise: return "white";
  }
  return "corr-hetero";
}

inline BenchmarkKind parse_benchmark(std::string_view name) {
  for (auto k : {BenchmarkKind::CorrHetero, BenchmarkKind::RampOnly, BenchmarkKind::CorrOnly,
                 BenchmarkKind::WhiteNoise})
    if (name == to_string(k)) return k;
  fail(ErrorKind::Usage, "unknown benchmark '" + std::string(name) +
                             "' (expected corr-hetero, ramp-only, corr-only or white)");
}

struct BenchmarkSetup {
  Index history = 16;
  Index horizon = 8;
  double phi = 0.7;
  double ramp_from = 1.0;
  double ramp_to = 3.0;
  Index windows = 600;  // aligned windows generated in total (before splitting)
};

/// AR spec of a synthetic benchmark. Windows must be taken with stride
/// H + T so that label step k always sees the k-th scheduled innovation.
inline ArSpec benchmark_spec(BenchmarkKind kind, const BenchmarkSetup& setup, std::uint64_t seed) {
  ArSpec spec;
  spec.history = setup.history;
  spec.seed = seed;
  spec.length = setup.windows * (setup.history + setup.horizon);
  const auto t = static_cast<std::size_t>(setup.horizon);
  switch (kind) {
    case BenchmarkKind::CorrHetero:
      spec.coeffs = {setup.phi};
      spec.label_noise = linear_ramp(setup.ramp_from, setup.ramp_to, t);
      break;
    case BenchmarkKind::RampOnly:
      spec.label_noise = linear_ramp(setup.ramp_from, setup.ramp_to, t);
      break;
    case BenchmarkKind::CorrOnly: {
      // Unit conditional variance per step: s_1 = 1, s_k^2 = 1 - phi^2 after.
      spec.coeffs = {setup.phi};
      spec.label_noise.assign(t, std::sqrt(1.0 - setup.phi * setup.phi));
      spec.label_noise[0] = 1.0;
      break;
    }
    case BenchmarkKind::WhiteNoise:
      break;
  }
  return spec;
}

struct BenchmarkData {
  ArSpec spec;
  PreparedData data;
  Eigen::MatrixXd oracle_sigma;  // conditional covariance in standardized units
};

inline BenchmarkData make_benchmark(BenchmarkKind kind, const BenchmarkSetup& setup,
                                    std::uint64_t seed) {
  BenchmarkData out;
  out.spec = benchmark_spec(kind, setup, make_stream(seed, "data")());
  const SeriesFrame frame = gen_ar(out.spec);
  // Part boundaries on whole periods keep every part phase aligned.
  const auto w = static_cast<double>(setup.windows);
  const double train = std::round(0.7 * w), valid = std::round(0.1 * w);
  out.data = prepare(frame, setup.history, setup.horizon,
                     {train / w, valid / w, (w - train - valid) / w},
                     setup.history + setup.horizon);
  const double s = out.data.stats.std(0);
  out.oracle_sigma = ar_conditional_cov(out.spec, setup.horizon) / (s * s);
  return out;
}

}  // namespace qdf
