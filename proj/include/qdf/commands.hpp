#pragma once

// Implementations behind the `qdf` command-line tool: synth, train, bench,
// diagnose. Each takes a plain argument struct so tests can drive them
// without spawning a process.

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "qdf/bench.hpp"
#include "qdf/checkpoint.hpp"
#include "qdf/data.hpp"
#include "qdf/diagnostics.hpp"
#include "qdf/errors.hpp"
#include "qdf/matrix_io.hpp"
#include "qdf/report.hpp"
#include "qdf/workflow.hpp"

namespace qdf {

/// 0 success, 2 usage, 3 data, 4 numeric/conditioning.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Numeric:
    case ErrorKind::Conditioning:
    case ErrorKind::UndefinedCorrelation: return 4;
    default: return 3;
  }
}

inline nlohmann::json error_json(const Error& e) {
  return {{"schema", kReportSchema},
          {"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}},
          {"exit_code", exit_code_for(e.kind())}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

// -------------------------------------------------------------- synth ----

struct SynthArgs {
  std::vector<double> phi;
  double noise = 1.0;
  std::optional<double> noise_end;  // ramp the label-step noise from `noise` to this
  Index history = 96;
  Index horizon = 96;
  Index length = 20000;
  Index variables = 1;
  std::uint64_t seed = 0;
  std::string out = "synth.csv";
  std::string oracle;  // defaults to <out>.oracle.json
};

inline ArSpec synth_spec(const SynthArgs& a) {
  ArSpec spec;
  spec.coeffs = a.phi;
  spec.noise_std = a.noise;
  spec.history = a.history;
  spec.length = a.length;
  spec.variables = a.variables;
  spec.seed = a.seed;
  if (a.noise_end)
    spec.label_noise = linear_ramp(a.noise, *a.noise_end, static_cast<std::size_t>(a.horizon));
  return spec;
}

inline nlohmann::json cmd_synth(const SynthArgs& a) {
  require(a.horizon >= 1 && a.history >= 1, ErrorKind::Usage, "history and horizon must be >= 1");
  const ArSpec spec = synth_spec(a);
  const SeriesFrame frame = gen_ar(spec);
  const Eigen::MatrixXd cov = ar_conditional_cov(spec, a.horizon);
  const std::string oracle_path = a.oracle.empty() ? a.out + ".oracle.json" : a.oracle;
  write_csv(frame, a.out);
  const nlohmann::json oracle = {
      {"schema", kReportSchema},
      {"history", a.history},
      {"horizon", a.horizon},
      {"spec",
       {{"phi", spec.coeffs},
        {"noise_std", spec.noise_std},
        {"label_noise", spec.label_noise},
        {"length", spec.length},
        {"variables", spec.variables},
        {"seed", spec.seed}}},
      {"aligned_stride", spec.label_noise.empty() ? 1 : spec.period()},
      {"conditional_cov", matrix_to_json(cov)}};
  write_json(oracle_path, oracle);
  return {{"data", a.out}, {"oracle", oracle_path}, {"rows", frame.length()}};
}

// -------------------------------------------------------------- train ----

struct TrainArgs {
  std::string data;
  std::string valid;  // optional explicit validation file
  bool skip_date = false;
  Index history = 96;
  Index horizon = 96;
  Index stride = 1;
  std::vector<double> split{0.7, 0.1, 0.2};
  Variant variant = Variant::QDFfull;
  QdfConfig config;
  std::string dump_sigma;
  std::string report;
  std::string save_model;
};

struct TrainOutcome {
  RunReport report;
  nlohmann::json json;
};

inline PreparedData load_for_training(const TrainArgs& a) {
  const CsvOptions csv{a.skip_date};
  const SeriesFrame frame = load_csv(a.data, csv);
  if (a.valid.empty()) return prepare(frame, a.history, a.horizon, a.split, a.stride);

  require(a.split.size() == 3, ErrorKind::Usage, "expected train/valid/test fractions");
  const double train_share = a.split[0] / (a.split[0] + a.split[2]);
  const auto parts = chrono_split(frame, {train_share, 1.0 - train_share});
  auto [train_std, stats] = standardize(parts[0], 0, parts[0].length());
  const SeriesFrame valid_frame = load_csv(a.valid, csv);
  require(valid_frame.variables() == frame.variables(), ErrorKind::Parse,
          "validation file has a different number of columns");
  PreparedData out;
  out.train = make_windows(train_std, a.history, a.horizon, a.stride);
  out.valid = make_windows(apply_standardization(valid_frame, stats), a.history, a.horizon, a.stride);
  out.test = make_windows(apply_standardization(parts[1], stats), a.history, a.horizon, a.stride);
  out.stats = std::move(stats);
  return out;
}

inline TrainOutcome cmd_train(const TrainArgs& a) {
  require(!a.data.empty(), ErrorKind::Usage, "--data is required");
  a.config.validate();
  const PreparedData data = load_for_training(a);
  RunReport report = run_variant(data.train, data.valid, data.test, a.variant, a.config);
  if (!a.dump_sigma.empty()) {
    write_matrix_csv(a.dump_sigma, report.sigma);
    report.sigma_path = a.dump_sigma;
  }
  if (!a.save_model.empty())
    save_checkpoint(a.save_model, report.model, data.train.variables(), data.stats);
  std::vector<double> split = a.split;
  const nlohmann::json extra = {{"data", a.data},
                                {"valid", a.valid},
                                {"skip_date", a.skip_date},
                                {"history", a.history},
                                {"horizon", a.horizon},
                                {"stride", a.stride},
                                {"split", split},
                                {"variables", data.train.variables()},
                                {"windows",
                                 {{"train", data.train.size()},
                                  {"valid", data.valid.size()},
                                  {"test", data.test.size()}}}};
  nlohmann::json j = report_json(report, extra);
  if (!a.report.empty()) write_json(a.report, j);
  return {std::move(report), std::move(j)};
}

// -------------------------------------------------------------- bench ----

struct BenchArgs {
  std::string data;  // empty: synthetic benchmark
  bool skip_date = false;
  BenchmarkKind benchmark = BenchmarkKind::CorrHetero;
  BenchmarkSetup setup;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<Variant> variants{Variant::DF, Variant::QDFdiag, Variant::QDFoffdiag,
                                Variant::QDFfull};
  QdfConfig config;
  std::string out_csv;
  std::string summary_csv;
  std::string out_json;
};

struct BenchRow {
  Variant variant = Variant::DF;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Metrics metrics;
};

struct BenchSummary {
  Variant variant = Variant::DF;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mse_mean = 0.0, mse_std = 0.0, mae_mean = 0.0, mae_std = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<BenchSummary> summary;
  nlohmann::json json;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

inline BenchResult cmd_bench(const BenchArgs& a) {
  require(!a.seeds.empty() && !a.variants.empty(), ErrorKind::Usage,
          "bench needs at least one seed and one variant");
  a.config.validate();
  BenchResult result;
  std::optional<PreparedData> fixed;
  if (!a.data.empty())
    fixed = prepare(load_csv(a.data, CsvOptions{a.skip_date}), a.setup.history, a.setup.horizon);

  for (std::uint64_t seed : a.seeds) {
    const PreparedData data = fixed ? *fixed : make_benchmark(a.benchmark, a.setup, seed).data;
    for (Variant v : a.variants) {
      QdfConfig cfg = a.config;
      cfg.seed = seed;
      BenchRow row{v, seed, false, {}, {}};
      try {
        row.metrics = run_variant(data.train, data.valid, data.test, v, cfg).metrics;
        row.ok = true;
      } catch (const Error& e) {
        row.error = std::string(to_string(e.kind())) + ": " + e.what();
      }
      result.rows.push_back(std::move(row));
    }
  }

  nlohmann::json summary_json = nlohmann::json::array();
  for (Variant v : a.variants) {
    std::vector<double> mse, mae;
    BenchSummary s;
    s.variant = v;
    for (const BenchRow& r : result.rows) {
      if (r.variant != v) continue;
      ++s.runs;
      if (!r.ok) {
        ++s.failed;
        continue;
      }
      mse.push_back(r.metrics.mse);
      mae.push_back(r.metrics.mae);
    }
    std::tie(s.mse_mean, s.mse_std) = detail::mean_std(mse);
    std::tie(s.mae_mean, s.mae_std) = detail::mean_std(mae);
    result.summary.push_back(s);
    summary_json.push_back({{"variant", std::string(to_string(v))},
                            {"runs", s.runs},
                            {"failed", s.failed},
                            {"partial", s.failed > 0},
                            {"mse_mean", s.mse_mean},
                            {"mse_std", s.mse_std},
                            {"mae_mean", s.mae_mean},
                            {"mae_std", s.mae_std}});
  }

  nlohmann::json rows_json = nlohmann::json::array();
  for (const BenchRow& r : result.rows)
    rows_json.push_back({{"variant", std::string(to_string(r.variant))},
                         {"seed", r.seed},
                         {"ok", r.ok},
                         {"error", r.error},
                         {"mse", r.metrics.mse},
                         {"mae", r.metrics.mae},
                         {"nll", r.metrics.nll}});
  result.json = {{"schema", kReportSchema},
                 {"source", a.data.empty() ? std::string(to_string(a.benchmark)) : a.data},
                 {"setup",
                  {{"history", a.setup.history},
                   {"horizon", a.setup.horizon},
                   {"phi", a.setup.phi},
                   {"ramp_from", a.setup.ramp_from},
                   {"ramp_to", a.setup.ramp_to},
                   {"windows", a.setup.windows}}},
                 {"config", config_json(a.config)},
                 {"runs", rows_json},
                 {"summary", summary_json}};

  if (!a.out_csv.empty()) {
    std::ofstream out(a.out_csv);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot open for writing: " + a.out_csv);
    out << "variant,seed,ok,mse,mae,nll\n";
    for (const BenchRow& r : result.rows)
      out << to_string(r.variant) << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
          << format_double(r.metrics.mse) << ',' << format_double(r.metrics.mae) << ','
          << format_double(r.metrics.nll) << '\n';
  }
  if (!a.summary_csv.empty()) {
    std::ofstream out(a.summary_csv);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot open for writing: " + a.summary_csv);
    out << "variant,runs,failed,mse_mean,mse_std,mae_mean,mae_std\n";
    for (const BenchSummary& s : result.summary)
      out << to_string(s.variant) << ',' << s.runs << ',' << s.failed << ','
          << format_double(s.mse_mean) << ',' << format_double(s.mse_std) << ','
          << format_double(s.mae_mean) << ',' << format_double(s.mae_std) << '\n';
  }
  if (!a.out_json.empty()) write_json(a.out_json, result.json);
  return result;
}

// ----------------------------------------------------------- diagnose ----

struct DiagnoseArgs {
  std::string data;
  bool skip_date = false;
  Index variable = 0;
  Index reg_history = 8;
  Index horizon = 96;
  std::size_t subsample = 5000;
  std::uint64_t seed = 0;
  std::string out_matrix = "partial_corr.csv";
  std::string out_json;  // defaults to <out_matrix>.json
};

inline nlohmann::json cmd_diagnose(const DiagnoseArgs& a) {
  require(!a.data.empty(), ErrorKind::Usage, "--data is required");
  const SeriesFrame frame = load_csv(a.data, CsvOptions{a.skip_date});
  const PartialCorrReport r =
      partial_corr_matrix(frame, a.reg_history, a.horizon, a.subsample, a.variable, a.seed);
  write_matrix_csv(a.out_matrix, r.matrix);
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [i, j] : r.undefined_pairs) pairs.push_back({i, j});
  const nlohmann::json j = {
      {"schema", kReportSchema},
      {"matrix_path", a.out_matrix},
      {"fraction_above_0.1", fraction_above(r, 0.1)},
      {"cond_var", std::vector<double>(r.cond_var.begin(), r.cond_var.end())},
      {"meta",
       {{"history", r.history},
        {"horizon", a.horizon},
        {"samples", r.samples},
        {"variable", r.variable},
        {"degraded_conditioning", r.degraded},
        {"undefined_pairs", pairs}}}};
  write_json(a.out_json.empty() ? a.out_matrix + ".json" : a.out_json, j);
  return j;
}

}  // namespace qdf
