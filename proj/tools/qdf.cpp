// qdf: synthetic data, training runs, ablation benchmarks and diagnostics.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "qdf/commands.hpp"

namespace {

void add_workflow_flags(CLI::App* cmd, qdf::QdfConfig& c) {
  cmd->add_option("--k-splits", c.k_splits, "chronological subsets for weighting learning")
      ->capture_default_str();
  cmd->add_option("--inner-steps", c.inner_steps, "inner gradient steps per atomic update")
      ->capture_default_str();
  cmd->add_option("--outer-rounds", c.outer_rounds, "maximum outer rounds")->capture_default_str();
  cmd->add_option("--eta", c.eta, "weighting update rate (0 reduces to plain MSE)")
      ->capture_default_str();
  cmd->add_option("--inner-lr", c.inner_lr, "inner gradient-descent rate")->capture_default_str();
  cmd->add_option("--tol", c.tol, "Frobenius stopping threshold")->capture_default_str();
  cmd->add_option("--lr", c.final_lr, "Adam rate for final training")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "final training epochs")->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "final training batch size (windows)")
      ->capture_default_str();
  cmd->add_option("--patience", c.patience, "early stopping patience")->capture_default_str();
  cmd->add_option("--seed", c.seed, "run seed")->capture_default_str();
  cmd->add_flag("--reset-theta", c.reset_theta,
                "restore the initial model before every atomic update");
  cmd->add_flag("!--no-normalize", c.normalize, "skip trace normalization of Sigma");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadratic-form weighted training of direct multi-step forecasters"};
  app.require_subcommand(1);

  qdf::SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a seeded AR series and its oracle covariance");
  synth_cmd->add_option("--phi", synth.phi, "AR coefficients (comma separated)")->delimiter(',');
  synth_cmd->add_option("--noise", synth.noise, "innovation std")->capture_default_str();
  synth_cmd->add_option("--noise-end", synth.noise_end,
                        "ramp label-step innovation std from --noise to this value");
  synth_cmd->add_option("--n", synth.length, "series length")->capture_default_str();
  synth_cmd->add_option("--vars", synth.variables, "independent variables")->capture_default_str();
  synth_cmd->add_option("--history", synth.history, "H (ramp period is H+T)")->capture_default_str();
  synth_cmd->add_option("--horizon", synth.horizon, "T for the oracle covariance")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "CSV output")->capture_default_str();
  synth_cmd->add_option("--oracle", synth.oracle, "oracle JSON output (default <out>.oracle.json)");

  qdf::TrainArgs train;
  std::string train_variant = "qdf";
  auto* train_cmd = app.add_subcommand("train", "run the full workflow and write a JSON report");
  train_cmd->add_option("--data", train.data, "input CSV")->required();
  train_cmd->add_option("--valid", train.valid, "explicit validation CSV");
  train_cmd->add_flag("--date-column", train.skip_date, "skip the first (timestamp) column");
  train_cmd->add_option("--history", train.history)->capture_default_str();
  train_cmd->add_option("--horizon", train.horizon)->capture_default_str();
  train_cmd->add_option("--stride", train.stride, "window stride")->capture_default_str();
  train_cmd->add_option("--split", train.split, "train,valid,test fractions")->delimiter(',');
  train_cmd->add_option("--variant", train_variant, "df | qdf | qdf-diag | qdf-offdiag")
      ->capture_default_str();
  add_workflow_flags(train_cmd, train.config);
  train_cmd->add_option("--dump-sigma", train.dump_sigma, "write the learned Sigma as CSV");
  train_cmd->add_option("--report", train.report, "report JSON path (default: stdout)");
  train_cmd->add_option("--save-model", train.save_model, "checkpoint path prefix");

  qdf::BenchArgs bench;
  std::string bench_kind = "corr-hetero";
  std::vector<std::string> bench_variants{"df", "qdf-diag", "qdf-offdiag", "qdf"};
  auto* bench_cmd = app.add_subcommand("bench", "variants x seeds ablation table");
  bench_cmd->add_option("--data", bench.data, "input CSV (default: synthetic benchmark)");
  bench_cmd->add_flag("--date-column", bench.skip_date, "skip the first (timestamp) column");
  bench_cmd->add_option("--benchmark", bench_kind, "corr-hetero | ramp-only | corr-only | white")
      ->capture_default_str();
  bench_cmd->add_option("--history", bench.setup.history)->capture_default_str();
  bench_cmd->add_option("--horizon", bench.setup.horizon)->capture_default_str();
  bench_cmd->add_option("--phi", bench.setup.phi, "AR(1) coefficient")->capture_default_str();
  bench_cmd->add_option("--ramp-from", bench.setup.ramp_from)->capture_default_str();
  bench_cmd->add_option("--ramp-to", bench.setup.ramp_to)->capture_default_str();
  bench_cmd->add_option("--windows", bench.setup.windows, "aligned windows per realization")
      ->capture_default_str();
  bench_cmd->add_option("--seeds", bench.seeds)->delimiter(',');
  bench_cmd->add_option("--variants", bench_variants)->delimiter(',');
  add_workflow_flags(bench_cmd, bench.config);
  bench_cmd->add_option("--out-csv", bench.out_csv, "per-run CSV");
  bench_cmd->add_option("--summary-csv", bench.summary_csv, "per-variant summary CSV");
  bench_cmd->add_option("--out-json", bench.out_json, "full JSON (default: stdout)");

  qdf::DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "partial correlation of label steps given history");
  diag_cmd->add_option("--data", diag.data, "input CSV")->required();
  diag_cmd->add_flag("--date-column", diag.skip_date, "skip the first (timestamp) column");
  diag_cmd->add_option("--variable", diag.variable)->capture_default_str();
  diag_cmd->add_option("--reg-history", diag.reg_history)->capture_default_str();
  diag_cmd->add_option("--horizon", diag.horizon)->capture_default_str();
  diag_cmd->add_option("--subsample", diag.subsample)->capture_default_str();
  diag_cmd->add_option("--seed", diag.seed)->capture_default_str();
  diag_cmd->add_option("--out", diag.out_matrix, "matrix CSV")->capture_default_str();
  diag_cmd->add_option("--out-json", diag.out_json, "summary JSON (default <out>.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      std::cout << qdf::cmd_synth(synth).dump() << '\n';
    } else if (*train_cmd) {
      train.variant = qdf::parse_variant(train_variant);
      const auto outcome = qdf::cmd_train(train);
      if (train.report.empty()) std::cout << outcome.json.dump(2) << '\n';
    } else if (*bench_cmd) {
      bench.benchmark = qdf::parse_benchmark(bench_kind);
      bench.variants.clear();
      for (const auto& v : bench_variants) bench.variants.push_back(qdf::parse_variant(v));
      const auto result = qdf::cmd_bench(bench);
      if (bench.out_json.empty()) std::cout << result.json.dump(2) << '\n';
    } else if (*diag_cmd) {
      std::cout << qdf::cmd_diagnose(diag).dump() << '\n';
    }
  } catch (const qdf::Error& e) {
    std::cerr << qdf::error_json(e).dump() << '\n';
    return qdf::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"schema", qdf::kReportSchema},
                                {"error", {{"kind", "internal"}, {"message", e.what()}}}}
                     .dump()
              << '\n';
    return 1;
  }
  return 0;
}
