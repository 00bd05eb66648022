#pragma once

// Model checkpoint: <prefix>.weights.csv (T x H), <prefix>.bias.csv (T x 1)
// and <prefix>.json with H, T, D and the standardization statistics.

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qdf/data.hpp"
#include "qdf/errors.hpp"
#include "qdf/matrix_io.hpp"
#include "qdf/model.hpp"

namespace qdf {

struct Checkpoint {
  LinearForecaster model = LinearForecaster::zeros(1, 1);
  Index variables = 1;
  Standardization stats;
};

inline void save_checkpoint(const std::string& prefix, const LinearForecaster& model,
                            Index variables, const Standardization& stats) {
  write_matrix_csv(prefix + ".weights.csv", model.weights());
  write_matrix_csv(prefix + ".bias.csv", model.bias());
  const auto to_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); };
  const nlohmann::json header = {{"history", model.history()},
                                 {"horizon", model.horizon()},
                                 {"variables", variables},
                                 {"mean", to_vec(stats.mean)},
                                 {"std", to_vec(stats.std)}};
  std::ofstream out(prefix + ".json");
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write checkpoint header " + prefix + ".json");
  out << header.dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read checkpoint header " + prefix + ".json");
  nlohmann::json header;
  try {
    in >> header;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("bad checkpoint header: ") + e.what());
  }
  const Eigen::MatrixXd w = read_matrix_csv(prefix + ".weights.csv");
  const Eigen::MatrixXd b = read_matrix_csv(prefix + ".bias.csv");
  require(w.rows() == header.at("horizon").get<Index>() && w.cols() == header.at("history").get<Index>() &&
              b.cols() == 1 && b.rows() == w.rows(),
          ErrorKind::Parse, "checkpoint matrices do not match the header");
  Checkpoint c;
  c.model = LinearForecaster(w, b.col(0));
  c.variables = header.at("variables").get<Index>();
  const auto mean = header.at("mean").get<std::vector<double>>();
  const auto std = header.at("std").get<std::vector<double>>();
  c.stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Index>(mean.size()));
  c.stats.std = Eigen::Map<const Eigen::VectorXd>(std.data(), static_cast<Index>(std.size()));
  return c;
}

}  // namespace qdf
