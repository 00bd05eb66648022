#pragma once

// Series ingestion, standardization, sliding windows, chronological splits,
// and the synthetic AR generator with its conditional-covariance oracle.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qdf/errors.hpp"
#include "qdf/matrix_io.hpp"
#include "qdf/rng.hpp"

namespace qdf {

using Index = Eigen::Index;

struct SeriesFrame {
  Eigen::MatrixXd values;          // N x D, time-major
  std::vector<std::string> names;  // D column labels
  std::string source;
  Index origin = 0;                // global row index of values.row(0)
  std::size_t rejected_rows = 0;   // rows dropped at ingestion for non-finite cells

  Index length() const { return values.rows(); }
  Index variables() const { return values.cols(); }
};

// ---------------------------------------------------------------- CSV ----

struct CsvOptions {
  bool skip_first_column = false;  // e.g. a date/timestamp column
};

inline SeriesFrame load_csv(const std::filesystem::path& path, const CsvOptions& options = {}) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open data file: " + path.string());

  SeriesFrame frame;
  frame.source = path.string();
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse,
          "data file has no header row: " + path.string());
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  const std::size_t skip = options.skip_first_column ? 1 : 0;
  require(header.size() > skip, ErrorKind::Parse, "data file has no value columns");
  for (std::size_t j = skip; j < header.size(); ++j) frame.names.emplace_back(header[j]);
  const std::size_t d = frame.names.size();

  std::vector<double> flat;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    require(fields.size() == header.size(), ErrorKind::Parse,
            "row " + std::to_string(row_number) + " has " + std::to_string(fields.size()) +
                " fields, expected " + std::to_string(header.size()));
    std::vector<double> row(d);
    bool finite = true;
    for (std::size_t j = skip; j < fields.size(); ++j) {
      double v = 0.0;
      require(parse_double(fields[j], v), ErrorKind::Parse,
              "non-numeric cell at row " + std::to_string(row_number) + ", column " +
                  std::to_string(j + 1));
      finite = finite && std::isfinite(v);
      row[j - skip] = v;
    }
    if (!finite) {
      ++frame.rejected_rows;
      continue;
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }
  const auto n = static_cast<Index>(flat.size() / d);
  frame.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                 Eigen::RowMajor>>(flat.data(), n,
                                                                   static_cast<Index>(d));
  return frame;
}

inline void write_csv(const SeriesFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open for writing: " + path.string());
  for (std::size_t j = 0; j < frame.names.size(); ++j) out << (j ? "," : "") << frame.names[j];
  out << '\n';
  for (Index i = 0; i < frame.values.rows(); ++i) {
    for (Index j = 0; j < frame.values.cols(); ++j)
      out << (j ? "," : "") << format_double(frame.values(i, j));
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

// ---------------------------------------------------- standardization ----

inline constexpr double kStdFloor = 1e-8;

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<std::string> warnings;
};

inline SeriesFrame apply_standardization(const SeriesFrame& frame, const Standardization& stats) {
  require(stats.mean.size() == frame.variables(), ErrorKind::InvalidDimension,
          "standardization statistics do not match column count");
  SeriesFrame out = frame;
  out.values = (frame.values.rowwise() - stats.mean.transpose()).array().rowwise() /
               stats.std.transpose().array();
  return out;
}

inline SeriesFrame destandardize(const SeriesFrame& frame, const Standardization& stats) {
  require(stats.mean.size() == frame.variables(), ErrorKind::InvalidDimension,
          "standardization statistics do not match column count");
  SeriesFrame out = frame;
  out.values = (frame.values.array().rowwise() * stats.std.transpose().array()).matrix();
  out.values.rowwise() += stats.mean.transpose();
  return out;
}

/// Per-column mean/std over rows [row_begin, row_end) of `frame`, applied to
/// the whole frame. Callers pass the training region only.
inline std::pair<SeriesFrame, Standardization> standardize(const SeriesFrame& frame,
                                                           Index row_begin, Index row_end) {
  require(0 <= row_begin && row_begin < row_end && row_end <= frame.length(),
          ErrorKind::InvalidDimension, "standardize: statistics range out of bounds");
  const auto region = frame.values.middleRows(row_begin, row_end - row_begin);
  Standardization stats;
  stats.mean = region.colwise().mean().transpose();
  stats.std.resize(frame.variables());
  for (Index j = 0; j < frame.variables(); ++j) {
    const double var = (region.col(j).array() - stats.mean(j)).square().mean();
    double s = std::sqrt(var);
    if (!(s >= kStdFloor)) {
      stats.warnings.push_back("column '" +
                               (static_cast<std::size_t>(j) < frame.names.size()
                                    ? frame.names[static_cast<std::size_t>(j)]
                                    : std::to_string(j)) +
                               "' is constant over the statistics range; std floor applied");
      s = kStdFloor;
    }
    stats.std(j) = s;
  }
  return {apply_standardization(frame, stats), std::move(stats)};
}

// ------------------------------------------------------------ windows ----

/// Counts element reads through a WindowSet; used to prove a split was never
/// touched by a phase that must not see it.
struct AccessLog {
  std::atomic<std::size_t> reads{0};
};

/// Stacked design: one row per (window, variable), row = window * D + var.
struct StackedRows {
  Eigen::MatrixXd x;  // R x H
  Eigen::MatrixXd y;  // R x T
};

/// Sliding (X, Y) windows over a shared series. Window i covers source rows
/// [start, start + H) as history and [start + H, start + H + T) as labels.
class WindowSet {
 public:
  WindowSet() = default;

  WindowSet(std::shared_ptr<const Eigen::MatrixXd> series, Index origin, Index history,
            Index horizon, std::vector<Index> starts)
      : series_(std::move(series)),
        origin_(origin),
        history_(history),
        horizon_(horizon),
        starts_(std::move(starts)) {
    require(series_ != nullptr, ErrorKind::InvalidDimension, "window set without a series");
    require(history_ >= 1 && horizon_ >= 1, ErrorKind::InvalidDimension,
            "history and horizon must be >= 1");
    for (Index s : starts_)
      require(s >= 0 && s + history_ + horizon_ <= series_->rows(), ErrorKind::InvalidDimension,
              "window start out of range");
  }

  Index history() const { return history_; }
  Index horizon() const { return horizon_; }
  Index variables() const { return series_ ? series_->cols() : 0; }
  std::size_t size() const { return starts_.size(); }
  bool empty() const { return starts_.empty(); }

  /// Global source row of the first history step of window i.
  Index start(std::size_t i) const { return origin_ + starts_.at(i); }
  /// Global source rows spanned by the set, [first, last].
  Index first_source_row() const { return empty() ? 0 : start(0); }
  Index last_source_row() const {
    return empty() ? -1 : start(size() - 1) + history_ + horizon_ - 1;
  }

  Eigen::MatrixXd x(std::size_t i) const {
    note_read(static_cast<std::size_t>(history_ * variables()));
    return series_->middleRows(starts_.at(i), history_);
  }
  Eigen::MatrixXd y(std::size_t i) const {
    note_read(static_cast<std::size_t>(horizon_ * variables()));
    return series_->middleRows(starts_.at(i) + history_, horizon_);
  }

  WindowSet slice(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= size(), ErrorKind::InvalidSplit, "window slice out of range");
    WindowSet out = *this;
    out.starts_.assign(starts_.begin() + static_cast<std::ptrdiff_t>(begin),
                       starts_.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
  }

  WindowSet select(const std::vector<std::size_t>& indices) const {
    WindowSet out = *this;
    out.starts_.clear();
    out.starts_.reserve(indices.size());
    for (std::size_t i : indices) out.starts_.push_back(starts_.at(i));
    return out;
  }

  StackedRows stack() const {
    const Index d = variables();
    const auto r = static_cast<Index>(size()) * d;
    StackedRows out{Eigen::MatrixXd(r, history_), Eigen::MatrixXd(r, horizon_)};
    for (std::size_t i = 0; i < size(); ++i) {
      const Index s = starts_[i];
      for (Index v = 0; v < d; ++v) {
        const Index row = static_cast<Index>(i) * d + v;
        out.x.row(row) = series_->col(v).segment(s, history_).transpose();
        out.y.row(row) = series_->col(v).segment(s + history_, horizon_).transpose();
      }
    }
    note_read(static_cast<std::size_t>(r * (history_ + horizon_)));
    return out;
  }

  void attach_access_log(std::shared_ptr<AccessLog> log) { log_ = std::move(log); }

 private:
  void note_read(std::size_t n) const {
    if (log_) log_->reads.fetch_add(n, std::memory_order_relaxed);
  }

  std::shared_ptr<const Eigen::MatrixXd> series_;
  Index origin_ = 0;
  Index history_ = 0;
  Index horizon_ = 0;
  std::vector<Index> starts_;
  std::shared_ptr<AccessLog> log_;
};

/// Windows at starts 0, stride, 2*stride, ...; stride 1 yields N - H - T + 1.
inline WindowSet make_windows(const SeriesFrame& frame, Index history, Index horizon,
                              Index stride = 1) {
  require(history >= 1 && horizon >= 1 && stride >= 1, ErrorKind::InvalidDimension,
          "history, horizon and stride must be >= 1");
  require(frame.length() >= history + horizon, ErrorKind::InsufficientData,
          "series of length " + std::to_string(frame.length()) + " is shorter than H+T = " +
              std::to_string(history + horizon));
  std::vector<Index> starts;
  for (Index s = 0; s + history + horizon <= frame.length(); s += stride) starts.push_back(s);
  return WindowSet(std::make_shared<const Eigen::MatrixXd>(frame.values), frame.origin, history,
                   horizon, std::move(starts));
}

// --------------------------------------------------- chronological split --

namespace detail {

inline std::vector<Index> split_boundaries(Index n, const std::vector<double>& fractions) {
  require(!fractions.empty(), ErrorKind::InvalidSplit, "no split fractions given");
  double total = 0.0;
  for (double f : fractions) {
    require(f > 0.0 && std::isfinite(f), ErrorKind::InvalidSplit,
            "split fractions must be positive");
    total += f;
  }
  require(std::abs(total - 1.0) < 1e-9, ErrorKind::InvalidSplit, "split fractions must sum to 1");
  std::vector<Index> bounds{0};
  double cumulative = 0.0;
  for (std::size_t k = 0; k + 1 < fractions.size(); ++k) {
    cumulative += fractions[k];
    bounds.push_back(static_cast<Index>(std::llround(cumulative * static_cast<double>(n))));
  }
  bounds.push_back(n);
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k)
    require(bounds[k + 1] > bounds[k], ErrorKind::InvalidSplit,
            "split part " + std::to_string(k) + " would be empty");
  return bounds;
}

}  // namespace detail

/// Contiguous, ordered, disjoint window parts by count.
inline std::vector<WindowSet> chrono_split(const WindowSet& windows,
                                           const std::vector<double>& fractions) {
  const auto bounds = detail::split_boundaries(static_cast<Index>(windows.size()), fractions);
  std::vector<WindowSet> parts;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k)
    parts.push_back(windows.slice(static_cast<std::size_t>(bounds[k]),
                                  static_cast<std::size_t>(bounds[k + 1])));
  return parts;
}

/// K equal contiguous parts; part sizes differ by at most one window.
inline std::vector<WindowSet> chrono_split_equal(const WindowSet& windows, std::size_t k) {
  require(k >= 1, ErrorKind::InvalidSplit, "number of splits must be >= 1");
  require(windows.size() >= k, ErrorKind::InvalidSplit,
          std::to_string(windows.size()) + " windows cannot fill " + std::to_string(k) + " splits");
  std::vector<WindowSet> parts;
  for (std::size_t i = 0; i < k; ++i)
    parts.push_back(windows.slice(i * windows.size() / k, (i + 1) * windows.size() / k));
  return parts;
}

/// Splits the raw rows; windows made per part never straddle a boundary.
inline std::vector<SeriesFrame> chrono_split(const SeriesFrame& frame,
                                             const std::vector<double>& fractions) {
  const auto bounds = detail::split_boundaries(frame.length(), fractions);
  std::vector<SeriesFrame> parts;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    SeriesFrame part;
    part.values = frame.values.middleRows(bounds[k], bounds[k + 1] - bounds[k]);
    part.names = frame.names;
    part.source = frame.source;
    part.origin = frame.origin + bounds[k];
    parts.push_back(std::move(part));
  }
  return parts;
}

// ---------------------------------------------------------- synthetic ----

/// AR(p) process y_t = sum_i phi_i y_{t-i} + s(t) eps_t. The innovation scale
/// s(t) is `noise_std`, or, when `label_noise` is set, periodic with period
/// history + label_noise.size(): `noise_std` over the first `history` phases
/// and label_noise[k] on phase history + k. Windows taken with stride equal
/// to that period then see label_noise[k] on label step k.
struct ArSpec {
  std::vector<double> coeffs;
  double noise_std = 1.0;
  std::vector<double> label_noise;
  Index history = 0;
  Index length = 1000;
  Index variables = 1;
  std::uint64_t seed = 0;

  Index period() const { return history + static_cast<Index>(label_noise.size()); }

  double innovation_std(Index t) const {
    if (label_noise.empty()) return noise_std;
    const Index phase = t % period();
    return phase < history ? noise_std : label_noise[static_cast<std::size_t>(phase - history)];
  }

  /// Std of the innovation entering at label step k of an aligned window.
  double label_std(Index k) const {
    if (label_noise.empty()) return noise_std;
    require(k < static_cast<Index>(label_noise.size()), ErrorKind::Spec,
            "label noise schedule shorter than the requested horizon");
    return label_noise[static_cast<std::size_t>(k)];
  }

  void validate() const {
    require(std::isfinite(noise_std) && noise_std > 0.0, ErrorKind::Spec,
            "noise std must be positive");
    for (double s : label_noise)
      require(std::isfinite(s) && s > 0.0, ErrorKind::Spec, "label noise must be positive");
    require(length >= 1 && variables >= 1, ErrorKind::Spec, "length and variables must be >= 1");
    for (double c : coeffs) require(std::isfinite(c), ErrorKind::Spec, "non-finite AR coefficient");
    if (coeffs.empty()) return;
    // Stable iff every companion eigenvalue lies strictly inside the unit circle.
    const auto p = static_cast<Index>(coeffs.size());
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    for (Index i = 0; i < p; ++i) companion(0, i) = coeffs[static_cast<std::size_t>(i)];
    for (Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues();
    require(eig.cwiseAbs().maxCoeff() < 1.0, ErrorKind::Spec,
            "AR coefficients are not stable (characteristic root on or inside the unit circle)");
  }
};

inline std::vector<double> linear_ramp(double from, double to, std::size_t steps) {
  std::vector<double> out(steps, from);
  for (std::size_t k = 1; k < steps; ++k)
    out[k] = from + (to - from) * static_cast<double>(k) / static_cast<double>(steps - 1);
  return out;
}

inline SeriesFrame gen_ar(const ArSpec& spec) {
  spec.validate();
  auto rng = make_stream(spec.seed, "ar");
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto p = static_cast<Index>(spec.coeffs.size());
  const Index burn_in = 10 * p;
  SeriesFrame frame;
  frame.values.resize(spec.length, spec.variables);
  frame.source = "synthetic-ar";
  for (Index v = 0; v < spec.variables; ++v) {
    frame.names.push_back(spec.variables == 1 ? "value" : "x" + std::to_string(v));
    std::vector<double> y(static_cast<std::size_t>(burn_in + spec.length), 0.0);
    for (Index t = 0; t < burn_in + spec.length; ++t) {
      double acc = 0.0;
      for (Index i = 1; i <= p && i <= t; ++i)
        acc += spec.coeffs[static_cast<std::size_t>(i - 1)] * y[static_cast<std::size_t>(t - i)];
      const double scale = t < burn_in ? spec.noise_std : spec.innovation_std(t - burn_in);
      y[static_cast<std::size_t>(t)] = acc + scale * normal(rng);
    }
    for (Index t = 0; t < spec.length; ++t)
      frame.values(t, v) = y[static_cast<std::size_t>(burn_in + t)];
  }
  return frame;
}

/// MA(infinity) weights psi_0..psi_{count-1} of the AR polynomial.
inline std::vector<double> ma_weights(const std::vector<double>& coeffs, std::size_t count) {
  std::vector<double> psi(count, 0.0);
  if (count == 0) return psi;
  psi[0] = 1.0;
  for (std::size_t j = 1; j < count; ++j)
    for (std::size_t i = 1; i <= coeffs.size() && i <= j; ++i) psi[j] += coeffs[i - 1] * psi[j - i];
  return psi;
}

/// Exact covariance of the T label steps given the full past:
/// Cov[i][j] = sum_{k <= min(i,j)} psi_{i-k} psi_{j-k} s_k^2.
inline Eigen::MatrixXd ar_conditional_cov(const ArSpec& spec, Index horizon) {
  spec.validate();
  require(horizon >= 1, ErrorKind::InvalidDimension, "horizon must be >= 1");
  const auto psi = ma_weights(spec.coeffs, static_cast<std::size_t>(horizon));
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(horizon, horizon);
  for (Index i = 0; i < horizon; ++i)
    for (Index j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (Index k = 0; k <= j; ++k) {
        const double s = spec.label_std(k);
        acc += psi[static_cast<std::size_t>(i - k)] * psi[static_cast<std::size_t>(j - k)] * s * s;
      }
      cov(i, j) = cov(j, i) = acc;
    }
  return cov;
}

}  // namespace qdf
