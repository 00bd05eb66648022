#pragma once

// Brute-force partial correlation: two separate least-squares fits through
// the normal equations, then Pearson correlation computed from sums.

#include <Eigen/Dense>

#include <cmath>

#include "qdf/data.hpp"

namespace qdf::testing {

inline Eigen::VectorXd normal_equation_residual(const Eigen::MatrixXd& design,
                                                const Eigen::VectorXd& y) {
  const Eigen::VectorXd beta =
      (design.transpose() * design).fullPivLu().solve(design.transpose() * y);
  return y - design * beta;
}

inline double naive_partial_correlation(const WindowSet& windows, Index t, Index t2,
                                        Index variable) {
  const auto n = static_cast<Index>(windows.size());
  Eigen::MatrixXd design(n, windows.history() + 1);
  Eigen::VectorXd a(n), b(n);
  for (Index i = 0; i < n; ++i) {
    const auto w = static_cast<std::size_t>(i);
    const Eigen::MatrixXd x = windows.x(w);
    const Eigen::MatrixXd y = windows.y(w);
    design(i, 0) = 1.0;
    for (Index h = 0; h < windows.history(); ++h) design(i, h + 1) = x(h, variable);
    a(i) = y(t, variable);
    b(i) = y(t2, variable);
  }
  const Eigen::VectorXd ra = normal_equation_residual(design, a);
  const Eigen::VectorXd rb = normal_equation_residual(design, b);
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (Index i = 0; i < n; ++i) {
    sa += ra(i);
    sb += rb(i);
    saa += ra(i) * ra(i);
    sbb += rb(i) * rb(i);
    sab += ra(i) * rb(i);
  }
  const double dn = static_cast<double>(n);
  const double cov = sab - sa * sb / dn;
  return cov / std::sqrt((saa - sa * sa / dn) * (sbb - sb * sb / dn));
}

}  // namespace qdf::testing
