// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_STATS_HPP_
#define HYDRA_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "hydra/error.hpp"

namespace hydra::stats {

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

template <typename Range>
double mean(const Range& xs) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    s += x;
    ++n;
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

/// Ordinary least squares of y on x with intercept. R^2 = 1 - SS_res/SS_tot,
/// reported as 0 when y is constant.
inline Regression ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::DegenerateRegression, "x/y length mismatch");
  if (x.size() < 3) {
    throw Error(ErrorKind::DegenerateRegression,
                "need at least 3 points, have " + std::to_string(x.size()));
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::DegenerateRegression, "x has zero variance");
  Regression r;
  r.n = x.size();
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - (r.intercept + r.slope * x[i]);
      ss_res += e * e;
    }
    r.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return r;
}

/// Pearson correlation; empty when either side has zero variance or n < 2.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Sample standard deviation (n - 1 denominator).
template <typename Range>
double stddev(const Range& xs) {
  const double m = mean(xs);
  double ss = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    ss += (x - m) * (x - m);
    ++n;
  }
  return n < 2 ? 0.0 : std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace hydra::stats

#endif  // HYDRA_STATS_HPP_
