// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_LINALG_HPP_
#define HYDRA_LINALG_HPP_

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace hydra {

using Vector = Eigen::VectorXd;
// Weight matrices are stored input-major: a row vector x maps to x * W, which
// we evaluate as W^T x on column vectors.
using Matrix = Eigen::MatrixXd;

using TokenId = int;
using Tokens = std::vector<TokenId>;

inline Vector centred(const Vector& v) {
  if (v.size() == 0) return v;
  return v.array() - v.mean();
}

/// Index of the largest entry; ties resolve to the lowest index.
inline Eigen::Index argmax(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

inline bool argmax_is_tied(const Vector& v) {
  const Eigen::Index best = argmax(v);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i != best && v[i] == v[best]) return true;
  }
  return false;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace hydra

#endif  // HYDRA_LINALG_HPP_
