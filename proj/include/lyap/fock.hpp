#pragma once

// Truncated Fock-space ladder operators and thermal states.

#include "lyap/qcore.hpp"

namespace lyap {

/// Ladder operators of one bosonic mode truncated to `dim` number states.
struct FockOperators {
  Eigen::Index dim;
  OperatorMatrix lowering;  // a
  OperatorMatrix raising;   // a^dag
  OperatorMatrix number;    // a^dag a
};

inline FockOperators fock_operators(Eigen::Index dim) {
  if (dim < 2) {
    throw std::invalid_argument("fock_operators: dim must be >= 2");
  }
  OperatorMatrix a = OperatorMatrix::Zero(dim, dim);
  for (Eigen::Index m = 1; m < dim; ++m) {
    a(m - 1, m) = std::sqrt(static_cast<double>(m));
  }
  // Build the number operator with exact integer entries rather than as
  // raising * lowering, which would put sqrt(m)^2 roundoff on the diagonal.
  OperatorMatrix n = OperatorMatrix::Zero(dim, dim);
  for (Eigen::Index m = 0; m < dim; ++m) {
    n(m, m) = static_cast<double>(m);
  }
  return FockOperators{dim, a, a.adjoint(), std::move(n)};
}

/// Thermal state with mean occupation nbar, truncated to `dim` levels and
/// renormalized to unit trace. The realized mean is slightly below nbar.
inline DensityMatrix thermal_state(double nbar, Eigen::Index dim) {
  if (nbar < 0.0) {
    throw std::invalid_argument("thermal_state: nbar must be >= 0");
  }
  if (dim < 2) {
    throw std::invalid_argument("thermal_state: dim must be >= 2");
  }
  Eigen::VectorXd weights(dim);
  const double ratio = nbar / (1.0 + nbar);
  double w = 1.0;
  for (Eigen::Index m = 0; m < dim; ++m) {
    weights(m) = w;
    w *= ratio;
  }
  weights /= weights.sum();
  OperatorMatrix rho = OperatorMatrix::Zero(dim, dim);
  rho.diagonal() = weights.cast<Complex>();
  return DensityMatrix(std::move(rho));
}

}  // namespace lyap
