#pragma once

// Dense complex operator algebra and quantum-state primitives shared by the
// control-design, dynamics and experiment modules.

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace lyap {

using Complex = std::complex<double>;
using OperatorMatrix = Eigen::MatrixXcd;

// Tolerances used across the library. Fixed here as the single source of
// truth so type invariants and tests agree.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kEigenvalueTol = 1e-10;
inline constexpr double kImagResidueTol = 1e-10;

inline bool is_hermitian(const OperatorMatrix& a, double tol = kHermitianTol) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

/// Unit-trace Hermitian positive-semidefinite matrix. Invariants are checked
/// on construction; instances are immutable afterwards.
class DensityMatrix {
 public:
  explicit DensityMatrix(OperatorMatrix rho) : op_(std::move(rho)) {
    if (op_.rows() != op_.cols()) {
      throw std::invalid_argument("DensityMatrix: matrix must be square");
    }
    if (std::abs(op_.trace() - Complex(1.0, 0.0)) > kTraceTol) {
      throw std::invalid_argument("DensityMatrix: trace must be 1, got " +
                                  std::to_string(op_.trace().real()));
    }
    if (!is_hermitian(op_)) {
      throw std::invalid_argument("DensityMatrix: matrix must be Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(op_,
                                                     Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kEigenvalueTol) {
      throw std::invalid_argument(
          "DensityMatrix: matrix must be positive semidefinite (min "
          "eigenvalue " +
          std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
  }

  const OperatorMatrix& mat() const { return op_; }
  Eigen::Index dim() const { return op_.rows(); }

  /// Pure-state projector |phi><phi|; normalizes phi.
  static DensityMatrix pure(const Eigen::VectorXcd& phi) {
    Eigen::VectorXcd v = phi.normalized();
    return DensityMatrix(v * v.adjoint());
  }

 private:
  OperatorMatrix op_;
};

inline OperatorMatrix commutator(const OperatorMatrix& a,
                                 const OperatorMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("commutator: dimension mismatch");
  }
  return a * b - b * a;
}

/// Tr(P rho) for Hermitian P. The imaginary residue of the trace must be
/// negligible; it is discarded.
inline double expectation(const OperatorMatrix& p, const DensityMatrix& rho) {
  if (p.rows() != rho.dim()) {
    throw std::invalid_argument("expectation: dimension mismatch");
  }
  if (!is_hermitian(p)) {
    throw std::invalid_argument("expectation: observable must be Hermitian");
  }
  const Complex tr = (p * rho.mat()).trace();
  if (std::abs(tr.imag()) > kImagResidueTol) {
    throw std::runtime_error("expectation: imaginary residue " +
                             std::to_string(tr.imag()) + " above tolerance");
  }
  return tr.real();
}

/// Gell-Mann matrix lambda_n, n = 1..8.
inline OperatorMatrix gell_mann(int n) {
  const Complex i(0.0, 1.0);
  OperatorMatrix m = OperatorMatrix::Zero(3, 3);
  switch (n) {
    case 1: m(0, 1) = 1; m(1, 0) = 1; break;
    case 2: m(0, 1) = -i; m(1, 0) = i; break;
    case 3: m(0, 0) = 1; m(1, 1) = -1; break;
    case 4: m(0, 2) = 1; m(2, 0) = 1; break;
    case 5: m(0, 2) = -i; m(2, 0) = i; break;
    case 6: m(1, 2) = 1; m(2, 1) = 1; break;
    case 7: m(1, 2) = -i; m(2, 1) = i; break;
    case 8: {
      const double s = 1.0 / std::sqrt(3.0);
      m(0, 0) = s; m(1, 1) = s; m(2, 2) = -2.0 * s;
      break;
    }
    default:
      throw std::invalid_argument("gell_mann: index must be in 1..8");
  }
  return m;
}

/// Kronecker product; the first factor indexes blocks (row-major block
/// convention).
inline OperatorMatrix tensor_product(const OperatorMatrix& a,
                                     const OperatorMatrix& b) {
  OperatorMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline double purity(const DensityMatrix& rho) {
  return (rho.mat() * rho.mat()).trace().real();
}

}  // namespace lyap
