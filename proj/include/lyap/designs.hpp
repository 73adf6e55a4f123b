#pragma once

// The three control-field design laws: proportional feedback, total-power
// constrained, and per-field strength constrained (bang-bang), together with
// the sensitivity coefficients T_n they all share.

#include "lyap/qcore.hpp"

#include <deque>
#include <optional>
#include <variant>
#include <vector>

namespace lyap {

// Below this, sums of squares / individual coefficients count as zero when
// selecting the switched-off branch of the constrained laws.
inline constexpr double kZeroThreshold = 1e-20;

/// Free Hamiltonian, control Hamiltonians H_n, Lyapunov observable P and an
/// optional pure target state. Requires [P, H0] = 0 unless the problem was
/// explicitly perturbed (relaxed_commutation).
struct ControlProblem {
  OperatorMatrix h0;
  std::vector<OperatorMatrix> controls;
  OperatorMatrix lyapunov_observable;
  std::optional<DensityMatrix> target;
  bool relaxed_commutation = false;

  Eigen::Index dim() const { return h0.rows(); }
  std::size_t num_controls() const { return controls.size(); }

  void validate() const {
    if (!is_hermitian(h0) || !is_hermitian(lyapunov_observable)) {
      throw std::invalid_argument("ControlProblem: operators must be Hermitian");
    }
    for (const auto& h : controls) {
      if (h.rows() != dim() || !is_hermitian(h)) {
        throw std::invalid_argument(
            "ControlProblem: control Hamiltonians must be Hermitian and share "
            "the problem dimension");
      }
    }
    if (lyapunov_observable.rows() != dim()) {
      throw std::invalid_argument("ControlProblem: dimension mismatch");
    }
    if (!relaxed_commutation &&
        commutator(lyapunov_observable, h0).cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument(
          "ControlProblem: [P, H0] must vanish (construct P from H0 "
          "eigenvectors)");
    }
    if (target && target->dim() != dim()) {
      throw std::invalid_argument("ControlProblem: target dimension mismatch");
    }
  }
};

struct Conventional {
  double k;  // f_n = -K T_n
};
struct PowerConstrained {
  double w_max;  // sum f_n^2 <= W_max
};
struct StrengthConstrained {
  double s;  // |f_n| <= S
};
using ControlLaw = std::variant<Conventional, PowerConstrained, StrengthConstrained>;

/// A design law plus the switch-off threshold on the distance to target and
/// an optional trailing-window field-averaging duration (anti-chattering).
struct ControlDesign {
  ControlLaw law;
  double epsilon = 1e-3;
  std::optional<double> averaging_window;

  void validate() const {
    if (epsilon <= 0.0) {
      throw std::invalid_argument("ControlDesign: epsilon must be positive");
    }
    std::visit(
        [](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          double v;
          if constexpr (std::is_same_v<L, Conventional>) v = l.k;
          else if constexpr (std::is_same_v<L, PowerConstrained>) v = l.w_max;
          else v = l.s;
          if (v <= 0.0) {
            throw std::invalid_argument(
                "ControlDesign: law parameter must be positive");
          }
        },
        law);
    if (averaging_window && *averaging_window <= 0.0) {
      throw std::invalid_argument(
          "ControlDesign: averaging window must be positive");
    }
  }
};

using FieldVector = Eigen::VectorXd;

/// Sensitivity coefficients T_n = Tr(-i rho [P, H_n]). Each T_n is real for
/// Hermitian inputs; the imaginary residue is checked and discarded.
inline FieldVector compute_T(const DensityMatrix& rho,
                             const ControlProblem& problem) {
  if (rho.dim() != problem.dim()) {
    throw std::invalid_argument("compute_T: dimension mismatch");
  }
  const Complex minus_i(0.0, -1.0);
  FieldVector t(problem.num_controls());
  for (std::size_t n = 0; n < problem.num_controls(); ++n) {
    const Complex tr =
        minus_i *
        (rho.mat() * commutator(problem.lyapunov_observable, problem.controls[n]))
            .trace();
    if (std::abs(tr.imag()) > kImagResidueTol) {
      throw std::runtime_error(
          "compute_T: imaginary residue above tolerance (non-Hermitian "
          "inputs?)");
    }
    t(static_cast<Eigen::Index>(n)) = tr.real();
  }
  return t;
}

/// Proportional feedback f_n = -K T_n.
inline FieldVector conventional_fields(const FieldVector& t, double k) {
  return -k * t;
}

/// Fields on the sphere sum f_n^2 = W_max oriented opposite T; zero when all
/// T_n vanish.
inline FieldVector power_constrained_fields(const FieldVector& t,
                                            double w_max) {
  const double sum_sq = t.squaredNorm();
  if (sum_sq < kZeroThreshold) {
    return FieldVector::Zero(t.size());
  }
  return (-std::sqrt(w_max) / std::sqrt(sum_sq)) * t;
}

/// Bang-bang fields f_n = -S sign(T_n).
inline FieldVector bang_bang_fields(const FieldVector& t, double s) {
  FieldVector f(t.size());
  for (Eigen::Index n = 0; n < t.size(); ++n) {
    f(n) = std::abs(t(n)) <= kZeroThreshold ? 0.0 : (t(n) > 0.0 ? -s : s);
  }
  return f;
}

inline FieldVector fields_for(const ControlLaw& law, const FieldVector& t) {
  return std::visit(
      [&](const auto& l) -> FieldVector {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, Conventional>) {
          return conventional_fields(t, l.k);
        } else if constexpr (std::is_same_v<L, PowerConstrained>) {
          return power_constrained_fields(t, l.w_max);
        } else {
          return bang_bang_fields(t, l.s);
        }
      },
      law);
}

/// Analytic dV/dt = sum f_n T_n for the given law.
inline double analytic_vdot(const ControlLaw& law, const FieldVector& t) {
  return std::visit(
      [&](const auto& l) -> double {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, Conventional>) {
          return -l.k * t.squaredNorm();
        } else if constexpr (std::is_same_v<L, PowerConstrained>) {
          const double sum_sq = t.squaredNorm();
          return sum_sq < kZeroThreshold ? 0.0
                                         : -std::sqrt(l.w_max * sum_sq);
        } else {
          double sum_abs = 0.0;
          for (Eigen::Index n = 0; n < t.size(); ++n) {
            if (std::abs(t(n)) > kZeroThreshold) sum_abs += std::abs(t(n));
          }
          return -l.s * sum_abs;
        }
      },
      law);
}

/// D(rho, rho_f) = 1 - Tr(rho rho_f) for a pure target.
inline double distance_to_target(const DensityMatrix& rho,
                                 const ControlProblem& problem) {
  if (!problem.target) {
    throw std::invalid_argument("distance_to_target: problem has no target");
  }
  return 1.0 - (rho.mat() * problem.target->mat()).trace().real();
}

/// Trailing rectangular-window mean of a field time series sampled at `dt`.
/// Reshapes fast (chattering) oscillations to near zero and leaves slowly
/// varying fields unchanged up to discretization.
inline std::vector<FieldVector> reshape_average(
    const std::vector<FieldVector>& fields, double window, double dt) {
  if (dt <= 0.0 || window < dt) {
    throw std::invalid_argument(
        "reshape_average: window must span at least one time step");
  }
  const std::size_t span =
      std::max<std::size_t>(1, static_cast<std::size_t>(window / dt + 0.5));
  std::vector<FieldVector> out;
  out.reserve(fields.size());
  FieldVector acc;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i == 0) {
      acc = fields[0];
    } else {
      acc += fields[i];
      if (i >= span) acc -= fields[i - span];
    }
    const double count = static_cast<double>(std::min(i + 1, span));
    out.push_back(acc / count);
  }
  return out;
}

/// Incremental trailing-window averager used inside the trajectory loop when
/// ControlDesign::averaging_window is set.
class FieldAverager {
 public:
  FieldAverager(double window, double dt)
      : span_(std::max<std::size_t>(
            1, static_cast<std::size_t>(window / dt + 0.5))) {}

  FieldVector push(const FieldVector& raw) {
    if (acc_.size() == 0) acc_ = FieldVector::Zero(raw.size());
    recent_.push_back(raw);
    acc_ += raw;
    if (recent_.size() > span_) {
      acc_ -= recent_.front();
      recent_.pop_front();
    }
    return acc_ / static_cast<double>(recent_.size());
  }

 private:
  std::size_t span_;
  std::deque<FieldVector> recent_;
  FieldVector acc_;
};

}  // namespace lyap
