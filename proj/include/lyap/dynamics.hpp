#pragma once

// Closed (Liouville) and open (Lindblad) propagation under state-feedback
// control, with trajectory recording and switch-off latching.

#include "lyap/designs.hpp"
#include "lyap/qcore.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace lyap {

/// Spontaneous-emission channel: jump operator with decay rate gamma.
struct LindbladChannel {
  OperatorMatrix jump;
  double rate;

  void validate(Eigen::Index dim) const {
    if (rate < 0.0) {
      throw std::invalid_argument("LindbladChannel: rate must be >= 0");
    }
    if (jump.rows() != dim || jump.cols() != dim) {
      throw std::invalid_argument("LindbladChannel: dimension mismatch");
    }
  }
};

struct TrajectorySample {
  double t;
  FieldVector fields;
  double V;
  double W;       // sum f_n^2
  double metric;  // fidelity P_f or phonon number <n_a>
  bool switched_on;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::optional<double> stop_time;
};

struct IntegratorConfig {
  enum class Method { UnitaryStep, Rk4 };
  double dt = 0.01;
  Method method = Method::UnitaryStep;
  double t_max = 400.0;

  void validate() const {
    if (dt <= 0.0 || t_max < dt) {
      throw std::invalid_argument(
          "IntegratorConfig: require dt > 0 and t_max >= dt");
    }
  }
};

namespace detail {

// Unvalidated variants used inside propagation loops, where the state can
// accumulate harmless roundoff beyond the strict DensityMatrix tolerances.

inline double expectation_raw(const OperatorMatrix& p,
                              const OperatorMatrix& rho) {
  return (p * rho).trace().real();
}

inline FieldVector compute_T_raw(const OperatorMatrix& rho,
                                 const std::vector<OperatorMatrix>& pc) {
  // pc[n] = -i [P, H_n], precomputed.
  FieldVector t(static_cast<Eigen::Index>(pc.size()));
  for (std::size_t n = 0; n < pc.size(); ++n) {
    t(static_cast<Eigen::Index>(n)) = (rho * pc[n]).trace().real();
  }
  return t;
}

inline std::vector<OperatorMatrix> precompute_sensitivity_ops(
    const ControlProblem& problem) {
  std::vector<OperatorMatrix> pc;
  pc.reserve(problem.num_controls());
  const Complex minus_i(0.0, -1.0);
  for (const auto& h : problem.controls) {
    pc.push_back(minus_i * commutator(problem.lyapunov_observable, h));
  }
  return pc;
}

inline OperatorMatrix unitary_step_raw(const OperatorMatrix& rho,
                                       const OperatorMatrix& h_total,
                                       double dt) {
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(h_total);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("unitary step: eigendecomposition failed");
  }
  const Eigen::VectorXcd phases =
      (Complex(0.0, -dt) * es.eigenvalues().cast<Complex>()).array().exp();
  const OperatorMatrix u =
      es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return u * rho * u.adjoint();
}

inline OperatorMatrix lindblad_rhs_raw(const OperatorMatrix& rho,
                                       const OperatorMatrix& h,
                                       const std::vector<LindbladChannel>& ch,
                                       const std::vector<OperatorMatrix>& jdj) {
  const Complex minus_i(0.0, -1.0);
  OperatorMatrix out = minus_i * (h * rho - rho * h);
  for (std::size_t i = 0; i < ch.size(); ++i) {
    out += ch[i].rate * (ch[i].jump * rho * ch[i].jump.adjoint() -
                         0.5 * (jdj[i] * rho + rho * jdj[i]));
  }
  return out;
}

inline OperatorMatrix rk4_lindblad_step_raw(
    const OperatorMatrix& rho, const OperatorMatrix& h,
    const std::vector<LindbladChannel>& ch,
    const std::vector<OperatorMatrix>& jdj, double dt) {
  const OperatorMatrix k1 = lindblad_rhs_raw(rho, h, ch, jdj);
  const OperatorMatrix k2 = lindblad_rhs_raw(rho + 0.5 * dt * k1, h, ch, jdj);
  const OperatorMatrix k3 = lindblad_rhs_raw(rho + 0.5 * dt * k2, h, ch, jdj);
  const OperatorMatrix k4 = lindblad_rhs_raw(rho + dt * k3, h, ch, jdj);
  return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// One exact unitary step exp(-i H dt) rho exp(+i H dt) via Hermitian
/// eigendecomposition. Trace- and spectrum-preserving up to roundoff.
inline DensityMatrix step_closed(const DensityMatrix& rho,
                                 const OperatorMatrix& h_total, double dt) {
  if (!is_hermitian(h_total)) {
    throw std::invalid_argument("step_closed: Hamiltonian must be Hermitian");
  }
  return DensityMatrix(detail::unitary_step_raw(rho.mat(), h_total, dt));
}

/// One RK4 step of the Lindblad master equation.
inline DensityMatrix step_lindblad(const DensityMatrix& rho,
                                   const OperatorMatrix& h_total,
                                   const std::vector<LindbladChannel>& channels,
                                   double dt) {
  if (!is_hermitian(h_total)) {
    throw std::invalid_argument("step_lindblad: Hamiltonian must be Hermitian");
  }
  std::vector<OperatorMatrix> jdj;
  for (const auto& c : channels) {
    c.validate(rho.dim());
    jdj.push_back(c.jump.adjoint() * c.jump);
  }
  OperatorMatrix next =
      detail::rk4_lindblad_step_raw(rho.mat(), h_total, channels, jdj, dt);
  if (std::abs(next.trace().real() - 1.0) > 1e-8) {
    throw std::runtime_error("step_lindblad: trace drift exceeds per-step "
                             "tolerance (dt too large?)");
  }
  // Symmetrize away roundoff so repeated stepping stays Hermitian.
  next = 0.5 * (next + next.adjoint().eval());
  return DensityMatrix(std::move(next));
}

using StopRule = std::function<bool(const OperatorMatrix& rho)>;
using MetricFn = std::function<double(const OperatorMatrix& rho)>;

struct RunOptions {
  StopRule stop;        // default: D(rho, rho_f) < design.epsilon
  MetricFn metric;      // default: fidelity Tr(rho rho_f)
  bool continue_after_stop = false;  // keep recording free evolution to t_max
};

/// Propagate under state-feedback control: per step compute T, apply the
/// design law (fields held constant over dt), advance, record. Once the stop
/// rule fires the fields are latched to zero for the rest of the run.
inline Trajectory run_trajectory(const ControlProblem& problem,
                                 const ControlDesign& design,
                                 const DensityMatrix& rho0,
                                 const std::vector<LindbladChannel>& channels,
                                 const IntegratorConfig& cfg,
                                 const RunOptions& opts = {}) {
  problem.validate();
  design.validate();
  cfg.validate();
  if (rho0.dim() != problem.dim()) {
    throw std::invalid_argument("run_trajectory: dimension mismatch");
  }

  MetricFn metric = opts.metric;
  StopRule stop = opts.stop;
  if (!metric || !stop) {
    if (!problem.target) {
      throw std::invalid_argument(
          "run_trajectory: default stop rule and metric need a target state");
    }
    const OperatorMatrix target = problem.target->mat();
    if (!metric) {
      metric = [target](const OperatorMatrix& rho) {
        return (rho * target).trace().real();
      };
    }
    if (!stop) {
      const double eps = design.epsilon;
      stop = [target, eps](const OperatorMatrix& rho) {
        return 1.0 - (rho * target).trace().real() < eps;
      };
    }
  }

  const auto pc = detail::precompute_sensitivity_ops(problem);
  std::vector<OperatorMatrix> jdj;
  for (const auto& c : channels) {
    c.validate(problem.dim());
    jdj.push_back(c.jump.adjoint() * c.jump);
  }
  const bool open_system = !channels.empty();
  const bool rk4 =
      open_system || cfg.method == IntegratorConfig::Method::Rk4;

  std::optional<FieldAverager> averager;
  if (design.averaging_window) {
    averager.emplace(*design.averaging_window, cfg.dt);
  }

  Trajectory traj;
  OperatorMatrix state = rho0.mat();
  double t = 0.0;
  bool stopped = false;
  std::optional<double> stop_time;
  const std::size_t n_steps = static_cast<std::size_t>(
      std::llround(cfg.t_max / cfg.dt));
  traj.samples.reserve(n_steps + 1);

  for (std::size_t step = 0;; ++step) {
    if (!stopped && stop(state)) {
      stopped = true;
      stop_time = t;
      if (!opts.continue_after_stop) {
        FieldVector zero = FieldVector::Zero(
            static_cast<Eigen::Index>(problem.num_controls()));
        traj.samples.push_back(
            {t, zero, detail::expectation_raw(problem.lyapunov_observable, state),
             0.0, metric(state), false});
        break;
      }
    }
    if (step >= n_steps) {
      FieldVector zero = FieldVector::Zero(
          static_cast<Eigen::Index>(problem.num_controls()));
      traj.samples.push_back(
          {t, zero, detail::expectation_raw(problem.lyapunov_observable, state),
           0.0, metric(state), false});
      break;
    }

    FieldVector f;
    if (stopped) {
      f = FieldVector::Zero(static_cast<Eigen::Index>(problem.num_controls()));
    } else {
      f = fields_for(design.law, detail::compute_T_raw(state, pc));
      if (averager) f = averager->push(f);
    }
    traj.samples.push_back(
        {t, f, detail::expectation_raw(problem.lyapunov_observable, state),
         f.squaredNorm(), metric(state), !stopped});

    OperatorMatrix h = problem.h0;
    for (std::size_t n = 0; n < problem.num_controls(); ++n) {
      const double fn = f(static_cast<Eigen::Index>(n));
      if (fn != 0.0) h += fn * problem.controls[n];
    }
    if (rk4) {
      state = detail::rk4_lindblad_step_raw(state, h, channels, jdj, cfg.dt);
      const double drift = std::abs(state.trace().real() - 1.0);
      if (drift > 1e-6) {
        throw std::runtime_error(
            "run_trajectory: cumulative trace drift exceeds 1e-6 (dt too "
            "large)");
      }
    } else {
      state = detail::unitary_step_raw(state, h, cfg.dt);
    }
    t = static_cast<double>(step + 1) * cfg.dt;
  }
  traj.stop_time = stop_time;
  return traj;
}

/// Replay a precomputed field schedule open-loop (no state feedback) on a
/// possibly perturbed or dissipative system. Returns the final state, with
/// relaxed numerical tolerances on the way out.
inline OperatorMatrix replay_schedule(
    const ControlProblem& problem, const std::vector<FieldVector>& schedule,
    const DensityMatrix& rho0, const std::vector<LindbladChannel>& channels,
    double dt) {
  std::vector<OperatorMatrix> jdj;
  for (const auto& c : channels) {
    c.validate(problem.dim());
    jdj.push_back(c.jump.adjoint() * c.jump);
  }
  const bool open_system = !channels.empty();
  OperatorMatrix state = rho0.mat();
  for (const auto& f : schedule) {
    OperatorMatrix h = problem.h0;
    for (std::size_t n = 0; n < problem.num_controls(); ++n) {
      const double fn = f(static_cast<Eigen::Index>(n));
      if (fn != 0.0) h += fn * problem.controls[n];
    }
    if (open_system) {
      state = detail::rk4_lindblad_step_raw(state, h, channels, jdj, dt);
    } else {
      state = detail::unitary_step_raw(state, h, dt);
    }
  }
  return state;
}

}  // namespace lyap
