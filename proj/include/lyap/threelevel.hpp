#pragma once

// The three-level benchmark system, random initial-state sampling, and the
// robustness Monte-Carlo studies (free-Hamiltonian perturbations and
// spontaneous-emission decoherence).

#include "lyap/dynamics.hpp"

#include <algorithm>
#include <random>
#include <thread>

namespace lyap {

/// Benchmark problem. Basis ordering follows the printed column convention:
/// the first basis vector is level |3> (the target), then |2>, then |1>.
inline ControlProblem build_three_level() {
  ControlProblem p;
  p.h0 = OperatorMatrix::Zero(3, 3);
  p.h0.diagonal() << Complex(1.5), Complex(1.0), Complex(0.0);
  p.lyapunov_observable = OperatorMatrix::Zero(3, 3);
  p.lyapunov_observable.diagonal() << Complex(0.0), Complex(1.0), Complex(1.0);
  p.controls = {gell_mann(1), gell_mann(2), gell_mann(4), gell_mann(5)};
  Eigen::VectorXcd target(3);
  target << 1.0, 0.0, 0.0;
  p.target = DensityMatrix::pure(target);
  return p;
}

/// Uniform superposition (|1> + |2> + |3>) / sqrt(3), the benchmark initial
/// state.
inline DensityMatrix uniform_superposition_state() {
  Eigen::VectorXcd phi(3);
  phi << 1.0, 1.0, 1.0;
  return DensityMatrix::pure(phi);
}

/// Decay channels |1><3| and |2><3| with the given rates.
inline std::vector<LindbladChannel> three_level_decay_channels(double rate_to_1,
                                                               double rate_to_2) {
  OperatorMatrix to1 = OperatorMatrix::Zero(3, 3);
  to1(2, 0) = 1.0;  // |1><3|
  OperatorMatrix to2 = OperatorMatrix::Zero(3, 3);
  to2(1, 0) = 1.0;  // |2><3|
  return {{to1, rate_to_1}, {to2, rate_to_2}};
}

/// Random pure state R [r1 e^{i 2 pi r4}, r2 e^{i 2 pi r5}, r3 e^{i 2 pi r6}]
/// with r_i uniform on [0, 1]; redraws in the measure-zero degenerate case.
template <class Rng>
DensityMatrix sample_random_state(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const double r1 = u(rng), r2 = u(rng), r3 = u(rng);
    const double r4 = u(rng), r5 = u(rng), r6 = u(rng);
    const double norm_sq = r1 * r1 + r2 * r2 + r3 * r3;
    if (norm_sq < 1e-12) continue;
    const double two_pi = 2.0 * M_PI;
    Eigen::VectorXcd phi(3);
    phi << r1 * std::exp(Complex(0.0, two_pi * r4)),
        r2 * std::exp(Complex(0.0, two_pi * r5)),
        r3 * std::exp(Complex(0.0, two_pi * r6));
    phi /= std::sqrt(norm_sq);
    return DensityMatrix(phi * phi.adjoint());
  }
}

/// Free-Hamiltonian uncertainty delta * lambda_n.
struct PerturbationSpec {
  int generator_index;  // 1..8
  double delta;
};

inline ControlProblem perturbed_problem(const ControlProblem& base,
                                        const PerturbationSpec& pert) {
  if (pert.generator_index < 1 || pert.generator_index > 8) {
    throw std::invalid_argument("perturbed_problem: generator index in 1..8");
  }
  ControlProblem out = base;
  out.h0 = base.h0 + pert.delta * gell_mann(pert.generator_index);
  // [P, H0 + delta lambda_n] may no longer vanish; the design laws keep
  // using the original observable.
  out.relaxed_commutation = true;
  return out;
}

struct EnsembleResult {
  std::size_t n_states;
  double mean_fidelity;
  std::vector<double> per_state_fidelities;
  std::uint64_t seed;
};

namespace detail {

using M3 = Eigen::Matrix3cd;

struct ThreeLevelFast {
  M3 h0;
  std::array<M3, 4> controls;
  std::array<M3, 4> sens;    // -i [P, H_n]
  std::array<M3, 4> sens_t;  // transposed, for trace-by-elementwise-sum
  M3 h0_replay;              // possibly perturbed
  std::array<M3, 2> jump;
  std::array<M3, 2> jdj;
  std::array<double, 2> rate{0.0, 0.0};
  std::size_t n_channels = 0;
  // Rank-one fast path: jump = v |a><b| (single nonzero entry), giving an
  // O(1) dissipator instead of five matrix products per channel.
  bool single_entry = true;
  std::array<int, 2> jump_row{0, 0}, jump_col{0, 0};
  std::array<double, 2> amp2{0.0, 0.0};  // rate * |v|^2
};

inline ThreeLevelFast make_fast(const ControlProblem& nominal,
                                const ControlProblem& replay,
                                const std::vector<LindbladChannel>& channels) {
  if (channels.size() > 2) {
    throw std::invalid_argument("three-level ensemble: at most two channels");
  }
  ThreeLevelFast f;
  f.h0 = nominal.h0;
  f.h0_replay = replay.h0;
  const Complex minus_i(0.0, -1.0);
  for (int n = 0; n < 4; ++n) {
    f.controls[static_cast<std::size_t>(n)] = nominal.controls[static_cast<std::size_t>(n)];
    f.sens[static_cast<std::size_t>(n)] =
        minus_i * commutator(nominal.lyapunov_observable,
                             nominal.controls[static_cast<std::size_t>(n)]);
    f.sens_t[static_cast<std::size_t>(n)] =
        f.sens[static_cast<std::size_t>(n)].transpose();
  }
  f.n_channels = channels.size();
  for (std::size_t i = 0; i < channels.size(); ++i) {
    f.jump[i] = channels[i].jump;
    f.jdj[i] = (channels[i].jump.adjoint() * channels[i].jump).eval();
    f.rate[i] = channels[i].rate;

    int nonzero = 0;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (std::abs(f.jump[i](r, c)) != 0.0) {
          ++nonzero;
          f.jump_row[i] = r;
          f.jump_col[i] = c;
          f.amp2[i] = f.rate[i] * std::norm(f.jump[i](r, c));
        }
      }
    }
    if (nonzero != 1) f.single_entry = false;
  }
  return f;
}

inline M3 unitary_step_3(const M3& rho, const M3& h, double dt) {
  Eigen::SelfAdjointEigenSolver<M3> es;
  es.computeDirect(h);
  Eigen::Vector3cd phases =
      (Complex(0.0, -dt) * es.eigenvalues().cast<Complex>()).array().exp();
  const M3 u = es.eigenvectors() * phases.asDiagonal() *
               es.eigenvectors().adjoint();
  return u * rho * u.adjoint();
}

inline M3 lindblad_rhs_3(const ThreeLevelFast& f, const M3& rho, const M3& h) {
  const Complex minus_i(0.0, -1.0);
  M3 out = minus_i * (h * rho - rho * h);
  for (std::size_t i = 0; i < f.n_channels; ++i) {
    if (f.single_entry) {
      // jump = v |a><b|: LrhoL^dag = rate|v|^2 rho_bb |a><a| and
      // {L^dag L, rho} touches only row b and column b.
      const int a = f.jump_row[i], b = f.jump_col[i];
      const double g = f.amp2[i];
      out(a, a) += g * rho(b, b);
      for (int c = 0; c < 3; ++c) {
        out(b, c) -= 0.5 * g * rho(b, c);
        out(c, b) -= 0.5 * g * rho(c, b);
      }
    } else {
      out.noalias() += f.rate[i] * (f.jump[i] * rho * f.jump[i].adjoint());
      out.noalias() -= (0.5 * f.rate[i]) * (f.jdj[i] * rho + rho * f.jdj[i]);
    }
  }
  return out;
}

// Closed-loop nominal pass: record the field schedule up to switch-off (or
// the horizon when the state never converges).
inline std::vector<Eigen::Vector4d> nominal_schedule_3(
    const ThreeLevelFast& f, const ControlDesign& design, const M3& rho0,
    const IntegratorConfig& cfg) {
  std::vector<Eigen::Vector4d> schedule;
  const std::size_t n_steps =
      static_cast<std::size_t>(std::llround(cfg.t_max / cfg.dt));
  schedule.reserve(n_steps);
  std::optional<FieldAverager> averager;
  if (design.averaging_window) {
    averager.emplace(*design.averaging_window, cfg.dt);
  }
  M3 rho = rho0;
  for (std::size_t step = 0; step < n_steps; ++step) {
    if (1.0 - rho(0, 0).real() < design.epsilon) break;
    Eigen::Vector4d t;
    for (int n = 0; n < 4; ++n) {
      // Tr(rho S) as an elementwise sum against the pre-transposed S.
      t(n) = rho.cwiseProduct(f.sens_t[static_cast<std::size_t>(n)])
                 .sum()
                 .real();
    }
    FieldVector fv = fields_for(design.law, t);
    if (averager) fv = averager->push(fv);
    const Eigen::Vector4d fields = fv;
    M3 h = f.h0;
    for (int n = 0; n < 4; ++n) {
      h += fields(n) * f.controls[static_cast<std::size_t>(n)];
    }
    rho = unitary_step_3(rho, h, cfg.dt);
    schedule.push_back(fields);
  }
  return schedule;
}

// Open-loop replay of a schedule on the (possibly perturbed, possibly
// dissipative) system; returns the fidelity at the schedule's end.
inline double replay_fidelity_3(const ThreeLevelFast& f,
                                const std::vector<Eigen::Vector4d>& schedule,
                                const M3& rho0, double dt) {
  M3 rho = rho0;
  const bool open_system = f.n_channels > 0;
  for (const auto& fields : schedule) {
    M3 h = f.h0_replay;
    for (int n = 0; n < 4; ++n) {
      h += fields(n) * f.controls[static_cast<std::size_t>(n)];
    }
    if (open_system) {
      const M3 k1 = lindblad_rhs_3(f, rho, h);
      const M3 k2 = lindblad_rhs_3(f, (rho + 0.5 * dt * k1).eval(), h);
      const M3 k3 = lindblad_rhs_3(f, (rho + 0.5 * dt * k2).eval(), h);
      const M3 k4 = lindblad_rhs_3(f, (rho + dt * k3).eval(), h);
      rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } else {
      rho = unitary_step_3(rho, h, dt);
    }
  }
  return std::clamp(rho(0, 0).real(), 0.0, 1.0);
}

}  // namespace detail

/// Master-seeded per-member generator; index j gets an independent stream so
/// parallel and serial execution agree member by member.
inline std::mt19937_64 member_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Average fidelity over random initial states. For each state the field
/// schedule is computed closed-loop on the nominal decoherence-free system,
/// then replayed open-loop with the perturbation and channels applied;
/// fidelity is evaluated at the nominal schedule's end.
inline EnsembleResult average_fidelity(
    const ControlDesign& design, const std::optional<PerturbationSpec>& pert,
    const std::vector<LindbladChannel>& channels, std::size_t n_states,
    const IntegratorConfig& cfg, std::uint64_t seed,
    unsigned n_threads = std::thread::hardware_concurrency()) {
  if (n_states < 1) {
    throw std::invalid_argument("average_fidelity: n_states must be >= 1");
  }
  design.validate();
  cfg.validate();
  const ControlProblem nominal = build_three_level();
  const ControlProblem replay =
      pert ? perturbed_problem(nominal, *pert) : nominal;
  const detail::ThreeLevelFast fast =
      detail::make_fast(nominal, replay, channels);

  std::vector<double> fidelities(n_states);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      auto rng = member_rng(seed, j);
      const detail::M3 rho0 = sample_random_state(rng).mat();
      const auto schedule =
          detail::nominal_schedule_3(fast, design, rho0, cfg);
      fidelities[j] = detail::replay_fidelity_3(fast, schedule, rho0, cfg.dt);
    }
  };

  n_threads = std::max(1u, std::min<unsigned>(n_threads,
                                              static_cast<unsigned>(n_states)));
  if (n_threads == 1) {
    worker(0, n_states);
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (n_states + n_threads - 1) / n_threads;
    for (unsigned i = 0; i < n_threads; ++i) {
      const std::size_t begin = i * chunk;
      const std::size_t end = std::min(n_states, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back(worker, begin, end);
    }
    for (auto& th : threads) th.join();
  }

  EnsembleResult out;
  out.n_states = n_states;
  out.per_state_fidelities = std::move(fidelities);
  out.mean_fidelity = 0.0;
  for (double f : out.per_state_fidelities) out.mean_fidelity += f;
  out.mean_fidelity /= static_cast<double>(n_states);
  out.seed = seed;
  return out;
}

}  // namespace lyap
