#include "lyap/designs.hpp"
#include "lyap/fock.hpp"
#include "lyap/threelevel.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace lyap;

namespace {

std::mt19937_64 test_rng(777);

FieldVector random_t(Eigen::Index k, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  FieldVector t(k);
  for (Eigen::Index n = 0; n < k; ++n) t(n) = g(test_rng);
  return t;
}

}  // namespace

TEST_CASE("control problem validation") {
  ControlProblem problem = build_three_level();
  CHECK_NOTHROW(problem.validate());
  CHECK(problem.num_controls() == 4);

  ControlProblem broken = problem;
  broken.lyapunov_observable = gell_mann(1);  // does not commute with H0
  CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
  broken.relaxed_commutation = true;
  CHECK_NOTHROW(broken.validate());

  ControlProblem nonherm = problem;
  nonherm.controls[0] = Complex(0.0, 1.0) * gell_mann(1);
  CHECK_THROWS_AS(nonherm.validate(), std::invalid_argument);
}

TEST_CASE("control design validation") {
  ControlDesign d{Conventional{0.01}};
  CHECK_NOTHROW(d.validate());
  d.law = Conventional{0.0};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d.law = PowerConstrained{-1.0};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d.law = StrengthConstrained{0.007};
  d.epsilon = 0.0;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d.epsilon = 1e-3;
  d.averaging_window = -1.0;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("sensitivity coefficients T") {
  const ControlProblem problem = build_three_level();

  const FieldVector t_target = compute_T(*problem.target, problem);
  CHECK(t_target.cwiseAbs().maxCoeff() < 1e-14);

  const FieldVector t0 = compute_T(uniform_superposition_state(), problem);
  // Independent oracle: T_n = Tr(-i rho [P, H_n]) via explicit products.
  const DensityMatrix rho0 = uniform_superposition_state();
  for (Eigen::Index n = 0; n < 4; ++n) {
    const OperatorMatrix c = problem.lyapunov_observable * problem.controls[n] -
                             problem.controls[n] * problem.lyapunov_observable;
    const Complex oracle = Complex(0.0, -1.0) * (rho0.mat() * c).trace();
    CHECK(t0(n) == Catch::Approx(oracle.real()).margin(1e-14));
  }
  CHECK(t0(0) == Catch::Approx(0.0).margin(1e-14));
  CHECK(t0(1) == Catch::Approx(2.0 / 3.0).margin(1e-14));
  CHECK(t0(2) == Catch::Approx(0.0).margin(1e-14));
  CHECK(t0(3) == Catch::Approx(2.0 / 3.0).margin(1e-14));

  CHECK_THROWS_AS(compute_T(thermal_state(1.0, 4), problem),
                  std::invalid_argument);
}

TEST_CASE("conventional law") {
  CHECK(conventional_fields(FieldVector::Zero(4), 0.01).cwiseAbs().maxCoeff() ==
        0.0);

  FieldVector t(4);
  t << 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0;
  const FieldVector f = conventional_fields(t, 0.01);
  CHECK(f(1) == Catch::Approx(-1.0 / 150.0).margin(1e-16));
  CHECK(f(3) == Catch::Approx(-1.0 / 150.0).margin(1e-16));
  CHECK(f(0) == 0.0);

  for (int rep = 0; rep < 50; ++rep) {
    const FieldVector tr = random_t(4);
    const FieldVector fr = conventional_fields(tr, 0.01);
    for (Eigen::Index n = 0; n < 4; ++n) {
      CHECK(fr(n) * tr(n) <= 0.0);
    }
    CHECK(fr.dot(tr) == Catch::Approx(-0.01 * tr.squaredNorm()).margin(1e-14));
  }
}

TEST_CASE("power-constrained law") {
  CHECK(power_constrained_fields(FieldVector::Zero(4), 1e-4)
            .cwiseAbs()
            .maxCoeff() == 0.0);

  FieldVector t(4);
  t << 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0;
  const FieldVector f = power_constrained_fields(t, 1e-4);
  CHECK(f(1) == Catch::Approx(-0.01 / std::sqrt(2.0)).margin(1e-15));
  CHECK(f(3) == Catch::Approx(-0.01 / std::sqrt(2.0)).margin(1e-15));
  CHECK(f(0) == 0.0);

  // Single-control degenerate case reduces to bang-bang.
  FieldVector t1(1);
  t1 << 0.3;
  CHECK(power_constrained_fields(t1, 1e-4)(0) ==
        Catch::Approx(-0.01).margin(1e-15));

  for (int rep = 0; rep < 50; ++rep) {
    const FieldVector tr = random_t(4);
    const FieldVector fr = power_constrained_fields(tr, 1e-4);
    CHECK(fr.squaredNorm() == Catch::Approx(1e-4).epsilon(1e-12));
    CHECK(fr.dot(tr) ==
          Catch::Approx(-std::sqrt(1e-4 * tr.squaredNorm())).margin(1e-14));
  }
}

TEST_CASE("bang-bang law") {
  FieldVector t(4);
  t << 0.5, -0.2, 0.0, 1e-30;
  const double s = 0.007;
  const FieldVector f = bang_bang_fields(t, s);
  CHECK(f(0) == -s);
  CHECK(f(1) == s);
  CHECK(f(2) == 0.0);
  CHECK(f(3) == 0.0);

  CHECK(bang_bang_fields(FieldVector::Zero(4), s).cwiseAbs().maxCoeff() == 0.0);

  for (int rep = 0; rep < 50; ++rep) {
    const FieldVector tr = random_t(4);
    const FieldVector fr = bang_bang_fields(tr, s);
    double sum_abs = 0.0;
    for (Eigen::Index n = 0; n < 4; ++n) sum_abs += std::abs(tr(n));
    CHECK(fr.dot(tr) == Catch::Approx(-s * sum_abs).margin(1e-14));
    for (Eigen::Index n = 0; n < 4; ++n) {
      CHECK((fr(n) == 0.0 || std::abs(fr(n)) == s));
    }
  }
}

TEST_CASE("analytic dV/dt matches direct field-T contraction") {
  const std::vector<ControlLaw> laws{Conventional{0.01},
                                     PowerConstrained{1e-4},
                                     StrengthConstrained{0.007}};
  for (const auto& law : laws) {
    for (int rep = 0; rep < 100; ++rep) {
      const FieldVector tr = random_t(4, 0.3);
      const FieldVector fr = fields_for(law, tr);
      CHECK(analytic_vdot(law, tr) ==
            Catch::Approx(fr.dot(tr)).margin(1e-14));
      CHECK(analytic_vdot(law, tr) <= 0.0);
    }
  }
}

TEST_CASE("constrained laws are optimal over random feasible fields") {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const FieldVector tr = random_t(4);
    const double power_best =
        power_constrained_fields(tr, 1e-4).dot(tr);
    const double bang_best = bang_bang_fields(tr, 0.007).dot(tr);
    for (int trial = 0; trial < 500; ++trial) {
      FieldVector cand(4);
      for (Eigen::Index n = 0; n < 4; ++n) cand(n) = u(test_rng);
      const FieldVector power_cand =
          cand * (0.01 * std::abs(u(test_rng)) / cand.norm());
      CHECK(power_cand.dot(tr) >= power_best - 1e-12);
      const FieldVector bang_cand = 0.007 * cand;
      CHECK(bang_cand.dot(tr) >= bang_best - 1e-12);
    }
  }
}

TEST_CASE("distance to target") {
  const ControlProblem problem = build_three_level();
  CHECK(distance_to_target(*problem.target, problem) ==
        Catch::Approx(0.0).margin(1e-14));
  CHECK(distance_to_target(uniform_superposition_state(), problem) ==
        Catch::Approx(2.0 / 3.0).margin(1e-14));

  Eigen::VectorXcd orth(3);
  orth << 0.0, 1.0, 0.0;
  CHECK(distance_to_target(DensityMatrix::pure(orth), problem) ==
        Catch::Approx(1.0).margin(1e-14));

  ControlProblem no_target = problem;
  no_target.target.reset();
  CHECK_THROWS_AS(distance_to_target(uniform_superposition_state(), no_target),
                  std::invalid_argument);
}

TEST_CASE("field reshaping by trailing-window average") {
  const double dt = 0.01;
  FieldVector c(2);
  c << 0.3, -0.1;
  std::vector<FieldVector> constant(100, c);
  const auto same = reshape_average(constant, 0.2, dt);
  for (const auto& f : same) {
    CHECK((f - c).cwiseAbs().maxCoeff() < 1e-15);
  }

  // Fast square wave averages to near zero once the window fills.
  std::vector<FieldVector> square;
  FieldVector plus(1), minus(1);
  plus << 0.007;
  minus << -0.007;
  for (int i = 0; i < 200; ++i) square.push_back(i % 2 ? minus : plus);
  const auto smoothed = reshape_average(square, 0.2, dt);  // 20-sample window
  for (std::size_t i = 40; i < smoothed.size(); ++i) {
    CHECK(std::abs(smoothed[i](0)) < 1e-12);
  }

  // Window of one step is the identity transform.
  const auto identity = reshape_average(square, dt, dt);
  for (std::size_t i = 0; i < square.size(); ++i) {
    CHECK(identity[i](0) == square[i](0));
  }

  CHECK_THROWS_AS(reshape_average(square, 0.001, dt), std::invalid_argument);

  // The incremental averager agrees with the batch transform.
  FieldAverager avg(0.2, dt);
  for (std::size_t i = 0; i < square.size(); ++i) {
    CHECK(avg.push(square[i])(0) ==
          Catch::Approx(smoothed[i](0)).margin(1e-15));
  }
}
