#include "lyap/experiments.hpp"

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace lyap;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() {
    std::remove(path.c_str());
    std::remove((path + ".manifest.json").c_str());
  }
};

}  // namespace

TEST_CASE("config parsing: defaults and laws") {
  const ExperimentConfig cfg = parse_config("experiment = three-level\n");
  CHECK(cfg.experiment == ExperimentKind::ThreeLevel);
  REQUIRE(std::holds_alternative<Conventional>(cfg.design.law));
  CHECK(std::get<Conventional>(cfg.design.law).k == 0.01);
  CHECK(cfg.design.epsilon == 0.001);
  CHECK(cfg.integrator.dt == 0.01);
  CHECK(cfg.integrator.t_max == 400.0);
  CHECK(cfg.output_format == OutputFormat::Csv);

  const ExperimentConfig bb = parse_config(
      "experiment = three-level\n"
      "[design]\n"
      "law = bang-bang\n"
      "s = 0.007\n");
  REQUIRE(std::holds_alternative<StrengthConstrained>(bb.design.law));
  CHECK(std::get<StrengthConstrained>(bb.design.law).s == 0.007);

  const ExperimentConfig pw = parse_config(
      "experiment = three-level\n"
      "seed = 42\n"
      "[design]\n"
      "law = power\n"
      "w_max = 2e-4\n"
      "[integrator]\n"
      "dt = 0.005\n"
      "t_max = 150\n"
      "[output]\n"
      "path = traj.json\n"
      "format = json\n");
  REQUIRE(std::holds_alternative<PowerConstrained>(pw.design.law));
  CHECK(std::get<PowerConstrained>(pw.design.law).w_max == 2e-4);
  CHECK(pw.seed == 42);
  CHECK(pw.integrator.dt == 0.005);
  CHECK(pw.integrator.t_max == 150.0);
  CHECK(pw.output_path == "traj.json");
  CHECK(pw.output_format == OutputFormat::Json);
}

TEST_CASE("config parsing: experiment-specific defaults") {
  const ExperimentConfig rob = parse_config(
      "experiment = robustness-decoherence\n"
      "[ensemble]\n"
      "n_states = 200\n");
  CHECK(rob.integrator.dt == 1e-3);
  CHECK(rob.n_states == 200);
  REQUIRE(rob.gamma_grid.size() == 3);
  CHECK(rob.gamma_grid[0] == 0.0005);

  const ExperimentConfig cool = parse_config(
      "experiment = cooling\n"
      "[cooling]\n"
      "g_max = 0.191\n");
  CHECK(cool.integrator.dt == 2e-4);
  CHECK(cool.integrator.t_max == 60.0);
  CHECK(cool.cooling.g_max == 0.191);
  CHECK(cool.cooling_law == CoolingLawKind::BangBang);
}

TEST_CASE("config parsing: descriptive errors with line numbers") {
  auto message_of = [](const std::string& text) -> std::string {
    try {
      parse_config(text);
    } catch (const std::exception& e) {
      return e.what();
    }
    return "";
  };

  // Missing experiment.
  CHECK(message_of("[design]\nk = 0.01\n").find("experiment") !=
        std::string::npos);

  // Non-positive parameter names the key and the line.
  const std::string neg =
      message_of("experiment = three-level\n[design]\nw_max = -1\n");
  CHECK(neg.find("w_max") != std::string::npos);
  CHECK(neg.find("line 3") != std::string::npos);

  // Unknown key is rejected.
  const std::string unknown =
      message_of("experiment = three-level\n[design]\nbogus = 1\n");
  CHECK(unknown.find("bogus") != std::string::npos);

  // Malformed line.
  CHECK(message_of("experiment = three-level\nnot a pair\n")
            .find("line 2") != std::string::npos);

  // Cooling needs an explicit coupling bound.
  CHECK(message_of("experiment = cooling\n").find("g_max") !=
        std::string::npos);

  // Unknown section.
  CHECK(message_of("experiment = three-level\n[plotting]\n")
            .find("plotting") != std::string::npos);
}

TEST_CASE("trajectory CSV emission") {
  Trajectory traj;
  for (int i = 0; i < 3; ++i) {
    FieldVector f(4);
    f << 0.1 * i, -0.2, 0.0, 0.007;
    traj.samples.push_back(
        {0.01 * i, f, 1.0 - 0.1 * i, f.squaredNorm(), 0.1 * i, true});
  }
  TempFile tmp("test_cli_traj.csv");
  emit_trajectory(traj, OutputFormat::Csv, tmp.path);
  const std::string text = slurp(tmp.path);

  std::istringstream lines(text);
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  REQUIRE(all.size() == 4);  // header + 3 samples
  CHECK(all[0] == "t,f1,f2,f3,f4,V,W,metric,switched_on");
  CHECK(text.find("\r\n") == std::string::npos);

  // W column equals the row-wise sum of squared fields.
  for (std::size_t r = 1; r < all.size(); ++r) {
    std::istringstream cells(all[r]);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(cells, cell, ',')) vals.push_back(std::stod(cell));
    REQUIRE(vals.size() == 9);
    const double w_direct =
        vals[1] * vals[1] + vals[2] * vals[2] + vals[3] * vals[3] +
        vals[4] * vals[4];
    CHECK(vals[6] == Catch::Approx(w_direct).margin(1e-12));
  }

  Trajectory empty;
  CHECK_THROWS_AS(emit_trajectory(empty, OutputFormat::Csv, tmp.path),
                  std::invalid_argument);
}

TEST_CASE("trajectory JSON round-trip") {
  Trajectory traj;
  for (int i = 0; i < 5; ++i) {
    FieldVector f(2);
    f << std::sin(0.1 * i) * 1e-7, -0.007;
    traj.samples.push_back(
        {0.01 * i, f, 2.0 / 3.0 - 0.01 * i, f.squaredNorm(),
         1.0 / 3.0 + 0.01 * i, i < 4});
  }
  traj.stop_time = 0.04;

  const Trajectory back = trajectory_from_json(trajectory_to_json(traj));
  REQUIRE(back.samples.size() == traj.samples.size());
  REQUIRE(back.stop_time.has_value());
  CHECK(*back.stop_time == *traj.stop_time);
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    CHECK(back.samples[i].t == traj.samples[i].t);
    CHECK(back.samples[i].V == traj.samples[i].V);
    CHECK(back.samples[i].W == traj.samples[i].W);
    CHECK(back.samples[i].metric == traj.samples[i].metric);
    CHECK(back.samples[i].switched_on == traj.samples[i].switched_on);
    CHECK((back.samples[i].fields - traj.samples[i].fields)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("three-level experiment writes trajectory and manifest") {
  ExperimentConfig cfg = parse_config(
      "experiment = three-level\n"
      "[design]\n"
      "law = bang-bang\n");
  TempFile tmp("test_cli_run.csv");
  cfg.output_path = tmp.path;
  run_experiment(cfg);

  const std::string text = slurp(tmp.path);
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "t,f1,f2,f3,f4,V,W,metric,switched_on");

  // Last switched-on row must be near the expected switch-off time with the
  // fidelity threshold reached shortly after.
  double last_on_t = -1.0;
  double best_metric = 0.0;
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(cells, cell, ',')) vals.push_back(std::stod(cell));
    REQUIRE(vals.size() == 9);
    if (vals[8] == 1.0) last_on_t = vals[0];
    best_metric = std::max(best_metric, vals[7]);
  }
  CHECK(last_on_t > 60.0);
  CHECK(last_on_t < 90.0);
  CHECK(best_metric >= 0.999);

  const std::string manifest = slurp(tmp.path + ".manifest.json");
  CHECK(manifest.find("\"experiment\": \"three-level\"") != std::string::npos);
  CHECK(manifest.find("bang-bang") != std::string::npos);
  CHECK(manifest.find("\"dt\": 0.01") != std::string::npos);
}

TEST_CASE("runs are byte-identical given config and seed") {
  ExperimentConfig cfg = parse_config(
      "experiment = convergence-ensemble\n"
      "seed = 7\n"
      "[ensemble]\n"
      "n_states = 3\n"
      "[integrator]\n"
      "t_max = 120\n");
  TempFile a("test_cli_det_a.csv"), b("test_cli_det_b.csv");
  cfg.output_path = a.path;
  run_experiment(cfg);
  cfg.output_path = b.path;
  run_experiment(cfg);
  CHECK(slurp(a.path) == slurp(b.path));
}
