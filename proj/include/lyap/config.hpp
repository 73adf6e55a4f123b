#pragma once

// Plain-text key-value experiment configuration. Sections: top level
// (experiment, seed), [design], [integrator], [output], [ensemble],
// [cooling]. Unknown keys are rejected with the offending line number.

#include "lyap/cooling.hpp"
#include "lyap/dynamics.hpp"

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

namespace lyap {

enum class ExperimentKind {
  ThreeLevel,
  ConvergenceEnsemble,
  RobustnessH0,
  RobustnessDecoherence,
  Cooling,
};

enum class OutputFormat { Csv, Json };

enum class CoolingLawKind { Conventional, BangBang };

struct ExperimentConfig {
  ExperimentKind experiment;
  ControlDesign design{Conventional{0.01}};
  // Law parameters for experiments that compare all three designs.
  double k = 0.01;
  double w_max = 1e-4;
  double s = 0.007;
  IntegratorConfig integrator;
  std::uint64_t seed = 0;
  std::string output_path = "out.csv";
  OutputFormat output_format = OutputFormat::Csv;

  // Ensemble experiments.
  std::size_t n_states = 50;
  std::vector<double> gamma_grid;
  std::vector<double> delta_grid;
  int generator_index = 1;

  // Cooling experiment.
  CoolingParams cooling;
  CoolingLawKind cooling_law = CoolingLawKind::BangBang;
  bool cooling_g_max_set = false;
};

namespace detail {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& value, const std::string& key,
                           int line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size()) {
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "' expects a number, got '" + value + "'");
  }
  return v;
}

inline double parse_positive(const std::string& value, const std::string& key,
                             int line) {
  const double v = parse_double(value, key, line);
  if (v <= 0.0) {
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "' must be strictly positive, got '" + value + "'");
  }
  return v;
}

inline std::vector<double> parse_positive_list(const std::string& value,
                                               const std::string& key,
                                               int line) {
  std::vector<double> out;
  std::istringstream is(value);
  std::string tok;
  while (is >> tok) out.push_back(parse_positive(tok, key, line));
  if (out.empty()) {
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "' expects a list of numbers");
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  using detail::ConfigError;
  ExperimentConfig cfg;
  bool have_experiment = false;
  bool have_dt = false, have_t_max = false;
  std::string design_law;

  std::string section;
  std::istringstream stream(text);
  std::string raw;
  int line = 0;
  while (std::getline(stream, raw)) {
    ++line;
    std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw ConfigError("line " + std::to_string(line) +
                          ": malformed section header");
      }
      section = detail::trim(s.substr(1, s.size() - 2));
      if (section != "design" && section != "integrator" &&
          section != "output" && section != "ensemble" &&
          section != "cooling") {
        throw ConfigError("line " + std::to_string(line) +
                          ": unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line) +
                        ": expected 'key = value'");
    }
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line) +
                        ": expected 'key = value'");
    }

    if (section.empty()) {
      if (key == "experiment") {
        if (value == "three-level") cfg.experiment = ExperimentKind::ThreeLevel;
        else if (value == "convergence-ensemble")
          cfg.experiment = ExperimentKind::ConvergenceEnsemble;
        else if (value == "robustness-h0")
          cfg.experiment = ExperimentKind::RobustnessH0;
        else if (value == "robustness-decoherence")
          cfg.experiment = ExperimentKind::RobustnessDecoherence;
        else if (value == "cooling") cfg.experiment = ExperimentKind::Cooling;
        else
          throw ConfigError("line " + std::to_string(line) +
                            ": unknown experiment '" + value + "'");
        have_experiment = true;
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else {
        throw ConfigError("line " + std::to_string(line) + ": unknown key '" +
                          key + "'");
      }
    } else if (section == "design") {
      if (key == "law") design_law = value;
      else if (key == "k") cfg.k = detail::parse_positive(value, key, line);
      else if (key == "w_max")
        cfg.w_max = detail::parse_positive(value, key, line);
      else if (key == "s") cfg.s = detail::parse_positive(value, key, line);
      else if (key == "epsilon")
        cfg.design.epsilon = detail::parse_positive(value, key, line);
      else if (key == "averaging_window")
        cfg.design.averaging_window = detail::parse_positive(value, key, line);
      else
        throw ConfigError("line " + std::to_string(line) + ": unknown key '" +
                          key + "' in [design]");
    } else if (section == "integrator") {
      if (key == "dt") {
        cfg.integrator.dt = detail::parse_positive(value, key, line);
        have_dt = true;
      } else if (key == "t_max") {
        cfg.integrator.t_max = detail::parse_positive(value, key, line);
        have_t_max = true;
      } else if (key == "method") {
        if (value == "unitary")
          cfg.integrator.method = IntegratorConfig::Method::UnitaryStep;
        else if (value == "rk4")
          cfg.integrator.method = IntegratorConfig::Method::Rk4;
        else
          throw ConfigError("line " + std::to_string(line) +
                            ": method must be 'unitary' or 'rk4'");
      } else {
        throw ConfigError("line " + std::to_string(line) + ": unknown key '" +
                          key + "' in [integrator]");
      }
    } else if (section == "output") {
      if (key == "path") cfg.output_path = value;
      else if (key == "format") {
        if (value == "csv") cfg.output_format = OutputFormat::Csv;
        else if (value == "json") cfg.output_format = OutputFormat::Json;
        else
          throw ConfigError("line " + std::to_string(line) +
                            ": format must be 'csv' or 'json'");
      } else {
        throw ConfigError("line " + std::to_string(line) + ": unknown key '" +
                          key + "' in [output]");
      }
    } else if (section == "ensemble") {
      if (key == "n_states") {
        const double v = detail::parse_positive(value, key, line);
        cfg.n_states = static_cast<std::size_t>(v);
      } else if (key == "gamma_grid") {
        cfg.gamma_grid = detail::parse_positive_list(value, key, line);
      } else if (key == "delta_grid") {
        cfg.delta_grid = detail::parse_positive_list(value, key, line);
      } else if (key == "generator_index") {
        cfg.generator_index =
            static_cast<int>(detail::parse_positive(value, key, line));
        if (cfg.generator_index > 8) {
          throw ConfigError("line " + std::to_string(line) +
                            ": generator_index must be in 1..8");
        }
      } else {
        throw ConfigError("line " + std::to_string(line) + ": unknown key '" +
                          key + "' in [ensemble]");
      }
    } else if (section == "cooling") {
      if (key == "law") {
        if (value == "conventional")
          cfg.cooling_law = CoolingLawKind::Conventional;
        else if (value == "bang-bang")
          cfg.cooling_law = CoolingLawKind::BangBang;
        else
          throw ConfigError("line " + std::to_string(line) +
                            ": cooling law must be 'conventional' or "
                            "'bang-bang'");
      } else if (key == "g_max") {
        cfg.cooling.g_max = detail::parse_positive(value, key, line);
        cfg.cooling_g_max_set = true;
      } else if (key == "k_gain")
        cfg.cooling.k_gain = detail::parse_positive(value, key, line);
      else if (key == "g_seed")
        cfg.cooling.g_seed = detail::parse_positive(value, key, line);
      else if (key == "dim")
        cfg.cooling.dim =
            static_cast<Eigen::Index>(detail::parse_positive(value, key, line));
      else if (key == "nbar0")
        cfg.cooling.nbar0 = detail::parse_positive(value, key, line);
      else if (key == "omega_ratio")
        cfg.cooling.omega_ratio = detail::parse_positive(value, key, line);
      else if (key == "stop_phonons")
        cfg.cooling.stop_phonons = detail::parse_positive(value, key, line);
      else if (key == "truncation_guard")
        cfg.cooling.truncation_guard = detail::parse_positive(value, key, line);
      else
        throw ConfigError("line " + std::to_string(line) + ": unknown key '" +
                          key + "' in [cooling]");
    }
  }

  if (!have_experiment) {
    throw ConfigError("config is missing the 'experiment' key");
  }

  // Resolve the single-design law for the three-level trajectory experiment.
  if (design_law.empty() || design_law == "conventional") {
    cfg.design.law = Conventional{cfg.k};
  } else if (design_law == "power") {
    cfg.design.law = PowerConstrained{cfg.w_max};
  } else if (design_law == "bang-bang") {
    cfg.design.law = StrengthConstrained{cfg.s};
  } else {
    throw ConfigError("design law must be 'conventional', 'power' or "
                      "'bang-bang', got '" +
                      design_law + "'");
  }

  // Per-experiment integrator defaults.
  if (!have_dt) {
    cfg.integrator.dt =
        cfg.experiment == ExperimentKind::Cooling ? 2e-4
        : cfg.experiment == ExperimentKind::RobustnessDecoherence ? 1e-3
                                                                  : 0.01;
  }
  if (!have_t_max) {
    cfg.integrator.t_max =
        cfg.experiment == ExperimentKind::Cooling ? 60.0 : 400.0;
  }
  cfg.integrator.validate();

  if (cfg.experiment == ExperimentKind::Cooling && !cfg.cooling_g_max_set) {
    throw ConfigError(
        "cooling requires an explicit g_max (presets: 0.191 or 1.91)");
  }
  if (cfg.experiment == ExperimentKind::RobustnessDecoherence &&
      cfg.gamma_grid.empty()) {
    cfg.gamma_grid = {0.0005, 0.001, 0.002};
  }
  if (cfg.experiment == ExperimentKind::RobustnessH0 &&
      cfg.delta_grid.empty()) {
    cfg.delta_grid = {0.002, 0.005, 0.01};
  }
  cfg.cooling.validate();
  return cfg;
}

}  // namespace lyap
