#pragma once

// Trajectory and ensemble serialization (CSV and JSON) plus the run manifest
// that pins every resolved parameter of an experiment.

#include "lyap/config.hpp"
#include "lyap/dynamics.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <string>

namespace lyap {

namespace detail {

/// 12 significant digits, locale-independent.
inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.11e", v);
  return buf;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: LF line endings
  if (!out) {
    throw std::runtime_error("cannot open output file '" + path + "'");
  }
  return out;
}

}  // namespace detail

/// CSV columns: t, f1..fk, V, W, metric, switched_on.
inline void emit_trajectory_csv(const Trajectory& traj,
                                const std::string& path) {
  if (traj.samples.empty()) {
    throw std::invalid_argument("emit_trajectory: empty trajectory");
  }
  auto out = detail::open_output(path);
  const Eigen::Index k = traj.samples.front().fields.size();
  out << "t";
  for (Eigen::Index n = 0; n < k; ++n) out << ",f" << (n + 1);
  out << ",V,W,metric,switched_on\n";
  for (const auto& s : traj.samples) {
    out << detail::format_value(s.t);
    for (Eigen::Index n = 0; n < k; ++n) {
      out << ',' << detail::format_value(s.fields(n));
    }
    out << ',' << detail::format_value(s.V) << ','
        << detail::format_value(s.W) << ',' << detail::format_value(s.metric)
        << ',' << (s.switched_on ? 1 : 0) << '\n';
  }
}

inline nlohmann::json trajectory_to_json(const Trajectory& traj) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : traj.samples) {
    nlohmann::json rec;
    rec["t"] = s.t;
    rec["fields"] = std::vector<double>(s.fields.data(),
                                        s.fields.data() + s.fields.size());
    rec["V"] = s.V;
    rec["W"] = s.W;
    rec["metric"] = s.metric;
    rec["switched_on"] = s.switched_on;
    samples.push_back(std::move(rec));
  }
  nlohmann::json metadata;
  metadata["num_samples"] = traj.samples.size();
  if (traj.stop_time) metadata["stop_time"] = *traj.stop_time;
  nlohmann::json doc;
  doc["metadata"] = std::move(metadata);
  doc["samples"] = std::move(samples);
  return doc;
}

inline Trajectory trajectory_from_json(const nlohmann::json& doc) {
  Trajectory traj;
  for (const auto& rec : doc.at("samples")) {
    TrajectorySample s;
    s.t = rec.at("t").get<double>();
    const auto fields = rec.at("fields").get<std::vector<double>>();
    s.fields = Eigen::Map<const Eigen::VectorXd>(
        fields.data(), static_cast<Eigen::Index>(fields.size()));
    s.V = rec.at("V").get<double>();
    s.W = rec.at("W").get<double>();
    s.metric = rec.at("metric").get<double>();
    s.switched_on = rec.at("switched_on").get<bool>();
    traj.samples.push_back(std::move(s));
  }
  if (doc.at("metadata").contains("stop_time")) {
    traj.stop_time = doc.at("metadata").at("stop_time").get<double>();
  }
  return traj;
}

inline void emit_trajectory(const Trajectory& traj, OutputFormat format,
                            const std::string& path) {
  if (traj.samples.empty()) {
    throw std::invalid_argument("emit_trajectory: empty trajectory");
  }
  if (format == OutputFormat::Csv) {
    emit_trajectory_csv(traj, path);
  } else {
    auto out = detail::open_output(path);
    out << trajectory_to_json(traj).dump(2) << '\n';
  }
}

inline const char* experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::ThreeLevel: return "three-level";
    case ExperimentKind::ConvergenceEnsemble: return "convergence-ensemble";
    case ExperimentKind::RobustnessH0: return "robustness-h0";
    case ExperimentKind::RobustnessDecoherence: return "robustness-decoherence";
    case ExperimentKind::Cooling: return "cooling";
  }
  return "?";
}

inline nlohmann::json design_to_json(const ControlDesign& design) {
  nlohmann::json j;
  std::visit(
      [&](const auto& l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, Conventional>) {
          j["law"] = "conventional";
          j["k"] = l.k;
        } else if constexpr (std::is_same_v<L, PowerConstrained>) {
          j["law"] = "power";
          j["w_max"] = l.w_max;
        } else {
          j["law"] = "bang-bang";
          j["s"] = l.s;
        }
      },
      design.law);
  j["epsilon"] = design.epsilon;
  if (design.averaging_window) j["averaging_window"] = *design.averaging_window;
  return j;
}

/// Every default the run resolved, so the run is fully specified by its
/// manifest alone.
inline nlohmann::json manifest_for(const ExperimentConfig& cfg) {
  nlohmann::json m;
  m["experiment"] = experiment_name(cfg.experiment);
  m["seed"] = cfg.seed;
  m["output_format"] = cfg.output_format == OutputFormat::Csv ? "csv" : "json";
  m["output_path"] = cfg.output_path;
  m["integrator"] = {
      {"dt", cfg.integrator.dt},
      {"t_max", cfg.integrator.t_max},
      {"method", cfg.integrator.method == IntegratorConfig::Method::UnitaryStep
                     ? "unitary"
                     : "rk4"}};
  switch (cfg.experiment) {
    case ExperimentKind::ThreeLevel:
      m["design"] = design_to_json(cfg.design);
      break;
    case ExperimentKind::ConvergenceEnsemble:
    case ExperimentKind::RobustnessH0:
    case ExperimentKind::RobustnessDecoherence:
      m["designs"] = {{"k", cfg.k}, {"w_max", cfg.w_max}, {"s", cfg.s},
                      {"epsilon", cfg.design.epsilon}};
      m["n_states"] = cfg.n_states;
      if (cfg.experiment == ExperimentKind::RobustnessH0) {
        m["generator_index"] = cfg.generator_index;
        m["delta_grid"] = cfg.delta_grid;
      }
      if (cfg.experiment == ExperimentKind::RobustnessDecoherence) {
        m["gamma_grid"] = cfg.gamma_grid;
      }
      break;
    case ExperimentKind::Cooling:
      m["cooling"] = {
          {"law", cfg.cooling_law == CoolingLawKind::Conventional
                      ? "conventional"
                      : "bang-bang"},
          {"omega", cfg.cooling.omega},
          {"omega_ratio", cfg.cooling.omega_ratio},
          {"dim", cfg.cooling.dim},
          {"nbar0", cfg.cooling.nbar0},
          {"g_max", cfg.cooling.g_max},
          {"k_gain", cfg.cooling.k_gain},
          {"g_seed", cfg.cooling.g_seed},
          {"stop_phonons", cfg.cooling.stop_phonons},
          {"truncation_guard", cfg.cooling.truncation_guard}};
      break;
  }
  return m;
}

inline void write_manifest(const ExperimentConfig& cfg) {
  auto out = detail::open_output(cfg.output_path + ".manifest.json");
  out << manifest_for(cfg).dump(2) << '\n';
}

}  // namespace lyap
