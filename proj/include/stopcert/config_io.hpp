#pragma once

// Structured-configuration files: manifest classes, confidence budgets and
// ground-truth process definitions, all JSON with keys mirroring the
// manifest symbols. Shared by the CLI and the test harnesses.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stopcert/certificate.hpp"
#include "stopcert/simulator.hpp"
#include "stopcert/trace_io.hpp"

namespace stopcert {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const std::exception& err) {
    throw config_error("malformed JSON in " + path + ": " + err.what());
  }
}

inline std::vector<double> number_list(const nlohmann::json& j) {
  std::vector<double> values;
  if (j.is_number()) {
    values.push_back(j.get<double>());
  } else {
    for (const auto& item : j) values.push_back(item.get<double>());
  }
  return values;
}

}  // namespace detail

inline ControllerManifest manifest_from_json(const nlohmann::json& j) {
  ControllerManifest m;
  m.id = j.at("id").get<std::string>();
  if (j.contains("gate_spec")) {
    const auto& g = j.at("gate_spec");
    if (g.contains("kind")) m.gate_spec.kind = g.at("kind").get<std::string>();
    if (g.contains("grid")) {
      m.gate_spec.grid = g.at("grid").get<std::vector<double>>();
    }
    if (g.contains("alpha")) m.gate_spec.alpha = detail::number_list(g.at("alpha"));
  }
  if (j.contains("probe_interface_id")) {
    m.probe_interface_id = j.at("probe_interface_id").get<std::string>();
  }
  if (j.contains("evid_intensity")) {
    m.evid_intensity = j.at("evid_intensity").get<int>();
  }
  if (j.contains("evid_aggregation")) {
    m.evid_aggregation = j.at("evid_aggregation").get<std::string>();
  }
  if (j.contains("k_gen")) m.k_gen = j.at("k_gen").get<int>();
  if (j.contains("l_alg")) m.l_alg = j.at("l_alg").get<int>();
  if (j.contains("routing_id")) m.routing_id = j.at("routing_id").get<std::string>();
  if (j.contains("dedup_id")) m.dedup_id = j.at("dedup_id").get<std::string>();
  if (j.contains("prompt_id")) m.prompt_id = j.at("prompt_id").get<std::string>();
  if (j.contains("decode_id")) m.decode_id = j.at("decode_id").get<std::string>();
  m.horizon = j.at("horizon").get<int>();
  if (j.contains("memory_snapshot_id")) {
    m.memory_snapshot_id = j.at("memory_snapshot_id").get<std::string>();
  }
  if (j.contains("write_mode")) {
    const auto mode = parse_write_mode(j.at("write_mode").get<std::string>());
    if (!mode) throw config_error("unknown write_mode for manifest " + m.id);
    m.write_mode = *mode;
  }
  if (j.contains("channels")) {
    const auto& c = j.at("channels");
    if (c.contains("sv")) m.channels.sv = c.at("sv").get<bool>();
    if (c.contains("hp")) m.channels.hp = c.at("hp").get<bool>();
    if (c.contains("ta")) m.channels.ta = c.at("ta").get<bool>();
    if (c.contains("exp")) m.channels.exp = c.at("exp").get<bool>();
  }
  return m;
}

inline ManifestClass load_manifest_class(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  ManifestClass manifest_class;
  if (j.contains("declared_before")) {
    manifest_class.declared_before = j.at("declared_before").get<std::string>();
  }
  if (!j.contains("controllers")) {
    throw config_error("manifest class needs a 'controllers' array: " + path);
  }
  for (const auto& item : j.at("controllers")) {
    manifest_class.controllers.push_back(manifest_from_json(item));
  }
  try {
    manifest_class.validate();
  } catch (const std::invalid_argument& err) {
    throw config_error(std::string("invalid manifest class: ") + err.what());
  }
  return manifest_class;
}

struct BudgetConfig {
  double delta = 0.10;
  BudgetSplit split{0.025, 0.025, 0.025, 0.025};
  int j_max = 1;
};

inline BudgetConfig load_budget(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  BudgetConfig cfg;
  if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
  if (j.contains("delta_raw")) cfg.split.raw = j.at("delta_raw").get<double>();
  if (j.contains("delta_gate")) cfg.split.gate = j.at("delta_gate").get<double>();
  if (j.contains("delta_probe")) cfg.split.probe = j.at("delta_probe").get<double>();
  if (j.contains("delta_evid")) cfg.split.evid = j.at("delta_evid").get<double>();
  if (j.contains("j_max")) cfg.j_max = j.at("j_max").get<int>();
  return cfg;
}

inline GroundTruthProcess process_from_json(const nlohmann::json& j) {
  GroundTruthProcess process;
  process.horizon = j.at("horizon").get<int>();
  auto read = [&j](const char* key) {
    return j.contains(key) ? detail::number_list(j.at(key))
                           : std::vector<double>{};
  };
  process.bad_prior = read("bad_prior");
  process.probe_surv_bad = read("probe_surv_bad");
  process.probe_surv_good = read("probe_surv_good");
  process.evid_surv_bad = read("evid_surv_bad");
  process.evid_surv_good = read("evid_surv_good");
  process.gate_admit_bad = read("gate_admit_bad");
  process.gate_admit_good = read("gate_admit_good");
  if (j.contains("probe_enabled")) {
    process.probe_enabled = j.at("probe_enabled").get<bool>();
  }
  if (j.contains("evid_enabled")) {
    process.evid_enabled = j.at("evid_enabled").get<bool>();
  }
  if (j.contains("memory_snapshot_id")) {
    process.memory_snapshot_id = j.at("memory_snapshot_id").get<std::string>();
  }
  try {
    process.validate();
  } catch (const std::invalid_argument& err) {
    throw config_error(std::string("invalid process: ") + err.what());
  }
  return process;
}

inline GroundTruthProcess load_process(const std::string& path) {
  return process_from_json(detail::load_json_file(path));
}

// Processes file for coverage runs: {"processes": [{"controller_id": ...}]}
inline std::vector<std::pair<std::string, GroundTruthProcess>> load_processes(
    const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  std::vector<std::pair<std::string, GroundTruthProcess>> out;
  if (j.contains("processes")) {
    for (const auto& item : j.at("processes")) {
      out.emplace_back(item.at("controller_id").get<std::string>(),
                       process_from_json(item));
    }
  } else {
    out.emplace_back("sim", process_from_json(j));
  }
  return out;
}

}  // namespace stopcert
