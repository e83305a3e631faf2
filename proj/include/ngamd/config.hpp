#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ngamd/montecarlo.hpp"

namespace ngamd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string detector_name(DetectorId id) {
  switch (id) {
    case DetectorId::NgAmd: return "ng-amd";
    case DetectorId::Asd: return "asd";
    case DetectorId::Glrt1s: return "1s-glrt";
  }
  return "?";
}

inline DetectorId parse_detector(const std::string& name) {
  if (name == "ng-amd") return DetectorId::NgAmd;
  if (name == "asd") return DetectorId::Asd;
  if (name == "1s-glrt") return DetectorId::Glrt1s;
  throw ConfigError("unknown detector: " + name);
}

/// Full experiment description: scenario + run + output blocks.
struct ExperimentConfig {
  ScenarioTemplate scenario;
  std::vector<DetectorId> detectors{DetectorId::NgAmd};
  std::vector<double> snr_grid{-5, 0, 5, 10, 15, 20};
  double pfa_target = 1e-2;
  long trials = 10000;
  long calibration_trials = 200000;
  std::uint64_t seed = 20240901;
  ThresholdMode threshold_mode = ThresholdMode::Analytic;
  std::string out_dir = "out";
  std::vector<std::string> formats{"csv"};
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& where,
                           const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items())
    if (!known.count(key))
      throw ConfigError("unknown key '" + where + "." + key + "'");
}

inline nlohmann::json complex_matrix_to_json(const cmat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline cmat complex_matrix_from_json(const nlohmann::json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty())
    throw ConfigError(where + ": expected a nonempty array of rows");
  const std::size_t ncols = rows.front().size();
  cmat m(rows.size(), ncols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != ncols) throw ConfigError(where + ": ragged rows");
    for (std::size_t j = 0; j < ncols; ++j) {
      const auto& entry = rows[i][j];
      if (!entry.is_array() || entry.size() != 2)
        throw ConfigError(where + ": entries must be [re, im] pairs");
      m(i, j) = std::complex<double>(entry[0].get<double>(), entry[1].get<double>());
    }
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json scenario{
      {"N", cfg.scenario.N},
      {"r", cfg.scenario.r},
      {"K", cfg.scenario.K},
      {"one_lag", cfg.scenario.one_lag},
      {"texture", {{"alpha", cfg.scenario.texture.alpha}, {"beta", cfg.scenario.texture.beta}}},
      {"texture_sharing", cfg.scenario.texture_sharing == TextureSharing::PerCellIid
                              ? "per-cell-iid"
                              : "common-across-cells"},
  };
  if (const auto* det = std::get_if<DeterministicTarget>(&cfg.scenario.target)) {
    nlohmann::json x = nlohmann::json::array();
    for (Eigen::Index i = 0; i < det->x.size(); ++i)
      x.push_back({det->x(i).real(), det->x(i).imag()});
    scenario["target"] = {{"model", "deterministic"}, {"x", x}};
  } else {
    scenario["target"] = {
        {"model", "fluctuating"},
        {"Rx", detail::complex_matrix_to_json(std::get<FluctuatingTarget>(cfg.scenario.target).Rx)}};
  }

  nlohmann::json detectors = nlohmann::json::array();
  for (DetectorId id : cfg.detectors) detectors.push_back(detector_name(id));

  return nlohmann::json{
      {"scenario", scenario},
      {"run",
       {{"detectors", detectors},
        {"snr_grid", cfg.snr_grid},
        {"pfa_target", cfg.pfa_target},
        {"trials", cfg.trials},
        {"calibration_trials", cfg.calibration_trials},
        {"seed", cfg.seed},
        {"threshold_mode",
         cfg.threshold_mode == ThresholdMode::Analytic ? "analytic" : "mc"}}},
      {"output", {{"directory", cfg.out_dir}, {"formats", cfg.formats}}}};
}

inline ExperimentConfig from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, "", {"scenario", "run", "output"});
  ExperimentConfig cfg;

  if (!j.contains("scenario")) throw ConfigError("missing required block 'scenario'");
  const auto& sc = j.at("scenario");
  detail::reject_unknown(sc, "scenario",
                         {"N", "r", "K", "one_lag", "texture", "target", "texture_sharing"});
  for (const char* key : {"N", "r", "K"})
    if (!sc.contains(key))
      throw ConfigError(std::string("missing required key 'scenario.") + key + "'");
  cfg.scenario.N = sc.at("N").get<int>();
  cfg.scenario.r = sc.at("r").get<int>();
  cfg.scenario.K = sc.at("K").get<int>();
  if (sc.contains("one_lag")) cfg.scenario.one_lag = sc.at("one_lag").get<double>();
  if (sc.contains("texture")) {
    detail::reject_unknown(sc.at("texture"), "scenario.texture", {"alpha", "beta"});
    cfg.scenario.texture = TextureParams(sc.at("texture").at("alpha").get<double>(),
                                         sc.at("texture").at("beta").get<double>());
  }
  if (sc.contains("texture_sharing")) {
    const auto mode = sc.at("texture_sharing").get<std::string>();
    if (mode == "per-cell-iid")
      cfg.scenario.texture_sharing = TextureSharing::PerCellIid;
    else if (mode == "common-across-cells")
      cfg.scenario.texture_sharing = TextureSharing::CommonAcrossCells;
    else
      throw ConfigError("scenario.texture_sharing: unknown mode '" + mode + "'");
  }
  if (sc.contains("target")) {
    const auto& tgt = sc.at("target");
    detail::reject_unknown(tgt, "scenario.target", {"model", "x", "Rx"});
    const auto model = tgt.at("model").get<std::string>();
    if (model == "deterministic") {
      if (tgt.contains("x")) {
        const cmat xs = detail::complex_matrix_from_json(
            nlohmann::json::array({tgt.at("x")}), "scenario.target.x");
        cfg.scenario.target = DeterministicTarget{xs.row(0).transpose()};
      } else {
        cfg.scenario.target = DeterministicTarget{unit_target(cfg.scenario.r)};
      }
    } else if (model == "fluctuating") {
      cfg.scenario.target = FluctuatingTarget{
          detail::complex_matrix_from_json(tgt.at("Rx"), "scenario.target.Rx")};
    } else {
      throw ConfigError("scenario.target.model: unknown model '" + model + "'");
    }
  } else {
    cfg.scenario.target = DeterministicTarget{unit_target(cfg.scenario.r)};
  }

  if (j.contains("run")) {
    const auto& run = j.at("run");
    detail::reject_unknown(run, "run",
                           {"detectors", "snr_grid", "pfa_target", "trials",
                            "calibration_trials", "seed", "threshold_mode"});
    if (run.contains("detectors")) {
      cfg.detectors.clear();
      for (const auto& name : run.at("detectors"))
        cfg.detectors.push_back(parse_detector(name.get<std::string>()));
    }
    if (run.contains("snr_grid")) cfg.snr_grid = run.at("snr_grid").get<std::vector<double>>();
    if (run.contains("pfa_target")) cfg.pfa_target = run.at("pfa_target").get<double>();
    if (run.contains("trials")) cfg.trials = run.at("trials").get<long>();
    if (run.contains("calibration_trials"))
      cfg.calibration_trials = run.at("calibration_trials").get<long>();
    if (run.contains("seed")) cfg.seed = run.at("seed").get<std::uint64_t>();
    if (run.contains("threshold_mode")) {
      const auto mode = run.at("threshold_mode").get<std::string>();
      if (mode == "analytic")
        cfg.threshold_mode = ThresholdMode::Analytic;
      else if (mode == "mc")
        cfg.threshold_mode = ThresholdMode::MonteCarlo;
      else
        throw ConfigError("run.threshold_mode: unknown mode '" + mode + "'");
    }
  }

  if (j.contains("output")) {
    const auto& out = j.at("output");
    detail::reject_unknown(out, "output", {"directory", "formats"});
    if (out.contains("directory")) cfg.out_dir = out.at("directory").get<std::string>();
    if (out.contains("formats")) cfg.formats = out.at("formats").get<std::vector<std::string>>();
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

/// Dotted-path override, e.g. set_override(j, "scenario.N", "8").
inline void set_override(nlohmann::json& j, const std::string& path,
                         const std::string& value) {
  nlohmann::json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty override path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  try {
    (*node)[parts.back()] = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    (*node)[parts.back()] = value;  // fall back to a plain string
  }
}

/// FNV-1a hash of the canonical config serialization, for output provenance.
inline std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace ngamd
