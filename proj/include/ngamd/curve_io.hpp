#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ngamd/config.hpp"
#include "ngamd/montecarlo.hpp"

namespace ngamd {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Writes a curve as CSV (or JSON lines) with '#' metadata header lines.
/// Deterministic column order: snr_db, probability, ci_low, ci_high.
inline void emit_curve(const PerformanceCurve& curve, const std::string& format,
                       const std::filesystem::path& path,
                       const std::map<std::string, std::string>& extra_metadata = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  auto meta = [&](const std::string& key, const std::string& value) {
    out << "# " << key << " = " << value << "\n";
  };
  meta("source", curve.source == CurveSource::Theory ? "theory" : "monte-carlo");
  meta("detector", detector_name(curve.detector));
  meta("alpha", format_double(curve.alpha));
  meta("beta", format_double(curve.beta));
  meta("N", std::to_string(curve.N));
  meta("r", std::to_string(curve.r));
  meta("K", std::to_string(curve.K));
  meta("pfa_target", format_double(curve.pfa_target));
  for (const auto& [key, value] : extra_metadata) meta(key, value);

  if (format == "csv") {
    out << "snr_db,probability,ci_low,ci_high\n";
    for (const auto& p : curve.points)
      out << format_double(p.snr_db) << ',' << format_double(p.probability) << ','
          << format_double(p.ci_low) << ',' << format_double(p.ci_high) << "\n";
  } else if (format == "json-lines") {
    for (const auto& p : curve.points)
      out << nlohmann::json{{"snr_db", p.snr_db},
                            {"probability", p.probability},
                            {"ci_low", p.ci_low},
                            {"ci_high", p.ci_high}}
                 .dump()
          << "\n";
  } else {
    throw IoError("unknown curve format: " + format);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Parses a CSV written by emit_curve. Metadata lines are returned verbatim
/// in the map; numeric metadata is re-parsed by the caller as needed.
inline PerformanceCurve parse_curve_csv(const std::filesystem::path& path,
                                        std::map<std::string, std::string>* metadata = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  PerformanceCurve curve;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos && metadata)
        (*metadata)[line.substr(2, eq - 2)] = line.substr(eq + 3);
      continue;
    }
    if (!saw_header) {  // column header row
      saw_header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ',')) values.push_back(std::stod(field));
    if (values.size() != 4) throw IoError("malformed row in " + path.string());
    curve.points.push_back({values[0], values[1], values[2], values[3]});
  }
  if (metadata) {
    auto get = [&](const char* key) -> std::string {
      auto it = metadata->find(key);
      return it == metadata->end() ? "" : it->second;
    };
    if (get("source") == "theory") curve.source = CurveSource::Theory;
    if (!get("detector").empty()) curve.detector = parse_detector(get("detector"));
    if (!get("alpha").empty()) curve.alpha = std::stod(get("alpha"));
    if (!get("beta").empty()) curve.beta = std::stod(get("beta"));
    if (!get("N").empty()) curve.N = std::stoi(get("N"));
    if (!get("r").empty()) curve.r = std::stoi(get("r"));
    if (!get("K").empty()) curve.K = std::stoi(get("K"));
    if (!get("pfa_target").empty()) curve.pfa_target = std::stod(get("pfa_target"));
  }
  return curve;
}

}  // namespace ngamd
