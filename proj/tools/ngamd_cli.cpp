// Experiment driver: analytic thresholds, theory/Monte-Carlo performance
// curves, detector comparisons, and the CFAR study, written as CSV with
// full config provenance in the header.
#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ngamd/config.hpp"
#include "ngamd/curve_io.hpp"
#include "ngamd/theory.hpp"

namespace fs = std::filesystem;
using namespace ngamd;

namespace {

struct CliOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

ExperimentConfig resolve_config(const CliOptions& opt) {
  nlohmann::json j;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open config file: " + opt.config_path);
    in >> j;
  } else {
    j = to_json(ExperimentConfig{});
  }
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must look like key=value: " + kv);
    set_override(j, kv.substr(0, eq), kv.substr(eq + 1));
  }
  ExperimentConfig cfg = from_json(j);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
  if (const char* env = std::getenv("NGAMD_OUT_DIR")) cfg.out_dir = env;
  return cfg;
}

std::map<std::string, std::string> provenance(const ExperimentConfig& cfg) {
  return {{"config_hash", config_hash(cfg)},
          {"config", to_json(cfg).dump()},
          {"seed", std::to_string(cfg.seed)},
          {"one_lag", format_double(cfg.scenario.one_lag)}};
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / name;
}

DetectorDims dims_of(const ExperimentConfig& cfg) {
  return DetectorDims(cfg.scenario.N, cfg.scenario.r, cfg.scenario.K);
}

PerformanceCurve theory_curve(const ExperimentConfig& cfg) {
  const DetectorDims d = dims_of(cfg);
  const LossFactorModel loss(d);
  const QuadratureSpec quad;
  const double lambda0 = invert_threshold(cfg.pfa_target, d, quad, loss);
  PerformanceCurve curve;
  curve.source = CurveSource::Theory;
  curve.detector = DetectorId::NgAmd;
  curve.alpha = cfg.scenario.texture.alpha;
  curve.beta = cfg.scenario.texture.beta;
  curve.N = d.N;
  curve.r = d.r;
  curve.K = d.K;
  curve.pfa_target = cfg.pfa_target;
  for (double snr : cfg.snr_grid) {
    double pd;
    if (std::holds_alternative<DeterministicTarget>(cfg.scenario.target)) {
      pd = pd_deterministic(lambda0, cfg.scenario.mu1_at_snr(snr),
                            cfg.scenario.texture, d, quad, loss);
    } else {
      pd = pd_fluctuating(lambda0, cfg.scenario.grouping_at_snr(snr),
                          cfg.scenario.texture, d, quad, loss);
    }
    curve.points.push_back({snr, pd, pd, pd});
  }
  return curve;
}

PerformanceCurve mc_curve(const ExperimentConfig& cfg, DetectorId det) {
  SweepOptions opt;
  opt.pfa_target = cfg.pfa_target;
  opt.trials_per_point = cfg.trials;
  opt.calibration_trials = cfg.calibration_trials;
  opt.threshold_mode = det == DetectorId::NgAmd ? cfg.threshold_mode
                                                : ThresholdMode::MonteCarlo;
  return sweep_snr(cfg.scenario, det, cfg.snr_grid, RngStream(cfg.seed), opt);
}

int cmd_threshold(const ExperimentConfig& cfg) {
  const DetectorDims d = dims_of(cfg);
  const LossFactorModel loss(d);
  const QuadratureSpec quad;
  const auto path = out_path(cfg, "thresholds.csv");
  std::ofstream out(path);
  out << "# config_hash = " << config_hash(cfg) << "\n";
  out << "# config = " << to_json(cfg).dump() << "\n";
  out << "pfa_target,lambda0\n";
  for (double target : {1e-1, 1e-2, 1e-3, 1e-4, cfg.pfa_target}) {
    out << format_double(target) << ','
        << format_double(invert_threshold(target, d, quad, loss)) << "\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_pfa(const ExperimentConfig& cfg) {
  const DetectorDims d = dims_of(cfg);
  const LossFactorModel loss(d);
  const QuadratureSpec quad;
  const double lambda0 = invert_threshold(cfg.pfa_target, d, quad, loss);
  TrialPlan plan{cfg.scenario.at_power(1.0), DetectorId::NgAmd, Hypothesis::H0,
                 cfg.trials, RngStream(cfg.seed), lambda0};
  const auto est = estimate_exceedance(plan);
  const auto path = out_path(cfg, "pfa.csv");
  std::ofstream out(path);
  out << "# config_hash = " << config_hash(cfg) << "\n";
  out << "# config = " << to_json(cfg).dump() << "\n";
  out << "lambda0,pfa_analytic,pfa_empirical,ci_low,ci_high\n";
  out << format_double(lambda0) << ',' << format_double(cfg.pfa_target) << ','
      << format_double(est.p_hat) << ',' << format_double(est.ci_low) << ','
      << format_double(est.ci_high) << "\n";
  std::cout << "wrote " << path.string() << "\n";
  std::cout << "analytic pfa " << cfg.pfa_target << " empirical " << est.p_hat << " ["
            << est.ci_low << ", " << est.ci_high << "]\n";
  return 0;
}

int cmd_pd_theory(const ExperimentConfig& cfg) {
  const auto path = out_path(cfg, "pd_theory.csv");
  emit_curve(theory_curve(cfg), "csv", path, provenance(cfg));
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_pd_mc(const ExperimentConfig& cfg) {
  const auto path = out_path(cfg, "pd_mc.csv");
  emit_curve(mc_curve(cfg, DetectorId::NgAmd), "csv", path, provenance(cfg));
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_compare(const ExperimentConfig& cfg, const std::string& filename) {
  std::map<DetectorId, PerformanceCurve> curves;
  for (DetectorId det : cfg.detectors) curves[det] = mc_curve(cfg, det);
  const auto path = out_path(cfg, filename);
  std::ofstream out(path);
  out << "# config_hash = " << config_hash(cfg) << "\n";
  out << "# config = " << to_json(cfg).dump() << "\n";
  if (const auto* f = std::get_if<FluctuatingTarget>(&cfg.scenario.target))
    out << "# Rx = " << detail::complex_matrix_to_json(f->Rx).dump() << "\n";
  out << "snr_db";
  for (DetectorId det : cfg.detectors) out << ",pd_" << detector_name(det);
  out << "\n";
  for (std::size_t i = 0; i < cfg.snr_grid.size(); ++i) {
    out << format_double(cfg.snr_grid[i]);
    for (DetectorId det : cfg.detectors)
      out << ',' << format_double(curves[det].points[i].probability);
    out << "\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_cfar_study(const ExperimentConfig& cfg) {
  const std::vector<TextureParams> textures{TextureParams(2.0, 0.5),
                                            TextureParams(5.0, 2.0)};
  const std::vector<double> powers{0.1, 1.0, 10.0};
  const auto table = cfar_study(cfg.scenario, textures, powers, cfg.pfa_target,
                                cfg.trials, RngStream(cfg.seed));
  const auto path = out_path(cfg, "cfar_study.csv");
  std::ofstream out(path);
  out << "# config_hash = " << config_hash(cfg) << "\n";
  out << "# config = " << to_json(cfg).dump() << "\n";
  out << "# empirical P_FA at fixed thresholds across texture and power grids\n";
  out << "detector,alpha,beta,power_scale,threshold,pfa_hat,ci_low,ci_high\n";
  for (const auto& cell : table) {
    out << detector_name(cell.detector) << ',' << format_double(cell.alpha) << ','
        << format_double(cell.beta) << ',' << format_double(cell.power_scale) << ','
        << format_double(cell.threshold) << ',' << format_double(cell.pfa.p_hat) << ','
        << format_double(cell.pfa.ci_low) << ',' << format_double(cell.pfa.ci_high)
        << "\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

ExperimentConfig figure_preset(const ExperimentConfig& base, double alpha, double beta,
                               bool fluctuating) {
  ExperimentConfig cfg = base;
  cfg.scenario.N = 6;
  cfg.scenario.r = 2;
  cfg.scenario.K = 16;
  cfg.scenario.one_lag = 0.9;
  cfg.scenario.texture = TextureParams(alpha, beta);
  if (fluctuating) {
    cmat Rx(2, 2);
    Rx << std::complex<double>(1, 0), std::complex<double>(0, 0.5),
        std::complex<double>(0, -0.5), std::complex<double>(1, 0);
    cfg.scenario.target = FluctuatingTarget{Rx};
  } else {
    cfg.scenario.target = DeterministicTarget{unit_target(2)};
  }
  cfg.pfa_target = 1e-2;
  return cfg;
}

int cmd_reproduce(const ExperimentConfig& base, const std::string& figure) {
  const bool fluctuating = figure == "fig2" || figure == "fig4";
  const bool comparison = figure == "fig3" || figure == "fig4";
  if (figure != "fig1" && !fluctuating && !comparison)
    throw ConfigError("unknown figure: " + figure + " (expected fig1..fig4)");

  int index = 0;
  for (auto [alpha, beta] : {std::pair{2.0, 0.5}, std::pair{5.0, 2.0}}) {
    ExperimentConfig cfg = figure_preset(base, alpha, beta, fluctuating);
    const char tag = index++ == 0 ? 'a' : 'b';
    if (comparison) {
      cfg.detectors = {DetectorId::NgAmd, DetectorId::Glrt1s, DetectorId::Asd};
      cmd_compare(cfg, figure + std::string(1, tag) + "_compare.csv");
      continue;
    }
    // theory + simulation in one file, Fig 1-2 style
    const PerformanceCurve theory = theory_curve(cfg);
    const PerformanceCurve mc = mc_curve(cfg, DetectorId::NgAmd);
    const auto path =
        out_path(cfg, figure + std::string(1, tag) + "_pd.csv");
    std::ofstream out(path);
    out << "# config_hash = " << config_hash(cfg) << "\n";
    out << "# config = " << to_json(cfg).dump() << "\n";
    out << "snr_db,pd_theory,pd_mc,ci_low,ci_high\n";
    for (std::size_t i = 0; i < cfg.snr_grid.size(); ++i) {
      out << format_double(cfg.snr_grid[i]) << ','
          << format_double(theory.points[i].probability) << ','
          << format_double(mc.points[i].probability) << ','
          << format_double(mc.points[i].ci_low) << ','
          << format_double(mc.points[i].ci_high) << "\n";
    }
    std::cout << "wrote " << path.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nG-AMD detection-theory toolkit"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--config", opt.config_path, "JSON experiment config");
  app.add_option("--set", opt.overrides, "dotted-path override, key=value");
  app.add_option("--seed", opt.seed, "override run.seed");
  app.add_option("--out", opt.out_dir, "override output.directory");

  auto* threshold = app.add_subcommand("threshold", "analytic threshold table");
  auto* pfa_cmd = app.add_subcommand("pfa", "empirical vs analytic false alarm rate");
  auto* pd_theory = app.add_subcommand("pd-theory", "closed-form detection curve");
  auto* pd_mc = app.add_subcommand("pd-mc", "Monte Carlo detection curve");
  auto* compare = app.add_subcommand("compare", "all configured detectors");
  auto* cfar = app.add_subcommand("cfar-study", "P_FA across texture/power grids");
  auto* reproduce = app.add_subcommand("reproduce", "figure presets");
  std::string figure;
  reproduce->add_option("figure", figure, "fig1|fig2|fig3|fig4")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve_config(opt);
    if (threshold->parsed()) return cmd_threshold(cfg);
    if (pfa_cmd->parsed()) return cmd_pfa(cfg);
    if (pd_theory->parsed()) return cmd_pd_theory(cfg);
    if (pd_mc->parsed()) return cmd_pd_mc(cfg);
    if (compare->parsed()) return cmd_compare(cfg, "compare.csv");
    if (cfar->parsed()) return cmd_cfar_study(cfg);
    if (reproduce->parsed()) return cmd_reproduce(cfg, figure);
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 2;
}
