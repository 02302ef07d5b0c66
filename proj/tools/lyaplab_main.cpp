// lyaplab: config-driven experiments on random products of conservative maps
// and linear cocycles. `run` executes the analyses requested in the config;
// `exponents`, `measure` and `boundedness` run a single analysis with inline
// overrides of the matching config keys.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lyaplab/experiments.hpp"
#include "lyaplab/version.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  lyaplab::ConfigOverrides overrides;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&flags](std::uint64_t v) { flags.overrides.seed = v; },
      "Override the config seed");
  cmd->add_option_function<std::string>(
      "--out", [&flags](const std::string& v) { flags.overrides.out_dir = v; },
      "Output directory");
  cmd->add_option_function<int>(
      "--threads", [&flags](int v) { flags.overrides.threads = v; },
      "Worker threads (results are thread-count independent)");
  cmd->add_flag_function(
      "--strict",
      [&flags](std::int64_t) { flags.overrides.strict = true; },
      "Exit with code 2 on any inconclusive verdict");
}

lyaplab::ExperimentConfig load(const CommonFlags& flags) {
  std::ifstream in(flags.config_path);
  std::ostringstream text;
  text << in.rdbuf();
  return lyaplab::parse_config(text.str(), flags.overrides);
}

int finish(const lyaplab::ExperimentReport& rep, const lyaplab::ExperimentConfig& cfg) {
  std::cout << "config_hash=" << rep.config_hash << " seed=" << rep.seed
            << " wall_clock=" << rep.wall_clock_seconds << "s\n";
  if (rep.exponents) {
    const auto& e = rep.exponents->estimate;
    std::printf("lambda_plus  = %+.6f (stderr %.2e)\n", e.lambda_plus, e.stderr_plus);
    std::printf("lambda_minus = %+.6f (stderr %.2e)\n", e.lambda_minus, e.stderr_minus);
  }
  if (rep.measure) {
    const auto& m = *rep.measure;
    std::printf("stationarity_defect = %.4f, max_invariance_defect = %.4f\n",
                m.defects.stationarity, m.defects.max_invariance());
    std::printf("atoms: %s (min cell max window mass %.3f)\n",
                lyaplab::to_string(m.atoms.classification), m.atoms.min_cell_max_mass);
  }
  if (rep.boundedness) {
    const auto& b = rep.boundedness->result;
    std::printf("boundedness: %s", lyaplab::to_string(b.verdict));
    if (b.verdict == lyaplab::Boundedness::bounded) {
      std::printf(" (K=%g, density=%.3f)", b.K, b.measured_density);
    }
    std::printf("\n");
  }
  if (rep.metric_search) {
    std::printf("invariant metric: %s (residual %.3e)\n",
                rep.metric_search->found ? "found" : "not found",
                rep.metric_search->residual);
  }
  if (rep.block_reduction) {
    std::printf("block reduction: %s (residual %.3e)\n",
                lyaplab::to_string(rep.block_reduction->report.structure),
                rep.block_reduction->report.max_offblock_residual);
  }
  if (rep.sweep_ran) {
    for (const auto& p : rep.sweep) {
      std::printf(
          "strength %-8g lambda_plus %+.6f +- %.2e  significant %.0f%%  defect %.3f\n",
          p.strength, p.lambda_mean, p.lambda_stderr,
          100.0 * p.fraction_significant, p.common_measure_defect);
    }
  }
  std::cout << "report: " << cfg.out_dir << "/report.json\n";
  if (cfg.strict && rep.any_inconclusive) return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lyaplab: Lyapunov exponents of random conservative systems"};
  app.set_version_flag("--version", std::string("lyaplab v") + lyaplab::kVersion);
  app.require_subcommand(1);

  CommonFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Run the analyses requested in the config");
  add_common(run, run_flags);

  CommonFlags exp_flags;
  CLI::App* exponents =
      app.add_subcommand("exponents", "Estimate the extremal Lyapunov exponents");
  add_common(exponents, exp_flags);
  exponents->add_option_function<long>(
      "--n", [&exp_flags](long v) { exp_flags.overrides.estimation_n = v; },
      "Steps per sample");
  exponents->add_option_function<int>(
      "--n-samples",
      [&exp_flags](int v) { exp_flags.overrides.estimation_samples = v; },
      "Independent word samples");

  CommonFlags meas_flags;
  CLI::App* measure =
      app.add_subcommand("measure", "Estimate the Cesaro stationary measure");
  add_common(measure, meas_flags);
  measure->add_option_function<int>(
      "--x-cells", [&meas_flags](int v) { meas_flags.overrides.measure_x_cells = v; },
      "Phase cells");
  measure->add_option_function<int>(
      "--theta-bins",
      [&meas_flags](int v) { meas_flags.overrides.measure_theta_bins = v; },
      "Projective bins");
  measure->add_option_function<long>(
      "--n-iter", [&meas_flags](long v) { meas_flags.overrides.measure_n_iter = v; },
      "Steps per particle");
  measure->add_option_function<int>(
      "--n-particles",
      [&meas_flags](int v) { meas_flags.overrides.measure_n_particles = v; },
      "Particles");

  CommonFlags bnd_flags;
  CLI::App* boundedness =
      app.add_subcommand("boundedness", "Essential boundedness classification");
  add_common(boundedness, bnd_flags);
  boundedness->add_option_function<long>(
      "--N", [&bnd_flags](long v) { bnd_flags.overrides.boundedness_N = v; },
      "Horizon");
  boundedness->add_option_function<double>(
      "--delta", [&bnd_flags](double v) { bnd_flags.overrides.boundedness_delta = v; },
      "Density threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    CommonFlags* flags = &run_flags;
    std::vector<std::string> analyses;
    if (exponents->parsed()) {
      flags = &exp_flags;
      analyses = {"exponents"};
    } else if (measure->parsed()) {
      flags = &meas_flags;
      analyses = {"measure"};
    } else if (boundedness->parsed()) {
      flags = &bnd_flags;
      analyses = {"boundedness"};
    }
    lyaplab::ExperimentConfig cfg = load(*flags);
    if (!analyses.empty()) cfg.analyses = analyses;
    const lyaplab::ExperimentReport rep = lyaplab::run_experiment(cfg);
    return finish(rep, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
