#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lyaplab/boundedness.hpp"
#include "lyaplab/lyapunov.hpp"
#include "lyaplab/measures.hpp"
#include "lyaplab/systems.hpp"

// Config-driven experiment runner: wires the modules into reproducible
// analyses, above all the flagship perturbation experiment (perturb one
// generator of a degenerate system and watch the extremal exponents leave
// zero), and emits CSV data plus a JSON report.

namespace lyaplab {

struct EstimationBlock {
  long n = 100000;
  int n_samples = 8;
  int qr_stride = kDefaultQrStride;
  long burn_in = -1;  // -1: default_burn_in(n)
  std::optional<Vec2> x0;  // nullopt: uniform per sample
};

struct MeasureBlock {
  int x_cells = 1;
  int theta_bins = 256;
  long n_iter = 100000;
  int n_particles = 64;
  std::optional<double> theta_init;  // nullopt: uniform per particle
  int window_bins = 3;
  AtomThresholds atom_thresholds;
};

struct BoundednessBlock {
  std::vector<double> k_list = default_k_list();
  long N = 100000;
  double delta = 0.1;
  int n_samples = 8;
};

struct BlockReductionBlock {
  long n_refine = 10000;
  long n_test = 100;
};

struct MetricSearchBlock {
  long orbit_len = 4096;
  int sweeps = 400;
  double tol = 1e-8;
  int cells = 0;  // 0: auto (1 for constant systems, 64 otherwise)
};

struct PerturbationBlock {
  Vec2 center{0.5, 0.5};
  double radius = 0.25;
  std::vector<double> strengths;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  GeneratorSet system = GeneratorSet::make({make_cat_map()});
  std::vector<std::string> analyses;  // subset of the analysis names below
  EstimationBlock estimation;
  MeasureBlock measure;
  BoundednessBlock boundedness;
  BlockReductionBlock block_reduction;
  MetricSearchBlock metric_search;
  PerturbationBlock perturbation;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  bool strict = false;
  int threads = 1;
  std::string ergodicity = "asserted";

  std::string canonical_json;  // effective config, canonical form
  std::string config_hash;     // FNV-1a 64 of canonical_json, hex
};

// Known analysis names: exponents, measure, boundedness, block_reduction,
// metric_search, break_invariance, conservativity.
bool is_known_analysis(const std::string& name);

// Parses and validates a config. Unknown keys are errors naming the key.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

// CLI-level overrides are applied to the JSON before hashing so the config
// hash always matches the effective configuration.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<bool> strict;
  std::optional<long> estimation_n;
  std::optional<int> estimation_samples;
  std::optional<int> measure_x_cells;
  std::optional<int> measure_theta_bins;
  std::optional<long> measure_n_iter;
  std::optional<int> measure_n_particles;
  std::optional<long> boundedness_N;
  std::optional<double> boundedness_delta;
};
ExperimentConfig parse_config(const std::string& json_text,
                              const ConfigOverrides& overrides);

// --- flagship experiment -----------------------------------------------------

struct ShearParams {
  Vec2 center{0.5, 0.5};
  double radius = 0.25;
};

struct SweepPoint {
  double strength = 0.0;
  double lambda_mean = 0.0;
  double lambda_stderr = 0.0;          // across seeds
  double fraction_significant = 0.0;   // seeds with lambda_plus > 3 stderr
  double common_measure_defect = 0.0;  // max invariance defect of the Cesaro measure
  std::vector<std::uint64_t> seeds;
  std::vector<LyapunovEstimate> per_seed;
};

// Replaces the last generator f_k by f_k composed with a strip shear pair of
// the given strength (horizontal then vertical, sharing the fixed point
// `center`); for a constant-matrix generator the analog diag(e^s, e^-s) is
// composed instead. Requires strengths to include 0 and the base system to
// be degenerate (lambda_plus within noise of 0 at strength 0), else throws
// `base_not_degenerate`.
std::vector<SweepPoint> break_invariance_experiment(
    const GeneratorSet& base, const ShearParams& shear,
    const std::vector<double>& strengths,
    const std::vector<std::uint64_t>& seeds, const EstimationBlock& estimation,
    const MeasureBlock& measure, int threads = 1);

// The perturbed system for one strength (exposed for tests and the CLI).
GeneratorSet perturbed_system(const GeneratorSet& base, const ShearParams& shear,
                              double strength);

// --- reports -----------------------------------------------------------------

struct ExponentSection {
  LyapunovEstimate estimate;
};
struct MeasureSection {
  DefectReport defects;
  AtomStructureReport atoms;
  double product_deviation = 0.0;
  double marginal_deviation = 0.0;
};
struct BoundednessSection {
  BoundednessResult result;
};
struct MetricSection {
  bool found = false;
  double residual = 0.0;
  std::vector<double> residual_trace;
  int cells = 1;
};
struct BlockSection {
  BlockReductionReport report;
};
struct ConservativitySection {
  std::vector<ConservativityReport> per_generator;
};

struct ExperimentReport {
  std::string version;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string ergodicity;
  std::optional<ExponentSection> exponents;
  std::optional<MeasureSection> measure;
  std::optional<BoundednessSection> boundedness;
  std::optional<MetricSection> metric_search;
  std::optional<BlockSection> block_reduction;
  std::optional<ConservativitySection> conservativity;
  std::vector<SweepPoint> sweep;  // empty when no perturbation sweep ran
  bool sweep_ran = false;
  bool any_inconclusive = false;
  double wall_clock_seconds = 0.0;  // informational; not in CSV outputs
};

std::string report_json(const ExperimentReport& report);

// Runs the requested analyses, writes CSV outputs and report.json under
// config.out_dir, and returns the report. Reruns with an identical
// (config, seed) produce byte-identical CSV files regardless of the thread
// count.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace lyaplab
