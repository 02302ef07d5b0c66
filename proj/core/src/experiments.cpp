#include "lyaplab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lyaplab/parallel.hpp"
#include "lyaplab/version.hpp"

namespace lyaplab {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw std::runtime_error("config: " + msg);
}

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) config_error("unknown key '" + item.key() + "' in " + where);
  }
}

Vec2 parse_vec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) config_error(where + " must be a [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

Mat2 parse_mat2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    config_error(where + " must be a row-major [a, b, c, d] quadruple");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

ShearAxis parse_axis(const json& j, const std::string& where) {
  const std::string axis = j.get<std::string>();
  if (axis == "horizontal") return ShearAxis::horizontal;
  if (axis == "vertical") return ShearAxis::vertical;
  config_error(where + ": axis must be 'horizontal' or 'vertical'");
}

Generator parse_generator(const json& g, const std::string& where) {
  if (!g.is_object() || !g.contains("type")) {
    config_error(where + " must be an object with a 'type' key");
  }
  const std::string type = g.at("type").get<std::string>();
  if (type == "translation") {
    require_keys(g, where, {"type", "v"});
    if (!g.contains("v")) config_error(where + ": translation needs 'v'");
    return make_translation(parse_vec2(g.at("v"), where + ".v"));
  }
  if (type == "cat_map") {
    require_keys(g, where, {"type"});
    return make_cat_map();
  }
  if (type == "standard_map") {
    require_keys(g, where, {"type", "K"});
    if (!g.contains("K")) config_error(where + ": standard_map needs 'K'");
    return make_standard_map(g.at("K").get<double>());
  }
  if (type == "shear") {
    require_keys(g, where, {"type", "axis", "center", "radius", "strength"});
    BumpProfile p;
    p.center = g.value("center", 0.5);
    p.radius = g.value("radius", 0.25);
    p.strength = g.value("strength", 0.0);
    const ShearAxis axis =
        g.contains("axis") ? parse_axis(g.at("axis"), where) : ShearAxis::horizontal;
    return make_shear(axis, p);
  }
  if (type == "compose") {
    require_keys(g, where, {"type", "compose"});
    if (!g.contains("compose") || !g.at("compose").is_array()) {
      config_error(where + ": compose needs a 'compose' array");
    }
    std::vector<Generator> parts;
    int idx = 0;
    for (const auto& sub : g.at("compose")) {
      parts.push_back(
          parse_generator(sub, where + ".compose[" + std::to_string(idx) + "]"));
      ++idx;
    }
    return make_composite(std::move(parts));
  }
  if (type == "matrix") {
    require_keys(g, where, {"type", "m"});
    if (!g.contains("m")) config_error(where + ": matrix needs 'm'");
    return make_matrix(parse_mat2(g.at("m"), where + ".m"));
  }
  if (type == "rotation") {
    require_keys(g, where, {"type", "angle"});
    if (!g.contains("angle")) config_error(where + ": rotation needs 'angle'");
    return make_rotation(g.at("angle").get<double>());
  }
  config_error(where + ": unknown generator type '" + type + "'");
}

FrameField parse_frame(const json& f, const std::string& where) {
  if (f.is_string()) {
    if (f.get<std::string>() == "identity") return FrameField::identity();
    config_error(where + ": frame string must be 'identity'");
  }
  if (!f.is_object() || !f.contains("type")) {
    config_error(where + " must be 'identity' or an object with 'type'");
  }
  const std::string type = f.at("type").get<std::string>();
  if (type == "identity") {
    require_keys(f, where, {"type"});
    return FrameField::identity();
  }
  if (type == "constant") {
    require_keys(f, where, {"type", "m"});
    return FrameField::constant(parse_mat2(f.at("m"), where + ".m"));
  }
  if (type == "rotation_field") {
    require_keys(f, where, {"type", "freq"});
    return FrameField::rotation_field(parse_vec2(f.at("freq"), where + ".freq"));
  }
  config_error(where + ": unknown frame type '" + type + "'");
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool is_known_analysis(const std::string& name) {
  static const char* known[] = {"exponents",     "measure",
                                "boundedness",   "block_reduction",
                                "metric_search", "break_invariance",
                                "conservativity"};
  for (const char* k : known) {
    if (name == k) return true;
  }
  return false;
}

ExperimentConfig parse_config(const std::string& json_text) {
  return parse_config(json_text, ConfigOverrides{});
}

ExperimentConfig parse_config(const std::string& json_text,
                              const ConfigOverrides& ov) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) config_error("top level must be an object");

  // CLI overrides are folded into the document before hashing, so the hash
  // always reflects the effective configuration.
  if (ov.seed) j["seed"] = *ov.seed;
  if (ov.out_dir) j["out_dir"] = *ov.out_dir;
  if (ov.threads) j["threads"] = *ov.threads;
  if (ov.strict) j["strict"] = *ov.strict;
  if (ov.estimation_n) j["estimation"]["n"] = *ov.estimation_n;
  if (ov.estimation_samples) j["estimation"]["n_samples"] = *ov.estimation_samples;
  if (ov.measure_x_cells) j["measure"]["x_cells"] = *ov.measure_x_cells;
  if (ov.measure_theta_bins) j["measure"]["theta_bins"] = *ov.measure_theta_bins;
  if (ov.measure_n_iter) j["measure"]["n_iter"] = *ov.measure_n_iter;
  if (ov.measure_n_particles) j["measure"]["n_particles"] = *ov.measure_n_particles;
  if (ov.boundedness_N) j["boundedness"]["N"] = *ov.boundedness_N;
  if (ov.boundedness_delta) j["boundedness"]["delta"] = *ov.boundedness_delta;

  require_keys(j, "top level",
               {"system", "analyses", "estimation", "measure", "boundedness",
                "block_reduction", "metric_search", "perturbation", "seed",
                "out_dir", "strict", "threads"});

  ExperimentConfig cfg;
  if (!j.contains("system")) config_error("missing 'system' block");
  {
    const json& sys = j.at("system");
    require_keys(sys, "system", {"generators", "weights", "frame", "ergodicity"});
    if (!sys.contains("generators") || !sys.at("generators").is_array() ||
        sys.at("generators").empty()) {
      config_error("system.generators must be a non-empty array");
    }
    std::vector<Generator> gens;
    int idx = 0;
    for (const auto& g : sys.at("generators")) {
      gens.push_back(
          parse_generator(g, "system.generators[" + std::to_string(idx) + "]"));
      ++idx;
    }
    std::vector<double> weights;
    if (sys.contains("weights")) {
      for (const auto& w : sys.at("weights")) weights.push_back(w.get<double>());
    }
    FrameField frame = FrameField::identity();
    if (sys.contains("frame")) frame = parse_frame(sys.at("frame"), "system.frame");
    try {
      cfg.system = GeneratorSet::make(std::move(gens), std::move(weights), frame);
    } catch (const std::exception& e) {
      config_error(std::string("system: ") + e.what());
    }
    cfg.ergodicity = sys.value("ergodicity", std::string("asserted"));
  }

  if (j.contains("analyses")) {
    for (const auto& a : j.at("analyses")) {
      const std::string name = a.get<std::string>();
      if (!is_known_analysis(name)) config_error("unknown analysis '" + name + "'");
      cfg.analyses.push_back(name);
    }
  }

  if (j.contains("estimation")) {
    const json& e = j.at("estimation");
    require_keys(e, "estimation", {"n", "n_samples", "qr_stride", "burn_in", "x0"});
    cfg.estimation.n = e.value("n", cfg.estimation.n);
    cfg.estimation.n_samples = e.value("n_samples", cfg.estimation.n_samples);
    cfg.estimation.qr_stride = e.value("qr_stride", cfg.estimation.qr_stride);
    cfg.estimation.burn_in = e.value("burn_in", cfg.estimation.burn_in);
    if (e.contains("x0")) {
      if (e.at("x0").is_string()) {
        if (e.at("x0").get<std::string>() != "uniform") {
          config_error("estimation.x0 must be 'uniform' or [x, y]");
        }
      } else {
        cfg.estimation.x0 = parse_vec2(e.at("x0"), "estimation.x0");
      }
    }
    if (cfg.estimation.n < 1 || cfg.estimation.n_samples < 1 ||
        cfg.estimation.qr_stride < 1) {
      config_error("estimation counts must be positive");
    }
  }

  if (j.contains("measure")) {
    const json& m = j.at("measure");
    require_keys(m, "measure",
                 {"x_cells", "theta_bins", "n_iter", "n_particles", "theta_init",
                  "window_bins", "atom_thresholds"});
    if (m.contains("atom_thresholds")) {
      const json& t = m.at("atom_thresholds");
      require_keys(t, "measure.atom_thresholds",
                   {"single_window_mass", "pair_min_mass", "cell_fraction"});
      auto& th = cfg.measure.atom_thresholds;
      th.single_window_mass = t.value("single_window_mass", th.single_window_mass);
      th.pair_min_mass = t.value("pair_min_mass", th.pair_min_mass);
      th.cell_fraction = t.value("cell_fraction", th.cell_fraction);
    }
    cfg.measure.x_cells = m.value("x_cells", cfg.measure.x_cells);
    cfg.measure.theta_bins = m.value("theta_bins", cfg.measure.theta_bins);
    cfg.measure.n_iter = m.value("n_iter", cfg.measure.n_iter);
    cfg.measure.n_particles = m.value("n_particles", cfg.measure.n_particles);
    cfg.measure.window_bins = m.value("window_bins", cfg.measure.window_bins);
    if (m.contains("theta_init")) {
      if (m.at("theta_init").is_string()) {
        if (m.at("theta_init").get<std::string>() != "uniform") {
          config_error("measure.theta_init must be 'uniform' or a number");
        }
      } else {
        cfg.measure.theta_init = m.at("theta_init").get<double>();
      }
    }
    if (cfg.measure.x_cells < 1 || cfg.measure.theta_bins < 1 ||
        cfg.measure.n_iter < 1 || cfg.measure.n_particles < 1 ||
        cfg.measure.window_bins < 1) {
      config_error("measure counts must be positive");
    }
  }

  if (j.contains("boundedness")) {
    const json& b = j.at("boundedness");
    require_keys(b, "boundedness", {"K_list", "N", "delta", "n_samples"});
    if (b.contains("K_list")) {
      cfg.boundedness.k_list.clear();
      for (const auto& k : b.at("K_list")) {
        cfg.boundedness.k_list.push_back(k.get<double>());
      }
      if (cfg.boundedness.k_list.empty()) config_error("boundedness.K_list is empty");
    }
    cfg.boundedness.N = b.value("N", cfg.boundedness.N);
    cfg.boundedness.delta = b.value("delta", cfg.boundedness.delta);
    cfg.boundedness.n_samples = b.value("n_samples", cfg.boundedness.n_samples);
    if (cfg.boundedness.N < 1000) config_error("boundedness.N must be >= 1000");
  }

  if (j.contains("block_reduction")) {
    const json& b = j.at("block_reduction");
    require_keys(b, "block_reduction", {"n_refine", "n_test"});
    cfg.block_reduction.n_refine = b.value("n_refine", cfg.block_reduction.n_refine);
    cfg.block_reduction.n_test = b.value("n_test", cfg.block_reduction.n_test);
  }

  if (j.contains("metric_search")) {
    const json& m = j.at("metric_search");
    require_keys(m, "metric_search", {"orbit_len", "sweeps", "tol", "cells"});
    cfg.metric_search.orbit_len = m.value("orbit_len", cfg.metric_search.orbit_len);
    cfg.metric_search.sweeps = m.value("sweeps", cfg.metric_search.sweeps);
    cfg.metric_search.tol = m.value("tol", cfg.metric_search.tol);
    cfg.metric_search.cells = m.value("cells", cfg.metric_search.cells);
  }

  if (j.contains("perturbation")) {
    const json& p = j.at("perturbation");
    require_keys(p, "perturbation", {"center", "radius", "strengths", "seeds"});
    if (p.contains("center")) {
      cfg.perturbation.center = parse_vec2(p.at("center"), "perturbation.center");
    }
    cfg.perturbation.radius = p.value("radius", cfg.perturbation.radius);
    if (p.contains("strengths")) {
      for (const auto& s : p.at("strengths")) {
        cfg.perturbation.strengths.push_back(s.get<double>());
      }
    }
    if (p.contains("seeds")) {
      for (const auto& s : p.at("seeds")) {
        cfg.perturbation.seeds.push_back(s.get<std::uint64_t>());
      }
    }
  }

  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.strict = j.value("strict", cfg.strict);
  cfg.threads = j.value("threads", cfg.threads);
  if (cfg.threads < 1) config_error("threads must be >= 1");

  // Execution environment (thread count, output location) is not part of
  // the experiment identity: reruns of the same config into different
  // directories or with different --threads must hash identically.
  json hash_doc = j;
  hash_doc.erase("threads");
  hash_doc.erase("out_dir");
  cfg.canonical_json = hash_doc.dump();
  cfg.config_hash = fnv1a_hex(cfg.canonical_json);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

// --- flagship experiment -----------------------------------------------------

GeneratorSet perturbed_system(const GeneratorSet& base, const ShearParams& shear,
                              double strength) {
  std::vector<Generator> gens = base.generators;
  Generator& last = gens.back();
  if (const auto* cm = std::get_if<ConstantMatrix>(&last)) {
    const Mat2 kick = Mat2::diagonal(std::exp(strength), std::exp(-strength));
    last = make_matrix(kick * cm->m);
  } else {
    BumpProfile horiz{shear.center.y, shear.radius, strength};
    BumpProfile vert{shear.center.x, shear.radius, strength};
    last = make_composite({last, make_shear(ShearAxis::horizontal, horiz),
                           make_shear(ShearAxis::vertical, vert)});
  }
  return GeneratorSet::make(std::move(gens), base.weights, base.frame);
}

std::vector<SweepPoint> break_invariance_experiment(
    const GeneratorSet& base, const ShearParams& shear,
    const std::vector<double>& strengths,
    const std::vector<std::uint64_t>& seeds, const EstimationBlock& est,
    const MeasureBlock& meas, int threads) {
  if (strengths.empty()) return {};
  if (seeds.empty()) {
    throw std::invalid_argument("break_invariance_experiment: need at least one seed");
  }
  if (std::find(strengths.begin(), strengths.end(), 0.0) == strengths.end()) {
    throw std::invalid_argument("break_invariance_experiment: strengths must include 0");
  }

  // Pre-run: the base must be degenerate (lambda_plus ~ 0) at strength 0.
  {
    const GeneratorSet sys0 = perturbed_system(base, shear, 0.0);
    const LyapunovEstimate e0 =
        extremal_exponents(sys0, est.n, est.n_samples, seeds.front(), est.x0,
                           est.qr_stride, est.burn_in, threads);
    if (std::abs(e0.lambda_plus) > std::max(3.0 * e0.stderr_plus, 1e-3)) {
      throw std::runtime_error("base_not_degenerate");
    }
  }

  const std::size_t n_str = strengths.size();
  const std::size_t n_seed = seeds.size();
  std::vector<LyapunovEstimate> runs(n_str * n_seed);
  parallel_for(n_str * n_seed, threads, [&](std::size_t idx) {
    const std::size_t si = idx / n_seed;
    const std::size_t wi = idx % n_seed;
    const GeneratorSet sys = perturbed_system(base, shear, strengths[si]);
    runs[idx] = extremal_exponents(sys, est.n, est.n_samples, seeds[wi], est.x0,
                                   est.qr_stride, est.burn_in, /*threads=*/1);
  });

  std::vector<SweepPoint> table(n_str);
  for (std::size_t si = 0; si < n_str; ++si) {
    SweepPoint& row = table[si];
    row.strength = strengths[si];
    row.seeds.assign(seeds.begin(), seeds.end());
    row.per_seed.assign(runs.begin() + static_cast<std::ptrdiff_t>(si * n_seed),
                        runs.begin() + static_cast<std::ptrdiff_t>((si + 1) * n_seed));
    double mean = 0.0;
    int significant = 0;
    for (const auto& r : row.per_seed) {
      mean += r.lambda_plus;
      if (r.lambda_plus > 3.0 * r.stderr_plus) ++significant;
    }
    mean /= static_cast<double>(n_seed);
    row.lambda_mean = mean;
    row.fraction_significant = static_cast<double>(significant) / n_seed;
    if (n_seed > 1) {
      double var = 0.0;
      for (const auto& r : row.per_seed) {
        var += (r.lambda_plus - mean) * (r.lambda_plus - mean);
      }
      row.lambda_stderr = std::sqrt(var / (n_seed - 1) / n_seed);
    }
    const GeneratorSet sys = perturbed_system(base, shear, strengths[si]);
    const GriddedMeasure m = cesaro_stationary(
        sys, GridSpec::make(meas.x_cells, meas.theta_bins), meas.n_iter,
        meas.n_particles, seeds.front(), meas.theta_init, threads);
    const auto defects = invariance_defect(m, sys);
    row.common_measure_defect = *std::max_element(defects.begin(), defects.end());
  }
  return table;
}

// --- reports ------------------------------------------------------------------

namespace {

json sweep_to_json(const std::vector<SweepPoint>& sweep) {
  json rows = json::array();
  for (const auto& p : sweep) {
    json runs = json::array();
    for (std::size_t i = 0; i < p.per_seed.size(); ++i) {
      runs.push_back({{"seed", p.seeds[i]},
                      {"lambda_plus", p.per_seed[i].lambda_plus},
                      {"stderr_plus", p.per_seed[i].stderr_plus},
                      {"lambda_minus", p.per_seed[i].lambda_minus},
                      {"stderr_minus", p.per_seed[i].stderr_minus}});
    }
    rows.push_back({{"strength", p.strength},
                    {"lambda_plus_mean", p.lambda_mean},
                    {"lambda_plus_stderr", p.lambda_stderr},
                    {"fraction_significant", p.fraction_significant},
                    {"common_measure_defect", p.common_measure_defect},
                    {"runs", runs}});
  }
  return rows;
}

}  // namespace

std::string report_json(const ExperimentReport& rep) {
  json j;
  j["schema"] = "lyaplab-report/1";
  j["version"] = rep.version;
  j["config_hash"] = rep.config_hash;
  j["seed"] = rep.seed;
  j["ergodicity"] = rep.ergodicity;
  j["any_inconclusive"] = rep.any_inconclusive;
  j["wall_clock_seconds"] = rep.wall_clock_seconds;
  if (rep.exponents) {
    const auto& e = rep.exponents->estimate;
    j["exponents"] = {{"lambda_plus", e.lambda_plus},
                      {"lambda_minus", e.lambda_minus},
                      {"stderr_plus", e.stderr_plus},
                      {"stderr_minus", e.stderr_minus},
                      {"n", e.n},
                      {"n_samples", e.n_samples},
                      {"burn_in", e.burn_in}};
  }
  if (rep.measure) {
    const auto& m = *rep.measure;
    j["measure"] = {{"stationarity_defect", m.defects.stationarity},
                    {"invariance_defect", m.defects.invariance},
                    {"atom_classification", to_string(m.atoms.classification)},
                    {"min_cell_max_mass", m.atoms.min_cell_max_mass},
                    {"window_bins", m.atoms.window_bins},
                    {"atom_thresholds",
                     {{"single_window_mass", m.atoms.thresholds.single_window_mass},
                      {"pair_min_mass", m.atoms.thresholds.pair_min_mass},
                      {"cell_fraction", m.atoms.thresholds.cell_fraction}}},
                    {"detected_atoms", m.atoms.detected_atoms},
                    {"empty_cell_fraction", m.atoms.empty_cell_fraction},
                    {"product_deviation", m.product_deviation},
                    {"marginal_deviation", m.marginal_deviation}};
  }
  if (rep.boundedness) {
    const auto& b = rep.boundedness->result;
    json per_k = json::array();
    for (std::size_t k = 0; k < b.stats.thresholds.size(); ++k) {
      per_k.push_back({{"K", b.stats.thresholds[k]},
                       {"density_quarter", b.density_by_horizon[k][0]},
                       {"density_half", b.density_by_horizon[k][1]},
                       {"density_full", b.density_by_horizon[k][2]}});
    }
    j["boundedness"] = {{"verdict", to_string(b.verdict)},
                        {"K", b.K},
                        {"measured_density", b.measured_density},
                        {"delta", b.delta},
                        {"horizon", b.horizon},
                        {"densities", per_k}};
  }
  if (rep.metric_search) {
    j["metric_search"] = {{"found", rep.metric_search->found},
                          {"residual", rep.metric_search->residual},
                          {"cells", rep.metric_search->cells},
                          {"residual_trace", rep.metric_search->residual_trace}};
  }
  if (rep.block_reduction) {
    const auto& b = rep.block_reduction->report;
    j["block_reduction"] = {{"structure", to_string(b.structure)},
                            {"max_offblock_residual", b.max_offblock_residual},
                            {"gap", b.gap},
                            {"n_refine", b.n_refine},
                            {"n_test", b.n_test}};
  }
  if (rep.conservativity) {
    json rows = json::array();
    for (const auto& r : rep.conservativity->per_generator) {
      rows.push_back({{"max_det_deviation", r.max_det_deviation},
                      {"worst_point", {r.worst_point.x, r.worst_point.y}},
                      {"pass", r.pass}});
    }
    j["conservativity"] = rows;
  }
  if (rep.sweep_ran) {
    j["perturbation"] = {{"sweep", sweep_to_json(rep.sweep)}};
  }
  return j.dump(2) + "\n";
}

namespace {

std::string csv_header(const ExperimentConfig& cfg) {
  return "# lyaplab v" + std::string(kVersion) + ", config_hash=" + cfg.config_hash;
}

void write_exponents_csv(const ExperimentConfig& cfg, const LyapunovEstimate& e,
                         const std::filesystem::path& path) {
  std::ofstream os(path);
  os << csv_header(cfg) << "\n"
     << "lambda_plus,stderr_plus,lambda_minus,stderr_minus,n,n_samples,burn_in,seed\n"
     << fmt_double(e.lambda_plus) << "," << fmt_double(e.stderr_plus) << ","
     << fmt_double(e.lambda_minus) << "," << fmt_double(e.stderr_minus) << ","
     << e.n << "," << e.n_samples << "," << e.burn_in << "," << cfg.seed << "\n";
}

void write_sweep_csv(const ExperimentConfig& cfg,
                     const std::vector<SweepPoint>& sweep,
                     const std::filesystem::path& dir) {
  {
    std::ofstream os(dir / "sweep_summary.csv");
    os << csv_header(cfg) << "\n"
       << "strength,lambda_plus_mean,lambda_plus_stderr,fraction_significant,"
          "common_measure_defect\n";
    for (const auto& p : sweep) {
      os << fmt_double(p.strength) << "," << fmt_double(p.lambda_mean) << ","
         << fmt_double(p.lambda_stderr) << ","
         << fmt_double(p.fraction_significant) << ","
         << fmt_double(p.common_measure_defect) << "\n";
    }
  }
  {
    std::ofstream os(dir / "sweep_runs.csv");
    os << csv_header(cfg) << "\n"
       << "strength,seed,lambda_plus,stderr_plus,lambda_minus,stderr_minus\n";
    for (const auto& p : sweep) {
      for (std::size_t i = 0; i < p.per_seed.size(); ++i) {
        const auto& r = p.per_seed[i];
        os << fmt_double(p.strength) << "," << p.seeds[i] << ","
           << fmt_double(r.lambda_plus) << "," << fmt_double(r.stderr_plus)
           << "," << fmt_double(r.lambda_minus) << ","
           << fmt_double(r.stderr_minus) << "\n";
      }
    }
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.version = kVersion;
  rep.config_hash = cfg.config_hash;
  rep.seed = cfg.seed;
  rep.ergodicity = cfg.ergodicity;

  const std::filesystem::path out_dir(cfg.out_dir);
  std::filesystem::create_directories(out_dir);

  auto requested = [&](const char* name) {
    return std::find(cfg.analyses.begin(), cfg.analyses.end(), name) !=
           cfg.analyses.end();
  };

  if (requested("exponents")) {
    ExponentSection sec;
    sec.estimate = extremal_exponents(cfg.system, cfg.estimation.n,
                                      cfg.estimation.n_samples, cfg.seed,
                                      cfg.estimation.x0, cfg.estimation.qr_stride,
                                      cfg.estimation.burn_in, cfg.threads);
    write_exponents_csv(cfg, sec.estimate, out_dir / "exponents.csv");
    rep.exponents = sec;
  }

  if (requested("measure")) {
    MeasureSection sec;
    const GriddedMeasure m = cesaro_stationary(
        cfg.system, GridSpec::make(cfg.measure.x_cells, cfg.measure.theta_bins),
        cfg.measure.n_iter, cfg.measure.n_particles, cfg.seed,
        cfg.measure.theta_init, cfg.threads);
    sec.defects = compute_defects(m, cfg.system);
    sec.atoms = atom_structure(m, cfg.measure.window_bins,
                               cfg.measure.atom_thresholds);
    sec.product_deviation = product_measure_deviation(m);
    sec.marginal_deviation = m.marginal_deviation;
    std::ofstream os(out_dir / "measure.csv");
    write_csv(m, os, csv_header(cfg));
    rep.measure = sec;
  }

  if (requested("boundedness")) {
    BoundednessSection sec;
    sec.result = essential_boundedness_test(
        cfg.system, cfg.boundedness.k_list, cfg.boundedness.N,
        cfg.boundedness.n_samples, cfg.boundedness.delta, cfg.seed, cfg.threads);
    if (sec.result.verdict == Boundedness::inconclusive) rep.any_inconclusive = true;
    rep.boundedness = sec;
  }

  if (requested("metric_search")) {
    const MetricSearchResult res = invariant_metric_search(
        cfg.system, cfg.metric_search.orbit_len, cfg.metric_search.sweeps,
        cfg.metric_search.tol, cfg.seed, cfg.metric_search.cells);
    MetricSection sec;
    sec.found = res.found;
    sec.residual = res.residual;
    sec.residual_trace = res.residual_trace;
    sec.cells = res.cells;
    rep.metric_search = sec;
  }

  if (requested("block_reduction")) {
    BlockSection sec;
    sec.report = block_reduction(cfg.system, cfg.block_reduction.n_refine,
                                 cfg.block_reduction.n_test, cfg.seed);
    rep.block_reduction = sec;
  }

  if (requested("conservativity")) {
    ConservativitySection sec;
    for (const auto& g : cfg.system.generators) {
      sec.per_generator.push_back(verify_conservative(g, 4096, 1e-10));
    }
    rep.conservativity = sec;
  }

  if (requested("break_invariance")) {
    rep.sweep_ran = true;
    if (!cfg.perturbation.strengths.empty()) {
      ShearParams shear{cfg.perturbation.center, cfg.perturbation.radius};
      std::vector<std::uint64_t> seeds = cfg.perturbation.seeds;
      if (seeds.empty()) seeds.push_back(cfg.seed);
      rep.sweep = break_invariance_experiment(cfg.system, shear,
                                              cfg.perturbation.strengths, seeds,
                                              cfg.estimation, cfg.measure,
                                              cfg.threads);
      write_sweep_csv(cfg, rep.sweep, out_dir);
    }
  }

  rep.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream os(out_dir / "report.json");
  os << report_json(rep);
  return rep;
}

}  // namespace lyaplab
