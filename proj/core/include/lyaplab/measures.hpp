#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lyaplab/systems.hpp"

// Numerical stand-ins for the measure theory: particle Cesaro estimation of
// stationary measures on (phase cell x projective bin) grids, stationarity
// vs invariance defects in total variation, atom-structure detection,
// product-measure testing, and the exact two-matrix common-invariant-measure
// decision for SL(2).

namespace lyaplab {

// Phase cells are congruent rectangles: x_cells factored as grid_x * grid_y
// with grid_x the largest divisor <= sqrt(x_cells). theta bins partition
// [0, pi) evenly.
struct GridSpec {
  int x_cells = 1;
  int theta_bins = 64;
  int grid_x = 1;
  int grid_y = 1;

  static GridSpec make(int x_cells, int theta_bins);
  int cell_of(Vec2 x) const;
  int bin_of(double theta) const;
  Vec2 cell_center(int cell) const;
  double bin_center(int bin) const;
  int states() const { return x_cells * theta_bins; }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Discretized measure on (cell, bin); the numerical stand-in for the
// disintegration d mu_hat = nu_x d mu(x). Weights sum to 1.
struct GriddedMeasure {
  GridSpec grid;
  std::vector<double> weights;  // cell-major: weights[cell * theta_bins + bin]
  std::string provenance;
  double marginal_deviation = 0.0;  // max |cell marginal - 1/x_cells| observed

  double& at(int cell, int bin) { return weights[static_cast<std::size_t>(cell) * grid.theta_bins + bin]; }
  double at(int cell, int bin) const { return weights[static_cast<std::size_t>(cell) * grid.theta_bins + bin]; }
  double total() const;
  void normalize();

  static GriddedMeasure zero(GridSpec grid);
  static GriddedMeasure uniform(GridSpec grid);
};

// CSV round trip; weights are written with 17 significant digits so the
// round trip is bit-exact. Zero entries are omitted.
void write_csv(const GriddedMeasure& m, std::ostream& os,
               const std::string& header_line = {});
GriddedMeasure read_csv(std::istream& is);

// Particle realization of the Cesaro average: n_particles trajectories of
// the projective skew product (x, theta) -> (f_i(x), J_i(x) . theta) with
// i.i.d. symbols, histogrammed over all steps j < n_iter. theta_init fixes
// the initial projective point (a point mass over each start); nullopt draws
// it uniformly per particle. Counts reduce as integers, so the result is
// independent of the thread count.
GriddedMeasure cesaro_stationary(const GeneratorSet& set, GridSpec grid,
                                 long n_iter, int n_particles,
                                 std::uint64_t seed,
                                 std::optional<double> theta_init = std::nullopt,
                                 int threads = 1);

// Transports cell/bin mass through (f_i, J_i . ): cells move to the cell of
// the image of the cell center; theta mass is re-deposited bilinearly on the
// two nearest bins, so mass is conserved exactly.
GriddedMeasure push_forward(const GriddedMeasure& m, const GeneratorSet& set,
                            int symbol);

// Total variation distance between measures on the same grid, in [0, 1].
double total_variation(const GriddedMeasure& p, const GriddedMeasure& q);

// TV(push_i(m), m) for each generator, and TV(sum_i p_i push_i(m), m).
std::vector<double> invariance_defect(const GriddedMeasure& m,
                                      const GeneratorSet& set);
double stationarity_defect(const GriddedMeasure& m, const GeneratorSet& set);

struct DefectReport {
  double stationarity = 0.0;
  std::vector<double> invariance;  // per generator
  GridSpec grid;
  double max_invariance() const;
};
DefectReport compute_defects(const GriddedMeasure& m, const GeneratorSet& set);

// Sliding-window atom detection on the per-cell conditional measures.
// Thresholds are conventions, recorded in the report: a cell is a single
// atom if one window of window_bins holds >= single_window_mass, a two-atom
// cell if two disjoint windows jointly hold >= single_window_mass with each
// >= pair_min_mass; a family classification needs >= cell_fraction of the
// non-empty cells to agree.
struct AtomThresholds {
  double single_window_mass = 0.9;
  double pair_min_mass = 0.1;
  double cell_fraction = 0.95;
};

enum class AtomClassification { single_atom_family, two_atom_family, diffuse };

struct AtomStructureReport {
  AtomClassification classification = AtomClassification::diffuse;
  std::vector<double> per_cell_max_mass;     // best single window per cell
  std::vector<double> detected_atoms;        // window-center angles, all cells
  double min_cell_max_mass = 0.0;
  double empty_cell_fraction = 0.0;
  int window_bins = 1;
  AtomThresholds thresholds;
};
AtomStructureReport atom_structure(const GriddedMeasure& m, int window_bins,
                                   AtomThresholds thresholds = {});

const char* to_string(AtomClassification c);

// TV diameter of the per-cell conditional family; 0 iff the conditionals
// agree at grid resolution (returns 0 for a single cell), 1 for disjointly
// supported conditionals.
double product_measure_deviation(const GriddedMeasure& m);

// --- common invariant measure of a matrix pair ------------------------------

enum class CommonMeasureVerdict { exists, none, inconclusive };

// Descriptor of one common invariant measure when the verdict is `exists`.
struct MeasureWitness {
  enum class Kind {
    atom,              // delta at theta1
    atom_pair,         // (delta_theta1 + delta_theta2)/2
    conformal_uniform, // uniform measure of the invariant conformal structure q
    any_measure,       // one factor acts as the projective identity
  };
  Kind kind = Kind::any_measure;
  ProjPoint theta1;
  ProjPoint theta2;
  Mat2 q = Mat2::identity();
};

struct PairDecision {
  CommonMeasureVerdict verdict = CommonMeasureVerdict::inconclusive;
  std::optional<MeasureWitness> witness;
  std::string detail;
};

// Exact classification for d = 2 by projective type. A common invariant
// measure exists iff the pair shares a fixed direction, one matrix swaps the
// other's fixed-direction pair (equal-mass two-atom measure), or the pair
// preserves a common positive conformal structure (solved as a 3-variable
// homogeneous linear system with a positivity check). `inconclusive` only
// when a matrix sits within tol of the |trace| = 2 type boundary.
// Preconditions: both inputs unimodular-normalized (std::invalid_argument).
PairDecision common_invariant_measure_pair(const Mat2& a, const Mat2& b,
                                           double tol);

const char* to_string(CommonMeasureVerdict v);
const char* to_string(MeasureWitness::Kind k);

}  // namespace lyaplab
