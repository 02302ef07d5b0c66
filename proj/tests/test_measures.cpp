#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lyaplab/measures.hpp"

using namespace lyaplab;

namespace {

// Free-standing Cesaro oracle for the pair decision: iterate a long random
// word of {A, B} on the circle of lines, histogram the visits, and measure
// the invariance defect of the empirical measure under each matrix. Written
// against raw atan2 arithmetic so it shares nothing with the classifier.
struct PairOracle {
  double defect = 1.0;
  bool confident_exists(double tol) const { return defect < tol / 10.0; }
  bool confident_none(double tol) const { return defect > 10.0 * tol; }
};

double oracle_act(const Mat2& m, double theta) {
  const double vx = std::cos(theta), vy = std::sin(theta);
  const double wx = m.a * vx + m.b * vy, wy = m.c * vx + m.d * vy;
  double t = std::atan2(wy, wx);
  if (t < 0.0) t += kPi;
  if (t >= kPi) t -= kPi;
  return t;
}

PairOracle pair_oracle(const Mat2& a, const Mat2& b, std::uint64_t seed,
                       long steps = 400000, int bins = 1024) {
  std::uint64_t state = seed * 0x9E3779B97F4A7C15ULL + 1;
  auto next_u01 = [&state]() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return static_cast<double>((z ^ (z >> 31)) >> 11) * 0x1.0p-53;
  };
  // Histogram deposits use the same bilinear kernel as the push below, so an
  // atom on a bin boundary does not show a spurious defect.
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  double theta = 0.37;
  for (long j = 0; j < steps; ++j) {
    const double t = theta / kPi * bins - 0.5;
    const double fl = std::floor(t);
    const int i0 = (static_cast<int>(fl) % bins + bins) % bins;
    const int i1 = (i0 + 1) % bins;
    hist[static_cast<std::size_t>(i0)] += 1.0 - (t - fl);
    hist[static_cast<std::size_t>(i1)] += t - fl;
    theta = oracle_act(next_u01() < 0.5 ? a : b, theta);
  }
  for (double& h : hist) h /= static_cast<double>(steps);

  auto push_defect = [&](const Mat2& m) {
    std::vector<double> pushed(static_cast<std::size_t>(bins), 0.0);
    for (int bin = 0; bin < bins; ++bin) {
      const double center = (bin + 0.5) * kPi / bins;
      const double image = oracle_act(m, center);
      const double t = image / kPi * bins - 0.5;
      const double fl = std::floor(t);
      const double frac = t - fl;
      const int i0 = (static_cast<int>(fl) % bins + bins) % bins;
      const int i1 = (i0 + 1) % bins;
      pushed[static_cast<std::size_t>(i0)] += hist[static_cast<std::size_t>(bin)] * (1.0 - frac);
      pushed[static_cast<std::size_t>(i1)] += hist[static_cast<std::size_t>(bin)] * frac;
    }
    double tv = 0.0;
    for (int bin = 0; bin < bins; ++bin) {
      tv += std::abs(pushed[static_cast<std::size_t>(bin)] - hist[static_cast<std::size_t>(bin)]);
    }
    return 0.5 * tv;
  };
  PairOracle o;
  o.defect = std::max(push_defect(a), push_defect(b));
  return o;
}

Mat2 random_sl2(std::mt19937_64& rng, double t_max = 4.0) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double t = std::exp(unit(rng) * std::log(t_max));
  Mat2 m = Mat2::rotation(angle(rng)) * Mat2::diagonal(t, 1.0 / t) *
           Mat2::rotation(angle(rng));
  if (unit(rng) < 0.3) m = m * Mat2::diagonal(1.0, -1.0);
  return m;
}

}  // namespace

TEST_CASE("grid spec") {
  const GridSpec g = GridSpec::make(32, 256);
  CHECK(g.grid_x == 4);
  CHECK(g.grid_y == 8);
  CHECK(g.cell_of({0.999999, 0.999999}) == 31);
  CHECK(g.cell_of({0.0, 0.0}) == 0);
  CHECK(g.bin_of(kPi - 1e-15) == 255);
  CHECK(g.bin_of(0.0) == 0);
  const GridSpec one = GridSpec::make(1, 64);
  CHECK(one.cell_of({0.5, 0.5}) == 0);
  CHECK_THROWS_AS(GridSpec::make(0, 64), std::invalid_argument);
}

TEST_CASE("cesaro stationary measures") {
  SUBCASE("irrational rotation equidistributes on the circle of lines") {
    const GeneratorSet set = GeneratorSet::make({make_rotation(1.0)});
    const GriddedMeasure m =
        cesaro_stationary(set, GridSpec::make(1, 64), 100000, 4, 17);
    const GriddedMeasure u = GriddedMeasure::uniform(GridSpec::make(1, 64));
    CHECK(total_variation(m, u) <= 0.02);
  }
  SUBCASE("contracting cocycle concentrates at the attracting axis") {
    const GeneratorSet set = GeneratorSet::make({make_matrix(Mat2::diagonal(2.0, 0.5))});
    const GridSpec grid = GridSpec::make(1, 256);
    const GriddedMeasure m = cesaro_stationary(set, grid, 1000, 32, 18);
    // mass within one bin of theta = 0 (bins 0 and 255 straddle the axis)
    const double near0 = m.at(0, 0) + m.at(0, 255) + m.at(0, 1);
    CHECK(near0 > 0.99);
  }
  SUBCASE("identity generators leave the initial histogram unmoved") {
    const GeneratorSet set = GeneratorSet::make({make_translation({0.0, 0.0})});
    const GridSpec grid = GridSpec::make(1, 64);
    const GriddedMeasure m = cesaro_stationary(set, grid, 500, 8, 19, 0.3);
    CHECK(m.at(0, grid.bin_of(0.3)) == doctest::Approx(1.0));
  }
  SUBCASE("mass is normalized and the marginal follows Lebesgue") {
    const GeneratorSet set =
        GeneratorSet::make({make_cat_map(), make_translation({0.41, 0.29})});
    const GriddedMeasure m =
        cesaro_stationary(set, GridSpec::make(16, 32), 20000, 16, 20);
    CHECK(m.total() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.marginal_deviation <= 0.01);
  }
}

TEST_CASE("push-forward and defects") {
  SUBCASE("push conserves mass exactly") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const GeneratorSet set =
        GeneratorSet::make({make_cat_map(), make_standard_map(1.1)});
    GriddedMeasure m = GriddedMeasure::zero(GridSpec::make(8, 32));
    for (double& w : m.weights) w = unit(rng);
    m.normalize();
    for (int i = 0; i < set.size(); ++i) {
      const GriddedMeasure pushed = push_forward(m, set, i);
      CHECK(pushed.total() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("rotation-invariant: uniform measure has tiny defects") {
    const GeneratorSet set =
        GeneratorSet::make({make_rotation(0.7), make_rotation(2.1)});
    const GriddedMeasure u = GriddedMeasure::uniform(GridSpec::make(1, 128));
    const DefectReport rep = compute_defects(u, set);
    CHECK(rep.stationarity <= 2.0 / 128.0);
    CHECK(rep.max_invariance() <= 2.0 / 128.0);
  }
  SUBCASE("stationary but not invariant: transverse hyperbolic pair") {
    // Mild hyperbolicity: strong contraction concentrates the empirical
    // measure below grid resolution, and pushing the binned measure then
    // aliases; t = 1.3 keeps the measure resolvable at 256 bins.
    const Mat2 d = Mat2::diagonal(1.3, 1.0 / 1.3);
    const Mat2 r = Mat2::rotation(kPi / 4.0);
    const GeneratorSet set =
        GeneratorSet::make({make_matrix(d), make_matrix(r * d * r.inverse())});
    const GriddedMeasure m =
        cesaro_stationary(set, GridSpec::make(1, 256), 200000, 8, 23);
    const DefectReport rep = compute_defects(m, set);
    CHECK(rep.stationarity < 0.05);
    CHECK(rep.max_invariance() > 0.2);
    // convexity: stationarity defect is below the weighted invariance defects
    double mix = 0.0;
    for (int i = 0; i < set.size(); ++i) {
      mix += set.weights[static_cast<std::size_t>(i)] * rep.invariance[static_cast<std::size_t>(i)];
    }
    CHECK(rep.stationarity <= mix + 1e-12);

    // grid refinement does not wash the defect out
    const GriddedMeasure m128 =
        cesaro_stationary(set, GridSpec::make(1, 128), 200000, 8, 23);
    const DefectReport rep128 = compute_defects(m128, set);
    CHECK(rep.max_invariance() >= rep128.max_invariance() - 0.05);
  }
  SUBCASE("a moved atom has full invariance defect") {
    const GeneratorSet set = GeneratorSet::make({make_matrix(Mat2::diagonal(2.0, 0.5))});
    GriddedMeasure m = GriddedMeasure::zero(GridSpec::make(1, 256));
    m.at(0, m.grid.bin_of(0.3)) = 1.0;
    const auto defects = invariance_defect(m, set);
    CHECK(defects[0] >= 0.95);
  }
  SUBCASE("incompatible measures are rejected") {
    const GeneratorSet set = GeneratorSet::make({make_cat_map()});
    GriddedMeasure m = GriddedMeasure::zero(GridSpec::make(1, 16));
    CHECK_THROWS_AS(invariance_defect(m, set), std::invalid_argument);  // zero mass
  }
}

TEST_CASE("atom structure") {
  SUBCASE("synthetic two-atom families are recognized") {
    GriddedMeasure m = GriddedMeasure::zero(GridSpec::make(4, 256));
    for (int c = 0; c < 4; ++c) {
      m.at(c, m.grid.bin_of(0.0)) = 0.125;
      m.at(c, m.grid.bin_of(kPi / 2.0)) = 0.125;
    }
    const AtomStructureReport rep = atom_structure(m, 3);
    CHECK(rep.classification == AtomClassification::two_atom_family);
    for (double w : rep.per_cell_max_mass) CHECK(w == doctest::Approx(0.5));
  }
  SUBCASE("a concentrated family is a single atom family") {
    GriddedMeasure m = GriddedMeasure::zero(GridSpec::make(4, 256));
    for (int c = 0; c < 4; ++c) m.at(c, 40 + c) = 0.25;
    const AtomStructureReport rep = atom_structure(m, 3);
    CHECK(rep.classification == AtomClassification::single_atom_family);
    CHECK(rep.min_cell_max_mass == doctest::Approx(1.0));
  }
  SUBCASE("the uniform measure is diffuse") {
    const GriddedMeasure u = GriddedMeasure::uniform(GridSpec::make(2, 256));
    const AtomStructureReport rep = atom_structure(u, 5);
    CHECK(rep.classification == AtomClassification::diffuse);
    CHECK(rep.min_cell_max_mass == doctest::Approx(5.0 / 256.0));
  }
}

TEST_CASE("product measure deviation") {
  SUBCASE("identical conditionals give zero") {
    GriddedMeasure m = GriddedMeasure::zero(GridSpec::make(8, 32));
    for (int c = 0; c < 8; ++c) {
      m.at(c, 3) = 0.0625;
      m.at(c, 17) = 0.0625;
    }
    CHECK(product_measure_deviation(m) == 0.0);
  }
  SUBCASE("maximally x-dependent conditionals give one") {
    GriddedMeasure m = GriddedMeasure::zero(GridSpec::make(8, 256));
    for (int c = 0; c < 8; ++c) {
      m.at(c, c < 4 ? m.grid.bin_of(0.0) : m.grid.bin_of(kPi / 2.0)) = 0.125;
    }
    CHECK(product_measure_deviation(m) >= 0.95);
  }
  SUBCASE("constant-derivative cocycles have product invariant measures") {
    const GeneratorSet set = GeneratorSet::make({make_cat_map()});
    const GriddedMeasure m =
        cesaro_stationary(set, GridSpec::make(32, 256), 100000, 16, 29);
    CHECK(product_measure_deviation(m) < 0.05);
  }
  SUBCASE("single cell returns zero by convention") {
    CHECK(product_measure_deviation(GriddedMeasure::uniform(GridSpec::make(1, 8))) == 0.0);
  }
}

TEST_CASE("csv round trip is bit-exact") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GriddedMeasure m = GriddedMeasure::zero(GridSpec::make(6, 48));
  for (double& w : m.weights) {
    if (unit(rng) < 0.3) w = unit(rng);
  }
  m.normalize();
  m.provenance = "test fixture";
  std::ostringstream os;
  write_csv(m, os, "# lyaplab v0.0.0, config_hash=deadbeef");
  std::istringstream is(os.str());
  const GriddedMeasure back = read_csv(is);
  REQUIRE(back.grid == m.grid);
  REQUIRE(back.weights.size() == m.weights.size());
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    CHECK(back.weights[i] == m.weights[i]);  // bitwise
  }
  CHECK(back.provenance == m.provenance);
}

TEST_CASE("common invariant measure of a matrix pair") {
  const double tol = 1e-6;
  const Mat2 diag = Mat2::diagonal(2.0, 0.5);

  SUBCASE("shared eigendirections") {
    const PairDecision d =
        common_invariant_measure_pair(diag, Mat2::diagonal(3.0, 1.0 / 3.0), tol);
    CHECK(d.verdict == CommonMeasureVerdict::exists);
    REQUIRE(d.witness.has_value());
    CHECK(d.witness->kind == MeasureWitness::Kind::atom);
  }
  SUBCASE("two rotations share the uniform measure") {
    const PairDecision d = common_invariant_measure_pair(Mat2::rotation(0.9),
                                                         Mat2::rotation(2.2), tol);
    CHECK(d.verdict == CommonMeasureVerdict::exists);
    REQUIRE(d.witness.has_value());
    CHECK(d.witness->kind == MeasureWitness::Kind::conformal_uniform);
  }
  SUBCASE("transverse hyperbolic pair has none") {
    const Mat2 r = Mat2::rotation(kPi / 4.0);
    const PairDecision d =
        common_invariant_measure_pair(diag, r * diag * r.inverse(), tol);
    CHECK(d.verdict == CommonMeasureVerdict::none);
  }
  SUBCASE("a quarter rotation swaps the axes: equal-mass atom pair") {
    const PairDecision d =
        common_invariant_measure_pair(diag, Mat2::rotation(kPi / 2.0), tol);
    CHECK(d.verdict == CommonMeasureVerdict::exists);
    REQUIRE(d.witness.has_value());
    CHECK(d.witness->kind == MeasureWitness::Kind::atom_pair);
    CHECK(proj_dist(d.witness->theta1, ProjPoint(0.0)) <= 1e-9);
    CHECK(proj_dist(d.witness->theta2, ProjPoint(kPi / 2.0)) <= 1e-9);
  }
  SUBCASE("planted conjugated rotations share a conformal structure") {
    const Mat2 p{2.0, 1.0, 0.0, 1.0};
    const Mat2 pn = normalize_unimodular(p);
    const Mat2 a = pn * Mat2::rotation(0.8) * pn.inverse();
    const Mat2 b = pn * Mat2::rotation(1.9) * pn.inverse();
    const PairDecision d = common_invariant_measure_pair(a, b, tol);
    CHECK(d.verdict == CommonMeasureVerdict::exists);
    REQUIRE(d.witness.has_value());
    CHECK(d.witness->kind == MeasureWitness::Kind::conformal_uniform);
    // the invariant structure is Q = P^-T P^-1 up to scale
    const Mat2 expected = normalize_unimodular(pn.inverse().transpose() * pn.inverse());
    CHECK((d.witness->q - expected).max_abs() <= 1e-9);
  }
  SUBCASE("elliptic vs hyperbolic with no relation: none") {
    const PairDecision d = common_invariant_measure_pair(diag, Mat2::rotation(0.9), tol);
    CHECK(d.verdict == CommonMeasureVerdict::none);
  }
  SUBCASE("parabolic pairs decide on the fixed direction") {
    const Mat2 par{1.0, 1.0, 0.0, 1.0};
    const Mat2 par_same{1.0, -2.5, 0.0, 1.0};
    const Mat2 r = Mat2::rotation(0.4);
    const PairDecision same = common_invariant_measure_pair(par, par_same, tol);
    CHECK(same.verdict == CommonMeasureVerdict::exists);
    const PairDecision off =
        common_invariant_measure_pair(par, r * par * r.inverse(), tol);
    CHECK(off.verdict == CommonMeasureVerdict::none);
  }
  SUBCASE("projective identity partners always succeed") {
    const PairDecision d =
        common_invariant_measure_pair(Mat2::diagonal(-1.0, -1.0), diag, tol);
    CHECK(d.verdict == CommonMeasureVerdict::exists);
  }
  SUBCASE("the |trace| = 2 boundary is inconclusive within tol") {
    // trace 2 + 1e-8 with determinant 1: inside the ambiguity band
    const Mat2 near_parabolic{1.5, 0.5, -0.5 + 3e-8, 0.5 + 1e-8};
    REQUIRE(std::abs(near_parabolic.det() - 1.0) < 1e-9);
    const PairDecision d = common_invariant_measure_pair(near_parabolic, diag, tol);
    CHECK(d.verdict == CommonMeasureVerdict::inconclusive);
  }
  SUBCASE("non-normalized input is rejected") {
    CHECK_THROWS_AS(common_invariant_measure_pair(Mat2::diagonal(3.0, 1.0), diag, tol),
                    std::invalid_argument);
  }
  SUBCASE("never contradicts the Cesaro oracle where it is confident") {
    const double otol = 0.02;
    std::mt19937_64 rng(61);
    int confident = 0;
    for (int i = 0; i < 40; ++i) {
      const Mat2 a = normalize_unimodular(random_sl2(rng));
      const Mat2 b = normalize_unimodular(random_sl2(rng));
      const PairDecision d = common_invariant_measure_pair(a, b, tol);
      if (d.verdict == CommonMeasureVerdict::inconclusive) continue;
      const PairOracle o = pair_oracle(a, b, 1000 + static_cast<std::uint64_t>(i));
      if (o.confident_exists(otol)) {
        ++confident;
        CHECK(d.verdict == CommonMeasureVerdict::exists);
      } else if (o.confident_none(otol)) {
        ++confident;
        CHECK(d.verdict == CommonMeasureVerdict::none);
      }
    }
    CHECK(confident > 10);  // the oracle must actually bite
  }
}
