#include "lyaplab/measures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lyaplab/parallel.hpp"

namespace lyaplab {

// --- grid -------------------------------------------------------------------

GridSpec GridSpec::make(int x_cells, int theta_bins) {
  if (x_cells < 1 || theta_bins < 1) {
    throw std::invalid_argument("GridSpec: cell and bin counts must be >= 1");
  }
  GridSpec g;
  g.x_cells = x_cells;
  g.theta_bins = theta_bins;
  g.grid_x = 1;
  for (int d = 1; d * d <= x_cells; ++d) {
    if (x_cells % d == 0) g.grid_x = d;
  }
  g.grid_y = x_cells / g.grid_x;
  return g;
}

int GridSpec::cell_of(Vec2 x) const {
  const Vec2 p = wrap_unit(x);
  const int ix = std::min(grid_x - 1, static_cast<int>(p.x * grid_x));
  const int iy = std::min(grid_y - 1, static_cast<int>(p.y * grid_y));
  return iy * grid_x + ix;
}

int GridSpec::bin_of(double theta) const {
  const double t = wrap_pi(theta);
  return std::min(theta_bins - 1, static_cast<int>(t / kPi * theta_bins));
}

Vec2 GridSpec::cell_center(int cell) const {
  const int ix = cell % grid_x;
  const int iy = cell / grid_x;
  return {(ix + 0.5) / grid_x, (iy + 0.5) / grid_y};
}

double GridSpec::bin_center(int bin) const {
  return (bin + 0.5) * kPi / theta_bins;
}

double GriddedMeasure::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void GriddedMeasure::normalize() {
  const double t = total();
  if (t <= 0.0) throw std::domain_error("GriddedMeasure::normalize: zero mass");
  for (double& w : weights) w /= t;
}

GriddedMeasure GriddedMeasure::zero(GridSpec grid) {
  GriddedMeasure m;
  m.grid = grid;
  m.weights.assign(static_cast<std::size_t>(grid.states()), 0.0);
  return m;
}

GriddedMeasure GriddedMeasure::uniform(GridSpec grid) {
  GriddedMeasure m = zero(grid);
  const double w = 1.0 / grid.states();
  for (double& v : m.weights) v = w;
  return m;
}

// --- csv --------------------------------------------------------------------

void write_csv(const GriddedMeasure& m, std::ostream& os,
               const std::string& header_line) {
  if (!header_line.empty()) os << header_line << "\n";
  std::size_t entries = 0;
  for (double w : m.weights) entries += (w != 0.0);
  os << "# gridded_measure x_cells=" << m.grid.x_cells
     << " theta_bins=" << m.grid.theta_bins << " grid_x=" << m.grid.grid_x
     << " grid_y=" << m.grid.grid_y << " entries=" << entries << "\n";
  if (!m.provenance.empty()) os << "# provenance: " << m.provenance << "\n";
  os << "cell,bin,weight\n";
  char buf[64];
  for (int c = 0; c < m.grid.x_cells; ++c) {
    for (int b = 0; b < m.grid.theta_bins; ++b) {
      const double w = m.at(c, b);
      if (w == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%.17g", w);
      os << c << "," << b << "," << buf << "\n";
    }
  }
}

GriddedMeasure read_csv(std::istream& is) {
  std::string line;
  GriddedMeasure m;
  bool have_grid = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("gridded_measure");
      if (pos != std::string::npos) {
        int x_cells = 0, theta_bins = 0;
        if (std::sscanf(line.c_str() + pos,
                        "gridded_measure x_cells=%d theta_bins=%d", &x_cells,
                        &theta_bins) == 2) {
          m.grid = GridSpec::make(x_cells, theta_bins);
          m.weights.assign(static_cast<std::size_t>(m.grid.states()), 0.0);
          have_grid = true;
        }
      }
      const auto prov = line.find("provenance: ");
      if (prov != std::string::npos) m.provenance = line.substr(prov + 12);
      continue;
    }
    if (line.rfind("cell,", 0) == 0) continue;
    if (!have_grid) throw std::runtime_error("read_csv: missing gridded_measure header");
    int c = 0, b = 0;
    double w = 0.0;
    if (std::sscanf(line.c_str(), "%d,%d,%lg", &c, &b, &w) != 3) {
      throw std::runtime_error("read_csv: malformed row: " + line);
    }
    if (c < 0 || c >= m.grid.x_cells || b < 0 || b >= m.grid.theta_bins) {
      throw std::runtime_error("read_csv: cell/bin out of range: " + line);
    }
    m.at(c, b) = w;
  }
  if (!have_grid) throw std::runtime_error("read_csv: missing gridded_measure header");
  return m;
}

// --- Cesaro averaging -------------------------------------------------------

GriddedMeasure cesaro_stationary(const GeneratorSet& set, GridSpec grid,
                                 long n_iter, int n_particles,
                                 std::uint64_t seed,
                                 std::optional<double> theta_init,
                                 int threads) {
  if (n_iter < 1 || n_particles < 1) {
    throw std::invalid_argument("cesaro_stationary: n_iter and n_particles must be >= 1");
  }
  const std::size_t states = static_cast<std::size_t>(grid.states());
  const int groups = std::max(1, std::min(threads, n_particles));
  std::vector<std::vector<std::uint64_t>> counts(
      static_cast<std::size_t>(groups), std::vector<std::uint64_t>(states, 0));

  parallel_for(static_cast<std::size_t>(groups), threads, [&](std::size_t g) {
    auto& local = counts[g];
    for (int p = static_cast<int>(g); p < n_particles; p += groups) {
      WordSampler sampler = set.sampler(seed, static_cast<std::uint64_t>(p));
      Vec2 x = sampler.next_point();
      ProjPoint theta = theta_init ? ProjPoint(*theta_init)
                                   : ProjPoint(kPi * sampler.next_uniform());
      for (long j = 0; j < n_iter; ++j) {
        ++local[static_cast<std::size_t>(grid.cell_of(x)) * grid.theta_bins +
                grid.bin_of(theta.theta)];
        const int symbol = sampler.next_symbol();
        const CocycleStep step = cocycle_step(set, symbol, x);
        x = step.x_next;
        theta = proj_act(step.jac, theta);
      }
    }
  });

  GriddedMeasure m = GriddedMeasure::zero(grid);
  const double total = static_cast<double>(n_iter) * n_particles;
  for (const auto& local : counts) {
    for (std::size_t i = 0; i < states; ++i) {
      m.weights[i] += static_cast<double>(local[i]);
    }
  }
  for (double& w : m.weights) w /= total;

  double worst = 0.0;
  for (int c = 0; c < grid.x_cells; ++c) {
    double marg = 0.0;
    for (int b = 0; b < grid.theta_bins; ++b) marg += m.at(c, b);
    worst = std::max(worst, std::abs(marg - 1.0 / grid.x_cells));
  }
  m.marginal_deviation = worst;

  std::ostringstream prov;
  prov << "cesaro seed=" << seed << " n_iter=" << n_iter
       << " n_particles=" << n_particles << " theta_init="
       << (theta_init ? std::to_string(*theta_init) : std::string("uniform"))
       << " marginal_dev=" << worst;
  m.provenance = prov.str();
  return m;
}

// --- push-forward and defects -----------------------------------------------

GriddedMeasure push_forward(const GriddedMeasure& m, const GeneratorSet& set,
                            int symbol) {
  GriddedMeasure out = GriddedMeasure::zero(m.grid);
  const int bins = m.grid.theta_bins;
  for (int c = 0; c < m.grid.x_cells; ++c) {
    const Vec2 xc = m.grid.cell_center(c);
    const CocycleStep step = cocycle_step(set, symbol, xc);
    const int c_next = m.grid.cell_of(step.x_next);
    for (int b = 0; b < bins; ++b) {
      const double w = m.at(c, b);
      if (w == 0.0) continue;
      const ProjPoint image = proj_act(step.jac, ProjPoint(m.grid.bin_center(b)));
      const double t = image.theta / kPi * bins - 0.5;
      const double fl = std::floor(t);
      const double frac = t - fl;
      const int i0 = (static_cast<int>(fl) % bins + bins) % bins;
      const int i1 = (i0 + 1) % bins;
      out.at(c_next, i0) += w * (1.0 - frac);
      out.at(c_next, i1) += w * frac;
    }
  }
  out.provenance = m.provenance;
  return out;
}

double total_variation(const GriddedMeasure& p, const GriddedMeasure& q) {
  if (!(p.grid == q.grid)) {
    throw std::invalid_argument("total_variation: grids are incompatible");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    s += std::abs(p.weights[i] - q.weights[i]);
  }
  return 0.5 * s;
}

static void require_normalized(const GriddedMeasure& m) {
  if (m.weights.size() != static_cast<std::size_t>(m.grid.states())) {
    throw std::invalid_argument("measure/grid are incompatible");
  }
  if (std::abs(m.total() - 1.0) > 1e-6) {
    throw std::invalid_argument("measure is not normalized");
  }
}

std::vector<double> invariance_defect(const GriddedMeasure& m,
                                      const GeneratorSet& set) {
  require_normalized(m);
  std::vector<double> out;
  out.reserve(set.generators.size());
  for (int i = 0; i < set.size(); ++i) {
    out.push_back(total_variation(push_forward(m, set, i), m));
  }
  return out;
}

double stationarity_defect(const GriddedMeasure& m, const GeneratorSet& set) {
  require_normalized(m);
  GriddedMeasure mix = GriddedMeasure::zero(m.grid);
  for (int i = 0; i < set.size(); ++i) {
    const GriddedMeasure pushed = push_forward(m, set, i);
    const double p = set.weights[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < mix.weights.size(); ++k) {
      mix.weights[k] += p * pushed.weights[k];
    }
  }
  return total_variation(mix, m);
}

double DefectReport::max_invariance() const {
  double worst = 0.0;
  for (double d : invariance) worst = std::max(worst, d);
  return worst;
}

DefectReport compute_defects(const GriddedMeasure& m, const GeneratorSet& set) {
  DefectReport rep;
  rep.grid = m.grid;
  rep.invariance = invariance_defect(m, set);
  rep.stationarity = stationarity_defect(m, set);
  return rep;
}

// --- atom structure ----------------------------------------------------------

namespace {

// Circular sliding-window sums of width `wb` over a conditional row.
std::vector<double> window_sums(std::span<const double> row, int wb) {
  const int bins = static_cast<int>(row.size());
  std::vector<double> sums(static_cast<std::size_t>(bins), 0.0);
  double acc = 0.0;
  for (int k = 0; k < wb; ++k) acc += row[static_cast<std::size_t>(k % bins)];
  for (int s = 0; s < bins; ++s) {
    sums[static_cast<std::size_t>(s)] = acc;
    acc -= row[static_cast<std::size_t>(s)];
    acc += row[static_cast<std::size_t>((s + wb) % bins)];
  }
  return sums;
}

bool windows_disjoint(int s1, int s2, int wb, int bins) {
  const int fwd = ((s2 - s1) % bins + bins) % bins;
  const int bwd = ((s1 - s2) % bins + bins) % bins;
  return fwd >= wb && bwd >= wb;
}

}  // namespace

AtomStructureReport atom_structure(const GriddedMeasure& m, int window_bins,
                                   AtomThresholds thresholds) {
  if (window_bins < 1 || window_bins > m.grid.theta_bins) {
    throw std::invalid_argument("atom_structure: window_bins out of range");
  }
  AtomStructureReport rep;
  rep.window_bins = window_bins;
  rep.thresholds = thresholds;

  const int bins = m.grid.theta_bins;
  int non_empty = 0, singles = 0, pairs = 0;
  double min_max_mass = 1.0;
  for (int c = 0; c < m.grid.x_cells; ++c) {
    double mass = 0.0;
    for (int b = 0; b < bins; ++b) mass += m.at(c, b);
    if (mass <= 1e-15) continue;
    ++non_empty;
    std::vector<double> row(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) row[static_cast<std::size_t>(b)] = m.at(c, b) / mass;
    const auto sums = window_sums(row, window_bins);

    int s1 = 0;
    for (int s = 1; s < bins; ++s) {
      if (sums[static_cast<std::size_t>(s)] > sums[static_cast<std::size_t>(s1)]) s1 = s;
    }
    const double w1 = sums[static_cast<std::size_t>(s1)];
    double w2 = 0.0;
    int s2 = -1;
    for (int s = 0; s < bins; ++s) {
      if (!windows_disjoint(s1, s, window_bins, bins)) continue;
      if (sums[static_cast<std::size_t>(s)] > w2) {
        w2 = sums[static_cast<std::size_t>(s)];
        s2 = s;
      }
    }

    rep.per_cell_max_mass.push_back(w1);
    min_max_mass = std::min(min_max_mass, w1);
    const double center1 = wrap_pi((s1 + 0.5 * window_bins) * kPi / bins);
    rep.detected_atoms.push_back(center1);

    if (w1 >= thresholds.single_window_mass) {
      ++singles;
    } else if (s2 >= 0 && w1 >= thresholds.pair_min_mass &&
               w2 >= thresholds.pair_min_mass &&
               w1 + w2 >= thresholds.single_window_mass) {
      ++pairs;
      rep.detected_atoms.push_back(wrap_pi((s2 + 0.5 * window_bins) * kPi / bins));
    }
  }

  rep.empty_cell_fraction =
      1.0 - static_cast<double>(non_empty) / std::max(1, m.grid.x_cells);
  rep.min_cell_max_mass = (non_empty > 0) ? min_max_mass : 0.0;
  if (non_empty == 0) {
    rep.classification = AtomClassification::diffuse;
    return rep;
  }
  const double frac_single = static_cast<double>(singles) / non_empty;
  const double frac_atomic = static_cast<double>(singles + pairs) / non_empty;
  if (frac_single >= thresholds.cell_fraction) {
    rep.classification = AtomClassification::single_atom_family;
  } else if (frac_atomic >= thresholds.cell_fraction) {
    rep.classification = AtomClassification::two_atom_family;
  } else {
    rep.classification = AtomClassification::diffuse;
  }
  return rep;
}

const char* to_string(AtomClassification c) {
  switch (c) {
    case AtomClassification::single_atom_family: return "single_atom_family";
    case AtomClassification::two_atom_family: return "two_atom_family";
    case AtomClassification::diffuse: return "diffuse";
  }
  return "unknown";
}

double product_measure_deviation(const GriddedMeasure& m) {
  if (m.grid.x_cells < 2) return 0.0;
  const int bins = m.grid.theta_bins;
  std::vector<std::vector<double>> conds;
  for (int c = 0; c < m.grid.x_cells; ++c) {
    double mass = 0.0;
    for (int b = 0; b < bins; ++b) mass += m.at(c, b);
    if (mass <= 1e-15) continue;
    std::vector<double> row(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) row[static_cast<std::size_t>(b)] = m.at(c, b) / mass;
    conds.push_back(std::move(row));
  }
  if (conds.size() < 2) return 0.0;
  // TV diameter of the conditional family: zero iff the conditionals agree
  // at grid resolution, one when cells carry disjoint atoms.
  double worst = 0.0;
  for (std::size_t i = 0; i < conds.size(); ++i) {
    for (std::size_t j = i + 1; j < conds.size(); ++j) {
      double tv = 0.0;
      for (int b = 0; b < bins; ++b) {
        tv += std::abs(conds[i][static_cast<std::size_t>(b)] -
                       conds[j][static_cast<std::size_t>(b)]);
      }
      worst = std::max(worst, 0.5 * tv);
    }
  }
  return worst;
}

// --- common invariant measure of a matrix pair --------------------------------

namespace {

constexpr double kExactTol = 1e-12;
constexpr double kGeomTol = 1e-9;

bool proj_identity(const Mat2& m) {
  return std::abs(m.b) <= kExactTol && std::abs(m.c) <= kExactTol &&
         std::abs(m.a - m.d) <= kExactTol;
}

// Real fixed directions of the projective action (eigendirections with real
// eigenvalues). Empty for elliptic matrices.
std::vector<ProjPoint> fixed_directions(const Mat2& m) {
  const double tr = m.trace();
  const double det = m.det();
  const double disc = tr * tr - 4.0 * det;
  std::vector<ProjPoint> dirs;
  auto eigendir = [&](double lambda) {
    const Vec2 v1{m.b, lambda - m.a};
    const Vec2 v2{lambda - m.d, m.c};
    const Vec2 v = (v1.norm() >= v2.norm()) ? v1 : v2;
    if (v.norm() == 0.0) return;  // scalar matrix; caller handles identity
    dirs.emplace_back(std::atan2(v.y, v.x));
  };
  if (det > 0.0) {
    if (std::abs(std::abs(tr) - 2.0) <= kExactTol) {
      eigendir(tr / 2.0);  // parabolic: a single fixed direction
    } else if (disc > 0.0) {
      const double root = std::sqrt(disc);
      eigendir((tr + root) / 2.0);
      eigendir((tr - root) / 2.0);
    }
    // elliptic: none
  } else {
    const double root = std::sqrt(disc);
    eigendir((tr + root) / 2.0);
    eigendir((tr - root) / 2.0);
  }
  return dirs;
}

// Rows of the linear system M^T Q M = Q in the unknowns (q1, q2, q3) for
// Q = [[q1, q3], [q3, q2]].
std::array<std::array<double, 3>, 3> invariance_rows(const Mat2& m) {
  return {{{m.a * m.a - 1.0, m.c * m.c, 2.0 * m.a * m.c},
           {m.a * m.b, m.c * m.d, m.a * m.d + m.b * m.c - 1.0},
           {m.b * m.b, m.d * m.d - 1.0, 2.0 * m.b * m.d}}};
}

std::array<double, 3> cross3(const std::array<double, 3>& u,
                             const std::array<double, 3>& v) {
  return {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
          u[0] * v[1] - u[1] * v[0]};
}

double norm3(const std::array<double, 3>& u) {
  return std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
}

double dot3(const std::array<double, 3>& u, const std::array<double, 3>& v) {
  return u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
}

bool positive_definite(std::array<double, 3> q, Mat2* out) {
  if (q[0] + q[1] < 0.0) {
    for (double& v : q) v = -v;
  }
  const double detq = q[0] * q[1] - q[2] * q[2];
  const double scale = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
  if (q[0] <= 0.0 || detq <= 1e-12 * scale) return false;
  // det-normalize
  const double s = 1.0 / std::sqrt(detq);
  *out = Mat2{q[0] * s, q[2] * s, q[2] * s, q[1] * s};
  return true;
}

// Searches the (at most two-dimensional) null space of the stacked
// invariance rows for a positive-definite solution.
bool common_conformal_structure(const Mat2& a, const Mat2& b, Mat2* q_out) {
  std::vector<std::array<double, 3>> rows;
  for (const auto& r : invariance_rows(a)) rows.push_back(r);
  for (const auto& r : invariance_rows(b)) rows.push_back(r);
  double row_scale = 0.0;
  for (const auto& r : rows) row_scale = std::max(row_scale, norm3(r));
  if (row_scale == 0.0) return false;  // both projectively identity

  std::vector<std::array<double, 3>> live;
  for (const auto& r : rows) {
    if (norm3(r) > 1e-13 * row_scale) live.push_back(r);
  }

  auto residual_of = [&](const std::array<double, 3>& q) {
    const double nq = norm3(q);
    double worst = 0.0;
    for (const auto& r : live) {
      worst = std::max(worst, std::abs(dot3(r, q)) / (norm3(r) * nq));
    }
    return worst;
  };

  // Rank >= 2: the null direction shows up as a cross product of two rows.
  std::array<double, 3> best{};
  double best_res = 1.0;
  double max_cross = 0.0;
  for (std::size_t i = 0; i < live.size(); ++i) {
    for (std::size_t j = i + 1; j < live.size(); ++j) {
      const auto c = cross3(live[i], live[j]);
      const double nc = norm3(c);
      max_cross = std::max(max_cross, nc / (norm3(live[i]) * norm3(live[j])));
      if (nc <= 1e-13 * norm3(live[i]) * norm3(live[j])) continue;
      const double res = residual_of(c);
      if (res < best_res) {
        best_res = res;
        best = c;
      }
    }
  }
  if (best_res <= kGeomTol) {
    return positive_definite(best, q_out);
  }

  // All rows parallel (rank 1): scan the orthogonal plane for a
  // positive-definite element.
  if (max_cross <= 1e-10 && !live.empty()) {
    const auto& r = live.front();
    std::array<double, 3> u =
        (std::abs(r[0]) < 0.9 * norm3(r)) ? cross3(r, {1, 0, 0}) : cross3(r, {0, 1, 0});
    const double nu = norm3(u);
    for (double& v : u) v /= nu;
    auto w = cross3(r, u);
    const double nw = norm3(w);
    for (double& v : w) v /= nw;
    Mat2 best_q;
    double best_det = 0.0;
    for (int k = 0; k < 180; ++k) {
      const double t = k * kPi / 180.0;
      const std::array<double, 3> q{u[0] * std::cos(t) + w[0] * std::sin(t),
                                    u[1] * std::cos(t) + w[1] * std::sin(t),
                                    u[2] * std::cos(t) + w[2] * std::sin(t)};
      Mat2 cand;
      if (positive_definite(q, &cand)) {
        const double d = (q[0] * q[1] - q[2] * q[2]) /
                         (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
        if (d > best_det) {
          best_det = d;
          best_q = cand;
        }
      }
    }
    if (best_det > 0.0) {
      *q_out = best_q;
      return true;
    }
  }
  return false;
}

// Canonical invariant measure of a single unimodular matrix, used when the
// partner acts as the projective identity.
MeasureWitness canonical_invariant(const Mat2& m) {
  MeasureWitness w;
  if (proj_identity(m)) {
    w.kind = MeasureWitness::Kind::any_measure;
    return w;
  }
  const auto dirs = fixed_directions(m);
  if (!dirs.empty()) {
    w.kind = MeasureWitness::Kind::atom;
    w.theta1 = dirs.front();
    return w;
  }
  Mat2 q;
  if (common_conformal_structure(m, m, &q)) {
    w.kind = MeasureWitness::Kind::conformal_uniform;
    w.q = q;
    return w;
  }
  w.kind = MeasureWitness::Kind::any_measure;  // unreachable for unimodular m
  return w;
}

}  // namespace

PairDecision common_invariant_measure_pair(const Mat2& a, const Mat2& b,
                                           double tol) {
  if (!is_unimodular(a, 1e-9) || !is_unimodular(b, 1e-9)) {
    throw std::invalid_argument(
        "common_invariant_measure_pair: inputs must be unimodular-normalized");
  }
  PairDecision out;

  if (proj_identity(a) || proj_identity(b)) {
    out.verdict = CommonMeasureVerdict::exists;
    out.witness = canonical_invariant(proj_identity(a) ? b : a);
    out.detail = "one factor acts as the projective identity";
    return out;
  }

  // Type boundary |trace| = 2 (positive determinant only; the negative
  // determinant spectrum is always well separated).
  for (const Mat2* m : {&a, &b}) {
    if (m->det() > 0.0) {
      const double edge = std::abs(std::abs(m->trace()) - 2.0);
      if (edge > kExactTol && edge <= tol) {
        out.verdict = CommonMeasureVerdict::inconclusive;
        out.detail = "matrix sits within tol of the |trace| = 2 boundary";
        return out;
      }
    }
  }

  const auto fa = fixed_directions(a);
  const auto fb = fixed_directions(b);

  for (const auto& pa : fa) {
    for (const auto& pb : fb) {
      if (proj_dist(pa, pb) <= kGeomTol) {
        out.verdict = CommonMeasureVerdict::exists;
        out.witness = MeasureWitness{MeasureWitness::Kind::atom, pa, {}, {}};
        out.detail = "shared fixed direction";
        return out;
      }
    }
  }

  auto swaps_pair = [](const Mat2& m, const std::vector<ProjPoint>& dirs) {
    return dirs.size() == 2 &&
           proj_dist(proj_act(m, dirs[0]), dirs[1]) <= kGeomTol &&
           proj_dist(proj_act(m, dirs[1]), dirs[0]) <= kGeomTol;
  };
  if (swaps_pair(b, fa)) {
    out.verdict = CommonMeasureVerdict::exists;
    out.witness = MeasureWitness{MeasureWitness::Kind::atom_pair, fa[0], fa[1], {}};
    out.detail = "second matrix swaps the fixed-direction pair of the first";
    return out;
  }
  if (swaps_pair(a, fb)) {
    out.verdict = CommonMeasureVerdict::exists;
    out.witness = MeasureWitness{MeasureWitness::Kind::atom_pair, fb[0], fb[1], {}};
    out.detail = "first matrix swaps the fixed-direction pair of the second";
    return out;
  }

  Mat2 q;
  if (common_conformal_structure(a, b, &q)) {
    out.verdict = CommonMeasureVerdict::exists;
    out.witness = MeasureWitness{MeasureWitness::Kind::conformal_uniform, {}, {}, q};
    out.detail = "common invariant positive conformal structure";
    return out;
  }

  out.verdict = CommonMeasureVerdict::none;
  out.detail = "no shared atoms, swapped pair, or common conformal structure";
  return out;
}

const char* to_string(CommonMeasureVerdict v) {
  switch (v) {
    case CommonMeasureVerdict::exists: return "exists";
    case CommonMeasureVerdict::none: return "none";
    case CommonMeasureVerdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

const char* to_string(MeasureWitness::Kind k) {
  switch (k) {
    case MeasureWitness::Kind::atom: return "atom";
    case MeasureWitness::Kind::atom_pair: return "atom_pair";
    case MeasureWitness::Kind::conformal_uniform: return "conformal_uniform";
    case MeasureWitness::Kind::any_measure: return "any_measure";
  }
  return "unknown";
}

}  // namespace lyaplab
