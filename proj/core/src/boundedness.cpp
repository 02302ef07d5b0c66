#include "lyaplab/boundedness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lyaplab/measures.hpp"
#include "lyaplab/parallel.hpp"

namespace lyaplab {

namespace {

// Geometric checkpoint horizons over the back half [ceil(N/2), N].
std::vector<long> checkpoint_grid(long N) {
  std::vector<long> grid;
  const long lo = (N + 1) / 2;
  double n = static_cast<double>(lo);
  while (static_cast<long>(n) < N) {
    grid.push_back(static_cast<long>(n));
    n *= 1.0905077326652577;  // 2^(1/8)
  }
  grid.push_back(N);
  return grid;
}

double density_from_prefix(std::span<const long> prefix, long N) {
  double best = 1.0;
  for (long n : checkpoint_grid(N)) {
    best = std::min(best, static_cast<double>(prefix[static_cast<std::size_t>(n)]) / n);
  }
  return best;
}

}  // namespace

double lower_density_estimate(std::span<const std::uint8_t> flags) {
  const long N = static_cast<long>(flags.size());
  if (N < 1) throw std::invalid_argument("lower_density_estimate: empty flags");
  std::vector<long> prefix(static_cast<std::size_t>(N) + 1, 0);
  for (long j = 0; j < N; ++j) {
    prefix[static_cast<std::size_t>(j) + 1] =
        prefix[static_cast<std::size_t>(j)] + (flags[static_cast<std::size_t>(j)] ? 1 : 0);
  }
  return density_from_prefix(prefix, N);
}

std::vector<double> default_k_list() {
  std::vector<double> ks;
  for (double k = 2.0; k <= 1024.0; k *= 2.0) ks.push_back(k);
  return ks;
}

BoundednessResult essential_boundedness_test(const GeneratorSet& set,
                                             std::vector<double> k_list,
                                             long N, int n_samples,
                                             double delta, std::uint64_t seed,
                                             int threads) {
  if (k_list.empty()) throw std::invalid_argument("essential_boundedness_test: empty K list");
  if (N < 1000) throw std::invalid_argument("essential_boundedness_test: N >= 1000 required");
  if (n_samples < 1) throw std::invalid_argument("essential_boundedness_test: n_samples >= 1");
  std::sort(k_list.begin(), k_list.end());
  const std::size_t nk = k_list.size();
  std::vector<double> log_k(nk);
  for (std::size_t i = 0; i < nk; ++i) log_k[i] = std::log(k_list[i]);

  const std::array<long, 3> horizons{N / 4, N / 2, N};
  const auto grid = checkpoint_grid(N);

  // Per sample: densities [K][horizon] and checkpoint counts [K][grid].
  std::vector<std::vector<std::array<double, 3>>> densities(
      static_cast<std::size_t>(n_samples));
  std::vector<std::vector<std::vector<long>>> counts(
      static_cast<std::size_t>(n_samples));

  parallel_for(static_cast<std::size_t>(n_samples), threads, [&](std::size_t s) {
    WordSampler sampler = set.sampler(seed, s);
    Vec2 x = set.all_constant() ? Vec2{0.0, 0.0} : sampler.next_point();
    // log ||A^j|| for j = 0..N-1 via a norm-rescaled direct product.
    std::vector<double> log_norm(static_cast<std::size_t>(N));
    Mat2 m = Mat2::identity();
    double log_scale = 0.0;
    log_norm[0] = 0.0;
    for (long j = 1; j < N; ++j) {
      const CocycleStep step = cocycle_step(set, sampler.next_symbol(), x);
      x = step.x_next;
      m = step.jac * m;
      const double big = m.max_abs();
      if (big > 1e100) {
        m = (1.0 / big) * m;
        log_scale += std::log(big);
      }
      log_norm[static_cast<std::size_t>(j)] = log_scale + std::log(operator_norm(m));
    }

    auto& dens = densities[s];
    auto& cnts = counts[s];
    dens.assign(nk, {0.0, 0.0, 0.0});
    cnts.assign(nk, std::vector<long>(grid.size(), 0));
    std::vector<long> prefix(static_cast<std::size_t>(N) + 1, 0);
    for (std::size_t k = 0; k < nk; ++k) {
      for (long j = 0; j < N; ++j) {
        prefix[static_cast<std::size_t>(j) + 1] =
            prefix[static_cast<std::size_t>(j)] +
            (log_norm[static_cast<std::size_t>(j)] <= log_k[k] ? 1 : 0);
      }
      for (int h = 0; h < 3; ++h) {
        dens[k][static_cast<std::size_t>(h)] =
            density_from_prefix(prefix, horizons[static_cast<std::size_t>(h)]);
      }
      for (std::size_t g = 0; g < grid.size(); ++g) {
        cnts[k][g] = prefix[static_cast<std::size_t>(grid[g])];
      }
    }
  });

  BoundednessResult res;
  res.delta = delta;
  res.horizon = N;
  res.stats.thresholds = k_list;
  res.stats.grid = grid;
  res.stats.horizon = N;
  res.stats.n_samples = n_samples;
  res.stats.mean_counts.assign(nk, std::vector<double>(grid.size(), 0.0));
  res.density_by_horizon.assign(nk, {0.0, 0.0, 0.0});
  for (std::size_t k = 0; k < nk; ++k) {
    for (int s = 0; s < n_samples; ++s) {
      for (int h = 0; h < 3; ++h) {
        res.density_by_horizon[k][static_cast<std::size_t>(h)] +=
            densities[static_cast<std::size_t>(s)][k][static_cast<std::size_t>(h)] / n_samples;
      }
      for (std::size_t g = 0; g < grid.size(); ++g) {
        res.stats.mean_counts[k][g] +=
            static_cast<double>(counts[static_cast<std::size_t>(s)][k][g]) / n_samples;
      }
    }
  }

  // Bounded branch: smallest K whose full-horizon density clears delta on a
  // delta fraction of the samples.
  for (std::size_t k = 0; k < nk; ++k) {
    int qualifying = 0;
    for (int s = 0; s < n_samples; ++s) {
      if (densities[static_cast<std::size_t>(s)][k][2] >= delta) ++qualifying;
    }
    if (qualifying >= delta * n_samples) {
      res.verdict = Boundedness::bounded;
      res.K = k_list[k];
      res.measured_density = res.density_by_horizon[k][2];
      return res;
    }
  }

  // Unbounded branch: every K decays across the three horizons.
  bool all_decay = true;
  for (std::size_t k = 0; k < nk; ++k) {
    const auto& d = res.density_by_horizon[k];
    const bool decays = d[2] <= 0.75 * d[0] + 1e-12 && d[2] <= d[1] + 1e-9 &&
                        d[1] <= d[0] + 1e-9;
    if (!decays) {
      all_decay = false;
      break;
    }
  }
  res.verdict = all_decay ? Boundedness::unbounded : Boundedness::inconclusive;
  return res;
}

const char* to_string(Boundedness b) {
  switch (b) {
    case Boundedness::bounded: return "bounded";
    case Boundedness::unbounded: return "unbounded";
    case Boundedness::inconclusive: return "inconclusive";
  }
  return "unknown";
}

// --- invariant conformal structure ------------------------------------------

namespace {

Mat2 det_normalized_spd(const Mat2& q) {
  const double d = q.det();
  return (1.0 / std::sqrt(d)) * q;
}

double relative_defect(const Mat2& q_from_inv_sqrt, const Mat2& jac,
                       const Mat2& q_to, const Mat2& q_from) {
  const Mat2 pulled = jac.transpose() * q_to * jac;
  const Mat2 defect = q_from_inv_sqrt * (pulled - q_from) * q_from_inv_sqrt;
  return defect.frobenius();
}

}  // namespace

MetricSearchResult invariant_metric_search(const GeneratorSet& set,
                                           long orbit_len, int sweeps,
                                           double tol, std::uint64_t seed,
                                           int cells) {
  if (orbit_len < 1) throw std::invalid_argument("invariant_metric_search: orbit_len >= 1");
  if (sweeps < 1) throw std::invalid_argument("invariant_metric_search: sweeps >= 1");
  if (cells <= 0) cells = set.all_constant() ? 1 : 64;
  const GridSpec grid = GridSpec::make(cells, 1);

  struct Transition {
    int from;
    int to;
    Mat2 jac;
  };
  std::vector<Transition> transitions;
  transitions.reserve(static_cast<std::size_t>(orbit_len));
  {
    WordSampler sampler = set.sampler(seed, 0);
    WordSampler points = set.sampler(seed, 1);
    Vec2 x = set.all_constant() ? Vec2{0.0, 0.0} : points.next_point();
    for (long j = 0; j < orbit_len; ++j) {
      const int from = grid.cell_of(x);
      const CocycleStep step = cocycle_step(set, sampler.next_symbol(), x);
      transitions.push_back({from, grid.cell_of(step.x_next), step.jac});
      x = step.x_next;
    }
  }

  std::vector<std::vector<std::size_t>> by_cell(static_cast<std::size_t>(cells));
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    by_cell[static_cast<std::size_t>(transitions[t].from)].push_back(t);
  }

  std::vector<Mat2> q(static_cast<std::size_t>(cells), Mat2::identity());
  MetricSearchResult res;
  res.cells = cells;

  auto field_residual = [&](const std::vector<Mat2>& field) {
    std::vector<Mat2> inv_sqrt(field.size());
    for (std::size_t c = 0; c < field.size(); ++c) inv_sqrt[c] = sym_sqrt_inv(field[c]);
    double worst = 0.0;
    for (const auto& t : transitions) {
      worst = std::max(worst, relative_defect(inv_sqrt[static_cast<std::size_t>(t.from)],
                                              t.jac, field[static_cast<std::size_t>(t.to)],
                                              field[static_cast<std::size_t>(t.from)]));
    }
    return worst;
  };

  double residual = field_residual(q);
  res.residual_trace.push_back(residual);
  int growth_streak = 0;
  for (int sweep = 0; sweep < sweeps && residual >= tol; ++sweep) {
    std::vector<Mat2> next = q;
    for (int c = 0; c < cells; ++c) {
      const auto& ts = by_cell[static_cast<std::size_t>(c)];
      if (ts.empty()) continue;
      // Log-domain mean of the pulled-back metrics, relaxed 1/2 toward the
      // current iterate; subtracting the trace part renormalizes det to 1.
      Mat2 acc = 0.5 * sym_log(q[static_cast<std::size_t>(c)]);
      const double w = 0.5 / static_cast<double>(ts.size());
      for (std::size_t idx : ts) {
        const auto& t = transitions[idx];
        const Mat2 pulled = det_normalized_spd(
            t.jac.transpose() * q[static_cast<std::size_t>(t.to)] * t.jac);
        acc = acc + w * sym_log(pulled);
      }
      const double half_trace = 0.5 * acc.trace();
      acc = acc - Mat2::diagonal(half_trace, half_trace);
      next[static_cast<std::size_t>(c)] = sym_exp(acc);
    }
    q = std::move(next);
    const double next_residual = field_residual(q);
    res.residual_trace.push_back(next_residual);
    growth_streak = (next_residual > residual) ? growth_streak + 1 : 0;
    residual = next_residual;
    if (growth_streak >= 3) break;
    // Anisotropy blowing up numerically is divergence too.
    double worst_cond = 0.0;
    for (const auto& qc : q) {
      const SymEigen e = sym_eigen(qc);
      worst_cond = std::max(worst_cond, e.hi / e.lo);
    }
    if (worst_cond > 1e12) break;
  }

  res.residual = residual;
  res.found = residual < tol;
  res.q_field = std::move(q);
  return res;
}

}  // namespace lyaplab
