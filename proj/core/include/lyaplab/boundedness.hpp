#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lyaplab/systems.hpp"

// The essential-boundedness dichotomy: lower asymptotic densities of
// bounded-norm times, the bounded/unbounded classifier, and the numerical
// compact-subgroup reduction for d = 2 via an invariant conformal structure.

namespace lyaplab {

// Finite-horizon proxy for the lower asymptotic density of {j : flags[j]}:
// the minimum of count(j < n)/n over a geometric checkpoint grid spanning
// the back half [ceil(N/2), N]. A true liminf is not computable; the proxy
// never overestimates on eventually-periodic flag patterns.
double lower_density_estimate(std::span<const std::uint8_t> flags);

// Counting data for the density estimates: mean over samples of
// #{j < n : ||A^j|| <= K} on the geometric n-grid.
struct DensityStats {
  std::vector<double> thresholds;       // K values, ascending
  std::vector<long> grid;               // checkpoint horizons n
  std::vector<std::vector<double>> mean_counts;  // [K][grid]
  long horizon = 0;
  int n_samples = 0;
};

enum class Boundedness { bounded, unbounded, inconclusive };

struct BoundednessResult {
  Boundedness verdict = Boundedness::inconclusive;
  double K = 0.0;                 // witness threshold when bounded
  double measured_density = 0.0;  // mean density at that K, horizon N
  DensityStats stats;
  // mean density per K at horizons N/4, N/2, N (decay diagnostics)
  std::vector<std::array<double, 3>> density_by_horizon;
  double delta = 0.0;
  long horizon = 0;
};

// bounded: some K attains density >= delta on >= delta of the samples.
// unbounded: for every K the mean density decays across horizons N/4, N/2, N.
// inconclusive otherwise; the dichotomy is asymptotic and a finite horizon
// genuinely cannot always decide. N must be large relative to max(K_list)
// for polynomial-growth (parabolic) cocycles to register as decaying.
BoundednessResult essential_boundedness_test(const GeneratorSet& set,
                                             std::vector<double> k_list,
                                             long N, int n_samples,
                                             double delta, std::uint64_t seed,
                                             int threads = 1);

std::vector<double> default_k_list();  // geometric {2, 4, ..., 1024}

const char* to_string(Boundedness b);

// Fixed-point search for a positive-definite field Q(x) (det-normalized,
// discretized over phase cells) with J_i(x)^T Q(f_i x) J_i(x) = Q(x) along a
// sampled orbit. Sweeps average the pulled-back metrics in the log-domain of
// positive matrices, relaxed against the current iterate. When found,
// P(x) = Q(x)^{1/2} conjugates the cocycle into O(2) up to the residual.
struct MetricSearchResult {
  bool found = false;
  double residual = 0.0;  // max relative invariance defect, measured in the Q metric
  std::vector<Mat2> q_field;          // per cell
  std::vector<double> residual_trace; // per sweep
  int cells = 1;
};
MetricSearchResult invariant_metric_search(const GeneratorSet& set,
                                           long orbit_len, int sweeps,
                                           double tol, std::uint64_t seed,
                                           int cells = 0);

}  // namespace lyaplab
