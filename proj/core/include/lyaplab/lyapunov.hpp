#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "lyaplab/systems.hpp"

// QR-renormalized cocycle iteration, extremal Lyapunov exponent estimation
// with across-sample uncertainty, Oseledets direction estimation along
// words, and the cohomological block-form reduction for hyperbolic systems.

namespace lyaplab {

// Tie detection: direction-dependent estimates are refused below this many
// nats of (lambda_plus - lambda_minus) * horizon.
inline constexpr double kGapThreshold = 5.0;

// Factored state of the matrix product A^n(x) = Q * (R_k ... R_1): base
// point, orthonormal Q, and accumulated logs of the triangular diagonals.
struct TrajectoryState {
  Vec2 x;
  Mat2 q = Mat2::identity();
  std::array<double, 2> log_r{0.0, 0.0};
  long n = 0;
};

struct LyapunovEstimate {
  double lambda_plus = 0.0;   // nats per step
  double lambda_minus = 0.0;
  double stderr_plus = 0.0;   // across-sample standard error (0 if 1 sample)
  double stderr_minus = 0.0;
  long n = 0;                 // averaged steps per sample (after burn-in)
  int n_samples = 0;
  long burn_in = 0;
};

// Burn-in excluded from exponent averaging (removes transient alignment
// bias): max(10^3, n/100).
long default_burn_in(long n);

inline constexpr int kDefaultQrStride = 16;

// Iterates the cocycle n steps from x0 with re-orthonormalization every
// qr_stride steps. log_r accumulates exactly: prod r0 = ||A^n e1||,
// prod r0 * prod r1 = |det A^n|. Throws `renormalization_too_sparse` (a
// std::runtime_error) if an intermediate product overflows 1e300.
TrajectoryState iterate_qr(const GeneratorSet& set, WordSampler sampler,
                           Vec2 x0, long n, int qr_stride = kDefaultQrStride);

// Extremal exponents over n_samples independent words (substreams of seed).
// x0: fixed base point, or nullopt to draw uniformly per sample.
LyapunovEstimate extremal_exponents(const GeneratorSet& set, long n,
                                    int n_samples, std::uint64_t seed,
                                    std::optional<Vec2> x0 = std::nullopt,
                                    int qr_stride = kDefaultQrStride,
                                    long burn_in = -1, int threads = 1);

// Oseledets directions at the endpoint x_n of the first n symbols of `word`.
// E_plus is the forward-push limit (aligned with the expanding direction at
// x_n); E_minus is obtained by pulling a generic direction backwards through
// the inverses of the next `n` symbols, i.e. the word must also supply the
// future of x_n: word.size() >= 2n. `resolved` is false when either
// segment's hyperbolicity gap is below kGapThreshold.
struct OseledetsDirections {
  ProjPoint e_plus;
  ProjPoint e_minus;
  double gap = 0.0;  // min of past/future segment gaps, in nats
  bool resolved = false;
  Vec2 x_end;
};
OseledetsDirections oseledets_directions(const GeneratorSet& set,
                                         std::span<const int> word, Vec2 x0,
                                         long n);

// Evaluates B_j = P(x_{j+1})^{-1} J_j P(x_j) along a sampled orbit, with
// P(x) = [U(x), V(x)] built from the Oseledets direction estimates
// aggregated per phase cell (a frame indexed by the word instead of the base
// point would satisfy the block form vacuously). Reports the largest entry
// that the block form says should vanish; the residual converges to zero
// exactly when a frame depending on the base point alone can carry the
// splitting, and floors at the word-dependence of the splitting otherwise.
enum class BlockStructure { diagonal_or_antidiagonal, upper_triangular, not_applicable };

struct BlockReductionReport {
  BlockStructure structure = BlockStructure::not_applicable;
  double max_offblock_residual = 0.0;
  double gap = 0.0;  // hyperbolicity gap over the refinement horizon
  long n_refine = 0;
  long n_test = 0;
};
BlockReductionReport block_reduction(const GeneratorSet& set, long n_refine,
                                     long n_test, std::uint64_t seed);

const char* to_string(BlockStructure s);

}  // namespace lyaplab
