#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lyaplab/linalg.hpp"

// The random system (f_1,...,f_k; p): constant-matrix generators,
// conservative torus-map generators with exact analytic Jacobians, frame
// fields, the i.i.d. word sampler, and the strip-localized shear
// perturbations used to break projective invariance.

namespace lyaplab {

// Canonical reduction of torus coordinates to [0,1)^2. All mod-1 arithmetic
// in the library goes through here.
double wrap_unit(double t);
Vec2 wrap_unit(Vec2 p);
// Signed displacement wrapped to [-1/2, 1/2).
double wrap_half(double t);

// g(y) = strength * (y - center) * chi((y - center)/radius) with
// chi(u) = (1 - u^2)^3 on [-1,1], zero outside: a C^2 bump whose value
// vanishes at the center while its derivative there equals `strength`.
// Displacements are taken on the circle, so the band may not wrap
// (radius < 1/2).
struct BumpProfile {
  double center = 0.5;
  double radius = 0.25;
  double strength = 0.0;

  double value(double y) const;  // g(y)
  double deriv(double y) const;  // g'(y)
};

enum class ShearAxis { horizontal, vertical };

struct Translation {
  Vec2 v;
};
struct CatMap {};  // (x,y) -> (2x+y, x+y) mod 1
struct StandardMap {
  double K = 0.0;  // (x,y) -> (x + y + (K/2pi) sin(2pi x), y + (K/2pi) sin(2pi x))
};
struct Shear {
  ShearAxis axis = ShearAxis::horizontal;
  BumpProfile profile;
};
struct TorusMap;
// Function-composition order: maps[0] is applied last, maps.back() first,
// i.e. composite({f, g}) = f o g.
struct Composite {
  std::vector<TorusMap> maps;
};

struct TorusMap {
  std::variant<Translation, CatMap, StandardMap, Shear, Composite> node;
};

// Image point and exact Jacobian of a map evaluation.
struct MapJet {
  Vec2 y;
  Mat2 jac;
};

MapJet apply(const TorusMap& map, Vec2 x);

struct ConstantMatrix {
  Mat2 m;
};

// A generator is either a constant invertible matrix (trivial base point) or
// a conservative torus map with its derivative cocycle.
using Generator = std::variant<ConstantMatrix, TorusMap>;

MapJet apply(const Generator& g, Vec2 x);

Generator make_translation(Vec2 v);
Generator make_cat_map();
Generator make_standard_map(double K);
Generator make_matrix(const Mat2& m);
Generator make_rotation(double angle);
// Strip-localized conservative shear; fixes every point on the center line,
// where its derivative is [[1, strength],[0,1]] (horizontal) or its
// transpose (vertical). Throws std::domain_error if the bump band would wrap
// the circle (radius >= 1/2) or the profile is otherwise invalid.
Generator make_shear(ShearAxis axis, const BumpProfile& profile);
Generator make_composite(std::vector<Generator> outermost_first);

// Measurable frame field x -> P(x). `identity` is the flat frame of the
// parallelizable torus; `rotation_field` is the closed-form orthonormal
// frame P(x) = R(2 pi (freq.x x + freq.y y)); `constant` an arbitrary fixed
// invertible matrix.
struct FrameField {
  enum class Kind { identity, constant, rotation_field };
  Kind kind = Kind::identity;
  Mat2 m = Mat2::identity();  // constant frames
  Vec2 freq;                  // rotation_field frequency

  static FrameField identity() { return {}; }
  static FrameField constant(const Mat2& m);
  static FrameField rotation_field(Vec2 freq);

  Mat2 at(Vec2 x) const;
  Mat2 inv_at(Vec2 x) const;
  bool orthonormal() const;
};

// Deterministic substream RNG: the same (seed, stream_index) always yields
// the same symbol/point sequence, so per-sample parallelism is reproducible
// and contention-free. splitmix64 underneath.
class WordSampler {
 public:
  WordSampler(std::uint64_t seed, std::span<const double> weights,
              std::uint64_t stream_index = 0);

  int next_symbol();
  double next_uniform();  // [0, 1)
  Vec2 next_point();      // uniform in [0,1)^2

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_; }
  int alphabet_size() const { return static_cast<int>(cumulative_.size()); }

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::vector<double> cumulative_;
};

// Length-n i.i.d. symbol word. Takes the sampler by value: repeated calls
// with the same sampler state return the identical word.
std::vector<int> sample_word(WordSampler sampler, std::size_t n);

// The random system (f_1,...,f_k; p) together with a frame field. Immutable
// after construction; safe to share across threads.
struct GeneratorSet {
  std::vector<Generator> generators;
  std::vector<double> weights;
  FrameField frame;

  // Validates weights (strictly positive, summing to 1 within 1e-12); an
  // empty weight vector means uniform. Throws std::invalid_argument.
  static GeneratorSet make(std::vector<Generator> generators,
                           std::vector<double> weights = {},
                           FrameField frame = FrameField::identity());

  int size() const { return static_cast<int>(generators.size()); }
  WordSampler sampler(std::uint64_t seed, std::uint64_t stream_index = 0) const {
    return WordSampler(seed, weights, stream_index);
  }
  bool all_constant() const;
};

// One step of the projective-relevant cocycle data: x_next = f_symbol(x) and
// J = P(f(x)) Df(x) P(x)^{-1}.
struct CocycleStep {
  Vec2 x_next;
  Mat2 jac;
};
CocycleStep cocycle_step(const GeneratorSet& set, int symbol, Vec2 x);

// Conservativity audit at quasi-random sample points (R2 low-discrepancy
// sequence). A failing generator is reported, not rejected.
struct ConservativityReport {
  double max_det_deviation = 0.0;
  Vec2 worst_point;
  bool pass = false;
};
ConservativityReport verify_conservative(const Generator& g, int n_samples,
                                         double tol);

}  // namespace lyaplab
