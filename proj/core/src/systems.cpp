#include "lyaplab/systems.hpp"

#include <cmath>
#include <stdexcept>

namespace lyaplab {

double wrap_unit(double t) {
  double r = t - std::floor(t);
  if (r >= 1.0) r = 0.0;
  return r;
}

Vec2 wrap_unit(Vec2 p) { return {wrap_unit(p.x), wrap_unit(p.y)}; }

double wrap_half(double t) {
  double r = t - std::floor(t + 0.5);
  if (r >= 0.5) r = -0.5;
  return r;
}

// chi(u) = (1-u^2)^3, chi'(u) = -6u(1-u^2)^2, support [-1, 1].
static double bump_chi(double u) {
  const double w = 1.0 - u * u;
  return w * w * w;
}
static double bump_chi_deriv(double u) {
  const double w = 1.0 - u * u;
  return -6.0 * u * w * w;
}

double BumpProfile::value(double y) const {
  const double dy = wrap_half(y - center);
  const double u = dy / radius;
  if (std::abs(u) >= 1.0) return 0.0;
  return strength * dy * bump_chi(u);
}

double BumpProfile::deriv(double y) const {
  const double dy = wrap_half(y - center);
  const double u = dy / radius;
  if (std::abs(u) >= 1.0) return 0.0;
  return strength * (bump_chi(u) + u * bump_chi_deriv(u));
}

MapJet apply(const TorusMap& map, Vec2 x) {
  struct Visitor {
    Vec2 x;
    MapJet operator()(const Translation& t) const {
      return {wrap_unit(x + t.v), Mat2::identity()};
    }
    MapJet operator()(const CatMap&) const {
      return {wrap_unit(Vec2{2.0 * x.x + x.y, x.x + x.y}),
              Mat2{2.0, 1.0, 1.0, 1.0}};
    }
    MapJet operator()(const StandardMap& s) const {
      const double kick = s.K / (2.0 * kPi) * std::sin(2.0 * kPi * x.x);
      const double dkick = s.K * std::cos(2.0 * kPi * x.x);
      // Triangular factor composition keeps det = 1 exactly.
      return {wrap_unit(Vec2{x.x + x.y + kick, x.y + kick}),
              Mat2{1.0 + dkick, 1.0, dkick, 1.0}};
    }
    MapJet operator()(const Shear& s) const {
      if (s.axis == ShearAxis::horizontal) {
        return {Vec2{wrap_unit(x.x + s.profile.value(x.y)), x.y},
                Mat2{1.0, s.profile.deriv(x.y), 0.0, 1.0}};
      }
      return {Vec2{x.x, wrap_unit(x.y + s.profile.value(x.x))},
              Mat2{1.0, 0.0, s.profile.deriv(x.x), 1.0}};
    }
    MapJet operator()(const Composite& comp) const {
      MapJet jet{wrap_unit(x), Mat2::identity()};
      for (auto it = comp.maps.rbegin(); it != comp.maps.rend(); ++it) {
        const MapJet step = apply(*it, jet.y);
        jet.y = step.y;
        jet.jac = step.jac * jet.jac;
      }
      return jet;
    }
  };
  return std::visit(Visitor{wrap_unit(x)}, map.node);
}

MapJet apply(const Generator& g, Vec2 x) {
  if (const auto* cm = std::get_if<ConstantMatrix>(&g)) {
    return {x, cm->m};
  }
  return apply(std::get<TorusMap>(g), x);
}

Generator make_translation(Vec2 v) { return TorusMap{Translation{v}}; }
Generator make_cat_map() { return TorusMap{CatMap{}}; }

Generator make_standard_map(double K) {
  if (!std::isfinite(K)) throw std::domain_error("make_standard_map: bad K");
  return TorusMap{StandardMap{K}};
}

Generator make_matrix(const Mat2& m) {
  if (!m.finite() || m.det() == 0.0) {
    throw std::domain_error("make_matrix: matrix must be finite and invertible");
  }
  return ConstantMatrix{m};
}

Generator make_rotation(double angle) {
  return ConstantMatrix{Mat2::rotation(angle)};
}

Generator make_shear(ShearAxis axis, const BumpProfile& profile) {
  if (!(profile.radius > 0.0) || !std::isfinite(profile.radius) ||
      !std::isfinite(profile.center) || !std::isfinite(profile.strength)) {
    throw std::domain_error("make_shear: invalid bump profile");
  }
  if (profile.radius >= 0.5) {
    throw std::domain_error("make_shear: bump band wraps the circle (radius >= 1/2)");
  }
  BumpProfile p = profile;
  p.center = wrap_unit(p.center);
  return TorusMap{Shear{axis, p}};
}

Generator make_composite(std::vector<Generator> outermost_first) {
  Composite comp;
  comp.maps.reserve(outermost_first.size());
  for (auto& g : outermost_first) {
    if (std::holds_alternative<ConstantMatrix>(g)) {
      throw std::domain_error("make_composite: constant matrices cannot be composed with torus maps");
    }
    comp.maps.push_back(std::get<TorusMap>(std::move(g)));
  }
  return TorusMap{std::move(comp)};
}

FrameField FrameField::constant(const Mat2& m) {
  if (!m.finite() || m.det() == 0.0) {
    throw std::domain_error("FrameField::constant: frame must be invertible");
  }
  FrameField f;
  f.kind = Kind::constant;
  f.m = m;
  return f;
}

FrameField FrameField::rotation_field(Vec2 freq) {
  FrameField f;
  f.kind = Kind::rotation_field;
  f.freq = freq;
  return f;
}

Mat2 FrameField::at(Vec2 x) const {
  switch (kind) {
    case Kind::identity: return Mat2::identity();
    case Kind::constant: return m;
    case Kind::rotation_field:
      return Mat2::rotation(2.0 * kPi * (freq.x * x.x + freq.y * x.y));
  }
  return Mat2::identity();
}

Mat2 FrameField::inv_at(Vec2 x) const {
  switch (kind) {
    case Kind::identity: return Mat2::identity();
    case Kind::constant: return m.inverse();
    case Kind::rotation_field:
      return Mat2::rotation(-2.0 * kPi * (freq.x * x.x + freq.y * x.y));
  }
  return Mat2::identity();
}

bool FrameField::orthonormal() const {
  if (kind != Kind::constant) return true;
  const Mat2 g = m.transpose() * m - Mat2::identity();
  return g.max_abs() <= kAlgebraTol;
}

// --- WordSampler -----------------------------------------------------------

static std::uint64_t splitmix_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

WordSampler::WordSampler(std::uint64_t seed, std::span<const double> weights,
                         std::uint64_t stream_index)
    : seed_(seed), stream_(stream_index) {
  // Substream offset: distinct streams occupy far-apart slices of the
  // underlying counter sequence.
  state_ = seed ^ (0xA3EC647659359ACDULL * (stream_index + 1));
  (void)splitmix_next(state_);  // decorrelate trivially related seeds
  if (weights.empty()) {
    throw std::invalid_argument("WordSampler: empty weight vector");
  }
  cumulative_.assign(weights.begin(), weights.end());
  double acc = 0.0;
  for (double& w : cumulative_) {
    acc += w;
    w = acc;
  }
  cumulative_.back() = 1.0;  // guard against rounding at the top
}

double WordSampler::next_uniform() {
  return static_cast<double>(splitmix_next(state_) >> 11) * 0x1.0p-53;
}

int WordSampler::next_symbol() {
  const double u = next_uniform();
  for (std::size_t i = 0; i + 1 < cumulative_.size(); ++i) {
    if (u < cumulative_[i]) return static_cast<int>(i);
  }
  return static_cast<int>(cumulative_.size()) - 1;
}

Vec2 WordSampler::next_point() {
  const double x = next_uniform();
  const double y = next_uniform();
  return {x, y};
}

std::vector<int> sample_word(WordSampler sampler, std::size_t n) {
  std::vector<int> word(n);
  for (auto& s : word) s = sampler.next_symbol();
  return word;
}

// --- GeneratorSet -----------------------------------------------------------

GeneratorSet GeneratorSet::make(std::vector<Generator> generators,
                                std::vector<double> weights, FrameField frame) {
  if (generators.empty()) {
    throw std::invalid_argument("GeneratorSet: need at least one generator");
  }
  if (weights.empty()) {
    weights.assign(generators.size(), 1.0 / static_cast<double>(generators.size()));
  }
  if (weights.size() != generators.size()) {
    throw std::invalid_argument("GeneratorSet: weights/generators size mismatch");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) {
      throw std::invalid_argument("GeneratorSet: weights must be strictly positive");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kAlgebraTol) {
    throw std::invalid_argument("GeneratorSet: weights must sum to 1");
  }
  return {std::move(generators), std::move(weights), frame};
}

bool GeneratorSet::all_constant() const {
  for (const auto& g : generators) {
    if (!std::holds_alternative<ConstantMatrix>(g)) return false;
  }
  return true;
}

CocycleStep cocycle_step(const GeneratorSet& set, int symbol, Vec2 x) {
  const MapJet jet = apply(set.generators.at(static_cast<std::size_t>(symbol)),
                           wrap_unit(x));
  if (set.frame.kind == FrameField::Kind::identity) {
    return {jet.y, jet.jac};
  }
  return {jet.y, set.frame.at(jet.y) * jet.jac * set.frame.inv_at(x)};
}

ConservativityReport verify_conservative(const Generator& g, int n_samples,
                                         double tol) {
  if (n_samples < 1) {
    throw std::invalid_argument("verify_conservative: n_samples >= 1 required");
  }
  // R2 additive low-discrepancy sequence.
  constexpr double kAlpha1 = 0.7548776662466927;
  constexpr double kAlpha2 = 0.5698402909980532;
  ConservativityReport rep;
  for (int i = 0; i < n_samples; ++i) {
    const Vec2 x = {wrap_unit(0.5 + kAlpha1 * (i + 1)),
                    wrap_unit(0.5 + kAlpha2 * (i + 1))};
    const MapJet jet = apply(g, x);
    const double dev = std::abs(std::abs(jet.jac.det()) - 1.0);
    if (dev > rep.max_det_deviation) {
      rep.max_det_deviation = dev;
      rep.worst_point = x;
    }
  }
  rep.pass = rep.max_det_deviation <= tol;
  return rep;
}

}  // namespace lyaplab
