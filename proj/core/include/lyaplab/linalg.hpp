#pragma once

#include <array>
#include <cmath>
#include <numbers>

// Exact small-dimension linear algebra and projective geometry for 2x2 real
// matrices: unimodular normalization, the action on the circle of lines
// P(R^2) ~ [0, pi), closed-form singular values, and the SL(2) projective
// contraction estimate.

namespace lyaplab {

inline constexpr double kPi = std::numbers::pi;

// Default tolerances: algebraic identities vs. floating-point headroom on a
// strict inequality.
inline constexpr double kAlgebraTol = 1e-12;
inline constexpr double kInequalitySlack = 1e-9;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  double norm() const { return std::hypot(x, y); }
};

// Row-major 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Mat2 rotation(double angle) {
    const double co = std::cos(angle), si = std::sin(angle);
    return {co, -si, si, co};
  }
  static constexpr Mat2 diagonal(double p, double q) { return {p, 0.0, 0.0, q}; }

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  Mat2 transpose() const { return {a, c, b, d}; }
  double max_abs() const {
    return std::max(std::max(std::abs(a), std::abs(b)),
                    std::max(std::abs(c), std::abs(d)));
  }
  double frobenius() const { return std::sqrt(a * a + b * b + c * c + d * d); }
  bool finite() const {
    return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) &&
           std::isfinite(d);
  }

  // Throws std::domain_error on a singular matrix.
  Mat2 inverse() const;

  friend Mat2 operator*(const Mat2& m, const Mat2& n) {
    return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
            m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
  }
  friend Vec2 operator*(const Mat2& m, Vec2 v) {
    return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
  }
  friend Mat2 operator*(double s, const Mat2& m) {
    return {s * m.a, s * m.b, s * m.c, s * m.d};
  }
  friend Mat2 operator+(const Mat2& m, const Mat2& n) {
    return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d};
  }
  friend Mat2 operator-(const Mat2& m, const Mat2& n) {
    return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d};
  }
};

// Canonical reduction of an angle to [0, pi). Every angle in the library goes
// through this single routine so the boundary is handled one way only.
double wrap_pi(double theta);

// A point of P(R^2): the line spanned by (cos theta, sin theta), theta in
// [0, pi).
struct ProjPoint {
  double theta = 0.0;

  ProjPoint() = default;
  explicit ProjPoint(double t) : theta(wrap_pi(t)) {}
  Vec2 direction() const { return {std::cos(theta), std::sin(theta)}; }
};

// Wrap-around metric on [0, pi): min(|t1-t2|, pi-|t1-t2|). Range [0, pi/2].
double proj_dist(ProjPoint p, ProjPoint q);

// A / |det A|^(1/2); the result has |det| = 1 and the same projective action.
// Throws std::domain_error on singular or non-finite input.
Mat2 normalize_unimodular(const Mat2& m);

bool is_unimodular(const Mat2& m, double tol = kAlgebraTol);

// Induced action of an invertible matrix on P(R^2).
ProjPoint proj_act(const Mat2& m, ProjPoint p);

// QR factorization m = Q R with Q a rotation (or rotation times a column
// flip) and R upper triangular with positive diagonal (r0, r1).
struct QrFactors {
  Mat2 q;
  double r0 = 0.0;
  double r1 = 0.0;
  double r01 = 0.0;
  Mat2 r() const { return {r0, r01, 0.0, r1}; }
};
QrFactors qr2(const Mat2& m);

// Closed-form singular data of an invertible 2x2 matrix: theta0 minimizes
// ||A e^(i theta)|| over the circle, s_min = ||A e^(i theta0)||, s_max = ||A||
// (operator norm). s_min * s_max = |det A| holds by construction. Conformal
// matrices (s_min = s_max) are flagged degenerate and get theta0 = 0 by
// convention; downstream contraction checks must skip them.
struct MinExpansion {
  ProjPoint theta0;
  double s_min = 0.0;
  double s_max = 0.0;
  bool degenerate = false;
};
MinExpansion min_expansion_direction(const Mat2& m);

// Operator 2-norm (largest singular value), closed form.
double operator_norm(const Mat2& m);

// The projective contraction estimate for unimodular A: if both angles stay
// eps away from the most-contracted direction theta0, their images under the
// projective action are at most 2 pi^3 / (||A||^2 eps^2) apart.
//
// Preconditions (re-verified, std::domain_error otherwise): A is
// unimodular-normalized, eps > 0, proj_dist(theta_i, theta0) >= eps.
struct ContractionCheck {
  bool holds = false;
  double lhs = 0.0;
  double bound = 0.0;
};
ContractionCheck check_contraction_lemma(const Mat2& m, double eps,
                                         ProjPoint theta1, ProjPoint theta2);

// --- symmetric positive-definite helpers (used by the compact-reduction
// search; kept here with the rest of the closed-form 2x2 spectral code) ---

// Eigen-decomposition of a symmetric matrix: m = R diag(lo, hi) R^T.
struct SymEigen {
  double lo = 0.0;
  double hi = 0.0;
  Mat2 rot;  // columns are the eigenvectors for (lo, hi)
};
SymEigen sym_eigen(const Mat2& m);

Mat2 sym_log(const Mat2& spd);   // matrix log of an SPD matrix
Mat2 sym_exp(const Mat2& sym);   // matrix exp of a symmetric matrix
Mat2 sym_sqrt(const Mat2& spd);  // principal square root
Mat2 sym_sqrt_inv(const Mat2& spd);

}  // namespace lyaplab
