#include "lyaplab/linalg.hpp"

#include <sstream>
#include <stdexcept>

namespace lyaplab {

double wrap_pi(double theta) {
  double r = std::fmod(theta, kPi);
  if (r < 0.0) r += kPi;
  if (r >= kPi) r = 0.0;  // fmod/rounding can land exactly on pi
  return r;
}

double proj_dist(ProjPoint p, ProjPoint q) {
  const double d = std::abs(p.theta - q.theta);
  return std::min(d, kPi - d);
}

Mat2 Mat2::inverse() const {
  const double dt = det();
  if (dt == 0.0 || !std::isfinite(dt)) {
    throw std::domain_error("Mat2::inverse: singular matrix");
  }
  const double inv = 1.0 / dt;
  return {inv * d, -inv * b, -inv * c, inv * a};
}

bool is_unimodular(const Mat2& m, double tol) {
  if (!m.finite()) return false;
  // Roundoff in ad - bc scales with the squared norm; widen the tolerance
  // accordingly so ill-conditioned but honestly unimodular products pass.
  const double f2 = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
  const double slack = std::max(tol, 8.0 * 2.3e-16 * f2);
  return std::abs(std::abs(m.det()) - 1.0) <= slack;
}

Mat2 normalize_unimodular(const Mat2& m) {
  if (!m.finite()) {
    throw std::domain_error("normalize_unimodular: non-finite entries");
  }
  const double ad = std::abs(m.det());
  if (ad <= 0.0 || !std::isfinite(ad)) {
    throw std::domain_error("normalize_unimodular: singular matrix");
  }
  return (1.0 / std::sqrt(ad)) * m;
}

ProjPoint proj_act(const Mat2& m, ProjPoint p) {
  const double dt = m.det();
  if (dt == 0.0 || !std::isfinite(dt)) {
    throw std::domain_error("proj_act: matrix not invertible");
  }
  const Vec2 w = m * p.direction();
  return ProjPoint(std::atan2(w.y, w.x));
}

QrFactors qr2(const Mat2& m) {
  const double r = std::hypot(m.a, m.c);
  if (r == 0.0 || !std::isfinite(r)) {
    throw std::domain_error("qr2: first column is zero or non-finite");
  }
  const double co = m.a / r, si = m.c / r;
  double r01 = co * m.b + si * m.d;
  double r1 = -si * m.b + co * m.d;
  Mat2 q{co, -si, si, co};
  if (r1 < 0.0) {  // fold the sign into Q's second column
    r1 = -r1;
    q.b = -q.b;
    q.d = -q.d;
  }
  return {q, r, r1, r01};
}

MinExpansion min_expansion_direction(const Mat2& m) {
  const double dt = m.det();
  if (dt == 0.0 || !m.finite()) {
    throw std::domain_error("min_expansion_direction: matrix not invertible");
  }
  // Gram matrix A^T A; its eigenvalues are the squared singular values.
  const double g00 = m.a * m.a + m.c * m.c;
  const double g01 = m.a * m.b + m.c * m.d;
  const double g11 = m.b * m.b + m.d * m.d;
  const double mean = 0.5 * (g00 + g11);
  const double rad = std::hypot(0.5 * (g00 - g11), g01);

  MinExpansion out;
  out.s_max = std::sqrt(mean + rad);
  // s_min via the determinant identity; avoids cancellation in mean - rad.
  out.s_min = std::abs(dt) / out.s_max;
  if (rad <= 1e-14 * mean) {
    out.degenerate = true;
    out.theta0 = ProjPoint(0.0);
    out.s_min = out.s_max = std::sqrt(mean);
    return out;
  }
  // Eigenvector of the Gram matrix for the smaller eigenvalue.
  const double lo = out.s_min * out.s_min;
  const Vec2 v1{g01, lo - g00};
  const Vec2 v2{lo - g11, g01};
  const Vec2 v = (v1.norm() >= v2.norm()) ? v1 : v2;
  out.theta0 = ProjPoint(std::atan2(v.y, v.x));
  return out;
}

double operator_norm(const Mat2& m) {
  const double g00 = m.a * m.a + m.c * m.c;
  const double g01 = m.a * m.b + m.c * m.d;
  const double g11 = m.b * m.b + m.d * m.d;
  const double mean = 0.5 * (g00 + g11);
  const double rad = std::hypot(0.5 * (g00 - g11), g01);
  return std::sqrt(mean + rad);
}

ContractionCheck check_contraction_lemma(const Mat2& m, double eps,
                                         ProjPoint theta1, ProjPoint theta2) {
  if (!is_unimodular(m)) {
    throw std::domain_error(
        "check_contraction_lemma: matrix is not unimodular-normalized");
  }
  if (!(eps > 0.0)) {
    throw std::domain_error("check_contraction_lemma: eps must be positive");
  }
  const MinExpansion me = min_expansion_direction(m);
  const ProjPoint thetas[2] = {theta1, theta2};
  const char* names[2] = {"theta1", "theta2"};
  for (int i = 0; i < 2; ++i) {
    if (proj_dist(thetas[i], me.theta0) < eps) {
      std::ostringstream msg;
      msg << "check_contraction_lemma: " << names[i] << "=" << thetas[i].theta
          << " is within eps=" << eps << " of theta0=" << me.theta0.theta;
      throw std::domain_error(msg.str());
    }
  }
  ContractionCheck out;
  out.lhs = proj_dist(proj_act(m, theta1), proj_act(m, theta2));
  out.bound = 2.0 * kPi * kPi * kPi / (me.s_max * me.s_max * eps * eps);
  out.holds = out.lhs <= out.bound + kInequalitySlack;
  return out;
}

SymEigen sym_eigen(const Mat2& m) {
  const double off = 0.5 * (m.b + m.c);  // symmetrize defensively
  const double mean = 0.5 * (m.a + m.d);
  const double rad = std::hypot(0.5 * (m.a - m.d), off);
  SymEigen e;
  e.lo = mean - rad;
  e.hi = mean + rad;
  if (rad <= 1e-300) {
    e.rot = Mat2::identity();
    return e;
  }
  // Eigenvector for hi.
  Vec2 v{off, e.hi - m.a};
  const Vec2 alt{e.hi - m.d, off};
  if (alt.norm() > v.norm()) v = alt;
  const double n = v.norm();
  const double co = v.x / n, si = v.y / n;
  e.rot = {-si, co, co, si};  // columns: (lo-vec, hi-vec)
  return e;
}

static Mat2 sym_apply(const Mat2& m, double (*f)(double)) {
  const SymEigen e = sym_eigen(m);
  const Mat2 d = Mat2::diagonal(f(e.lo), f(e.hi));
  return e.rot * d * e.rot.transpose();
}

Mat2 sym_log(const Mat2& spd) {
  const SymEigen e = sym_eigen(spd);
  if (e.lo <= 0.0) {
    throw std::domain_error("sym_log: matrix is not positive-definite");
  }
  return sym_apply(spd, +[](double t) { return std::log(t); });
}

Mat2 sym_exp(const Mat2& sym) {
  return sym_apply(sym, +[](double t) { return std::exp(t); });
}

Mat2 sym_sqrt(const Mat2& spd) {
  const SymEigen e = sym_eigen(spd);
  if (e.lo <= 0.0) {
    throw std::domain_error("sym_sqrt: matrix is not positive-definite");
  }
  return sym_apply(spd, +[](double t) { return std::sqrt(t); });
}

Mat2 sym_sqrt_inv(const Mat2& spd) {
  const SymEigen e = sym_eigen(spd);
  if (e.lo <= 0.0) {
    throw std::domain_error("sym_sqrt_inv: matrix is not positive-definite");
  }
  return sym_apply(spd, +[](double t) { return 1.0 / std::sqrt(t); });
}

}  // namespace lyaplab
