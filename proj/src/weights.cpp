#include "knstab/weights.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <sstream>

namespace knstab {

std::string to_string(const ExtendedReal& v) {
  if (!v.finite) return "+inf";
  std::ostringstream os;
  os.precision(12);
  os << std::scientific << v.value;
  return os.str();
}

double lambda_t(const Scene& scene, const CVec& x, const SkewHermitian& s, double t,
                const Tolerances& tol) {
  return mu_pair(scene, act_flow(scene, s, t, x, tol), s, tol);
}

ExtendedReal max_weight(const Scene& scene, const CVec& x, const SkewHermitian& s,
                        const Tolerances& tol) {
  if (s.norm() < 1e-14) fail(Err::PreconditionUnmet, "max_weight: zero direction");
  if (scene.kind == SceneKind::SphereTuple) {
    double res = 0.0;
    RVec c = k_to_coords(scene, s, &res);
    if (res > tol.rep_hom * (1.0 + s.norm()))
      fail(Err::GroupNotInScene, "direction lies outside the scene's symmetry algebra");
    Eigen::Vector3d axis(c[0], c[1], c[2]);
    Eigen::Vector3d special = -axis.normalized();  // the one point the flow repels
    int at = 0;
    for (int i = 0; i < scene.tuple_len; ++i)
      if (sphere_angle(sphere_point(scene, x, i), special) <= tol.angle) ++at;
    double frac = static_cast<double>(scene.tuple_len - 2 * at) / scene.tuple_len;
    return ExtendedReal::of(s.norm() * frac);
  }
  // Spectral formula: the limit picks out the largest eigenvalue of i drho(s)
  // whose eigenspace carries a component of the state.
  SpectralData sd = herm_eig(Complex(0, 1) * rep_of(scene, s, tol), -1.0, tol);
  const double nn = x.norm();
  double top = 0.0;
  bool found = false;
  for (int j = sd.clusters() - 1; j >= 0 && !found; --j) {
    CMat basis = sd.cluster_basis(j);
    if ((basis.adjoint() * x).norm() > tol.supp * nn) {
      top = sd.values[j];
      found = true;
    }
  }
  if (!found) {
    // The origin of a Flat scene is fixed by every flow; its weight vanishes.
    if (scene.kind == SceneKind::Flat && nn == 0.0) return ExtendedReal::of(0.0);
    fail(Err::PreconditionUnmet, "max_weight: state has no spectral support");
  }
  if (scene.kind == SceneKind::Flat) {
    double ctol = default_cluster_tol(sd.raw_values, tol);
    if (top > ctol) return ExtendedReal::infinity();
    return ExtendedReal::of(0.0);
  }
  return ExtendedReal::of(top);
}

ExtendedReal max_weight_numeric(const Scene& scene, const CVec& x, const SkewHermitian& s,
                                const std::array<double, 3>& times, const Tolerances& tol) {
  std::vector<double> nodes, vals;
  for (double t : times) {
    try {
      vals.push_back(lambda_t(scene, x, s, t, tol));
    } catch (const Error& e) {
      if (e.code() == Err::Overflow) return ExtendedReal::infinity();
      throw;
    }
    nodes.push_back(1.0 / t);
  }
  double scale = 1.0;
  for (double v : vals) scale = std::max(scale, std::abs(v));
  for (size_t i = 0; i + 1 < vals.size(); ++i)
    if (vals[i] > vals[i + 1] + tol.mono * scale)
      fail(Err::Inconclusive, "max_weight_numeric: weight samples are not monotone");
  if (vals.back() > 1e6 && vals.back() >= vals.front()) return ExtendedReal::infinity();
  return ExtendedReal::of(extrapolate_to_zero(nodes, vals));
}

WeightCurve weight_curve(const Scene& scene, const CVec& x, const SkewHermitian& s, double t0,
                         double t1, int samples, const Tolerances& tol) {
  if (samples < 2 || !(t1 > t0)) fail(Err::PreconditionUnmet, "weight_curve: bad grid");
  WeightCurve c;
  c.times.resize(samples);
  c.values.resize(samples);
  c.slopes.resize(samples);
  double h = (t1 - t0) / (samples - 1);
  for (int i = 0; i < samples; ++i) {
    c.times[i] = t0 + h * i;
    c.values[i] = lambda_t(scene, x, s, c.times[i], tol);
  }
  for (int i = 0; i < samples; ++i) {
    int lo = std::max(0, i - 1), hi = std::min(samples - 1, i + 1);
    c.slopes[i] = (c.values[hi] - c.values[lo]) / (c.times[hi] - c.times[lo]);
  }
  return c;
}

void write_curve_csv(std::ostream& os, const WeightCurve& curve) {
  os << "t,lambda_t,slope\n";
  char buf[128];
  for (Eigen::Index i = 0; i < curve.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e\n", curve.times[i], curve.values[i],
                  curve.slopes[i]);
    os << buf;
  }
}

// --------------------------------------------------------------------------
// Adaptive composite 16-point Gauss-Legendre quadrature.

namespace {

constexpr int kGL = 8;
constexpr double kGLNode[kGL] = {
    0.0950125098376374401853193, 0.2816035507792589132304605, 0.4580167776572273863424194,
    0.6178762444026437484466718, 0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
constexpr double kGLWeight[kGL] = {
    0.1894506104550684962853967, 0.1826034150449235888667637, 0.1691565193950025381893121,
    0.1495959888165767320815017, 0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

template <typename F>
double gl16(const F& f, double a, double b) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < kGL; ++i)
    sum += kGLWeight[i] * (f(mid - half * kGLNode[i]) + f(mid + half * kGLNode[i]));
  return half * sum;
}

struct Panel {
  double a, b, value;
};

// Bisection-refined quadrature of f over [a,b]; *err_out receives the summed
// panel error estimates.  Throws QuadratureFailure past max_panels.
template <typename F>
double adaptive_quad(const F& f, double a, double b, double tol_rel, int max_panels,
                     double* err_out) {
  std::deque<Panel> work{{a, b, gl16(f, a, b)}};
  double value = 0.0, err = 0.0;
  int spent = 1;
  double scale = std::max(1.0, std::abs(work.front().value));
  while (!work.empty()) {
    Panel p = work.front();
    work.pop_front();
    double mid = 0.5 * (p.a + p.b);
    double left = gl16(f, p.a, mid), right = gl16(f, mid, p.b);
    spent += 2;
    if (spent > max_panels)
      fail(Err::QuadratureFailure, "quadrature budget exhausted before reaching tolerance");
    double halves = left + right;
    double panel_err = std::abs(halves - p.value);
    double frac = (p.b - p.a) / (b - a);
    if (panel_err <= tol_rel * scale * std::max(frac, 1e-3)) {
      value += halves;
      err += panel_err;
      scale = std::max(scale, std::abs(value));
    } else {
      work.push_back({p.a, mid, left});
      work.push_back({mid, p.b, right});
    }
  }
  if (err_out) *err_out = err;
  return value;
}

}  // namespace

IntegralValue kn_integral(const Scene& scene, const CVec& x, const CMat& g, const Tolerances& tol,
                          int max_panels) {
  CartanPair cp = polar_cartan(g, tol);
  IntegralValue out;
  if (cp.u.norm() < 1e-15) return out;  // unitary: the whole path lies in K
  // Along nu -> k exp(i nu u) the one-form pairs mu with the constant
  // direction Ad(k) u.
  SkewHermitian dir = SkewHermitian::project(cp.k * cp.u.mat() * cp.k.adjoint());
  SkewHermitian wk = SkewHermitian::project(unitary_log(cp.k, tol));
  auto integrand = [&](double nu) {
    CVec y = act_k(scene, wk, act_flow(scene, cp.u, nu, x, tol), tol);
    return mu_pair(scene, y, dir, tol);
  };
  out.value = adaptive_quad(integrand, 0.0, 1.0, tol.quad_rel, max_panels, &out.error);
  return out;
}

IntegralValue kn_integral_ray(const Scene& scene, const CVec& x, const SkewHermitian& s, double t,
                              const Tolerances& tol, int max_panels) {
  IntegralValue out;
  if (t == 0.0 || s.norm() < 1e-15) return out;
  auto integrand = [&](double tau) { return lambda_t(scene, x, s, tau, tol); };
  out.value = adaptive_quad(integrand, 0.0, t, tol.quad_rel, max_panels, &out.error);
  return out;
}

ExtendedReal boundary_weight(const Scene& scene, const CVec& x, const BoundaryPoint& e_s,
                             BoundaryWeightMode mode, const Tolerances& tol) {
  SkewHermitian s = e_s.dir();
  if (mode == BoundaryWeightMode::Analytic) return max_weight(scene, x, s, tol);

  const std::array<double, 3> ladder = {10.0, 20.0, 40.0};
  std::vector<double> nodes, vals;
  bool overflowed = false;
  for (double t : ladder) {
    try {
      // phi(t) = psi_x(exp(its)) / d([exp(its)], [1]); the direction is unit,
      // so the distance is t.
      vals.push_back(kn_integral_ray(scene, x, s, t, tol).value / t);
    } catch (const Error& e) {
      if (e.code() == Err::Overflow) {
        overflowed = true;
        break;
      }
      throw;
    }
    nodes.push_back(1.0 / t);
  }
  ExtendedReal ray;
  if (overflowed) {
    ray = ExtendedReal::infinity();
  } else {
    double scale = 1.0;
    for (double v : vals) scale = std::max(scale, std::abs(v));
    for (size_t i = 0; i + 1 < vals.size(); ++i)
      if (vals[i] > vals[i + 1] + 1e3 * tol.mono * scale)
        fail(Err::Inconclusive, "boundary_weight: ray sequence is not monotone");
    if (vals.back() > 1e6 && vals.back() >= vals.front()) {
      ray = ExtendedReal::infinity();
    } else {
      ray = ExtendedReal::of(extrapolate_to_zero(nodes, vals));
    }
  }
  if (mode == BoundaryWeightMode::Ray) return ray;

  ExtendedReal analytic = max_weight(scene, x, s, tol);
  if (analytic.finite != ray.finite)
    fail(Err::Inconclusive, "boundary_weight: analytic and ray modes disagree on finiteness");
  if (analytic.finite &&
      std::abs(analytic.value - ray.value) > tol.bw_agree * (1.0 + std::abs(analytic.value)))
    fail(Err::Inconclusive, "boundary_weight: analytic and ray modes disagree");
  return analytic;
}

bool weight_zero_implies_fixed(const Scene& scene, const CVec& x, const SkewHermitian& s,
                               const Tolerances& tol) {
  ExtendedReal plus = max_weight(scene, x, s, tol);
  ExtendedReal minus = max_weight(scene, x, SkewHermitian::project(-s.mat()), tol);
  auto is_zero = [&](const ExtendedReal& v) { return v.finite && std::abs(v.value) <= tol.zero_band; };
  if (!is_zero(plus) || !is_zero(minus))
    fail(Err::PreconditionUnmet, "weight_zero_implies_fixed: both one-sided weights must vanish");
  return inf_action(scene, s, x, tol).norm <= tol.fixed_point;
}

}  // namespace knstab
