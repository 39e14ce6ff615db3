// Weight machinery on top of scenes: the curves t -> <mu(exp(its).x), s>,
// their limits (maximal weights, finite or +infinity), the primitive of the
// moment-map one-form on the group with its cocycle identity, and the induced
// weight function on the boundary sphere.
#pragma once

#include "knstab/scenes.hpp"
#include "knstab/symspace.hpp"

#include <array>
#include <iosfwd>

namespace knstab {

// Real line extended by +infinity (maximal weights never hit -infinity).
struct ExtendedReal {
  bool finite = true;
  double value = 0.0;

  static ExtendedReal of(double v) { return {true, v}; }
  static ExtendedReal infinity() { return {false, 0.0}; }

  friend bool operator<(const ExtendedReal& a, const ExtendedReal& b) {
    if (!a.finite) return false;
    if (!b.finite) return true;
    return a.value < b.value;
  }
};

std::string to_string(const ExtendedReal& v);

// <mu(exp(its).x), s>; throws Overflow in a divergent Flat flow.
double lambda_t(const Scene& scene, const CVec& x, const SkewHermitian& s, double t,
                const Tolerances& tol = {});

// Closed-form limit of lambda_t as t -> +infinity.
ExtendedReal max_weight(const Scene& scene, const CVec& x, const SkewHermitian& s,
                        const Tolerances& tol = {});

// Numeric-limit fallback: Richardson ladder of lambda_t over the given times;
// +infinity when the values blow past the divergence cap while increasing.
// Throws Inconclusive when the samples fail to be monotone.
ExtendedReal max_weight_numeric(const Scene& scene, const CVec& x, const SkewHermitian& s,
                                const std::array<double, 3>& times = {10.0, 20.0, 40.0},
                                const Tolerances& tol = {});

struct WeightCurve {
  RVec times;
  RVec values;
  RVec slopes;  // central differences
};

WeightCurve weight_curve(const Scene& scene, const CVec& x, const SkewHermitian& s, double t0,
                         double t1, int samples, const Tolerances& tol = {});
// Columns: t, lambda_t, slope.
void write_curve_csv(std::ostream& os, const WeightCurve& curve);

struct IntegralValue {
  double value = 0.0;
  double error = 0.0;  // quadrature error estimate
};

// Primitive of the moment-map one-form, evaluated along the Cartan path
// 1 -> k -> k exp(i nu u) of g; vanishes on the unitary group and satisfies
// the cocycle identity psi_x(g) + psi_{g.x}(h) = psi_x(hg).
IntegralValue kn_integral(const Scene& scene, const CVec& x, const CMat& g,
                          const Tolerances& tol = {}, int max_panels = 4096);

// Integral along the ray of s up to time t (equals kn_integral at exp(its),
// but remains evaluable for times far beyond any conditioning cap).
IntegralValue kn_integral_ray(const Scene& scene, const CVec& x, const SkewHermitian& s,
                              double t, const Tolerances& tol = {}, int max_panels = 4096);

enum class BoundaryWeightMode { Analytic, Ray, Both };

// Weight of the boundary direction e_s at x.  Analytic mode is the closed
// form; ray mode extrapolates psi_x(exp(its))/t over t in {10,20,40}; Both
// cross-checks the two and throws Inconclusive when they disagree.
ExtendedReal boundary_weight(const Scene& scene, const CVec& x, const BoundaryPoint& e_s,
                             BoundaryWeightMode mode = BoundaryWeightMode::Both,
                             const Tolerances& tol = {});

// Checks the implication "both one-sided weights vanish => the point is fixed
// by the direction's flow".  Precondition: max_weight(x,s) and max_weight(x,-s)
// are both zero within the zero band.
bool weight_zero_implies_fixed(const Scene& scene, const CVec& x, const SkewHermitian& s,
                               const Tolerances& tol = {});

}  // namespace knstab
