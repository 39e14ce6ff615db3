// Geometry of the symmetric space U(n)\GL(n,C): invariant distance, the
// boundary sphere of directions with its right GL(n,C)-action, parabolic
// stabilizers, opposedness of directions and geodesics joining them.
#pragma once

#include "knstab/matcore.hpp"
#include "knstab/rational.hpp"

#include <array>
#include <optional>

namespace knstab {

// Direction at infinity: unit-norm element of u(n) labelling the geodesic ray
// t -> [exp(i t s)].
class BoundaryPoint {
 public:
  BoundaryPoint() = default;
  explicit BoundaryPoint(const SkewHermitian& s, const Tolerances& tol = {});
  const SkewHermitian& dir() const { return s_; }
  const CMat& mat() const { return s_.mat(); }
  Eigen::Index dim() const { return s_.dim(); }

 private:
  SkewHermitian s_;  // normalized to unit Frobenius norm
};

// Bi-invariant distance between the classes [g] and [h];
// d([1],[exp(i t s)]) = t |s| for t >= 0.
double distance(const CMat& g, const CMat& h, const Tolerances& tol = {});

// Right action of g on the boundary, computed from the eigenspace filtration
// of the direction pulled back through g.  Preserves the spectrum of i s.
BoundaryPoint boundary_action(const BoundaryPoint& s, const CMat& g, const Tolerances& tol = {});

// Finite-time Cartan logarithm log(exp(i tau s) g)/tau.  Converges to the
// boundary action as tau grows; evaluated through a scaled factorization so
// large tau stays numerically meaningful.
SkewHermitian boundary_action_limit(const BoundaryPoint& s, const CMat& g, double tau,
                                    const Tolerances& tol = {});

// Richardson ladder over the given tau values (polynomial in 1/tau).
SkewHermitian boundary_action_extrapolated(const BoundaryPoint& s, const CMat& g,
                                           const std::array<double, 3>& taus = {25.0, 50.0, 100.0},
                                           const Tolerances& tol = {});

// Membership in the parabolic stabilizer of the ray of s: block upper
// triangular in the ascending eigenbasis of i s.
bool parabolic_contains(const SkewHermitian& s, const CMat& g, double rel_tol = -1.0,
                        const Tolerances& tol = {});

// ad(u) acting on n x n matrices, materialized over the standard basis
// (column-major vec), an n^2 x n^2 skew-Hermitian matrix.
CMat ad_matrix(const CMat& u);

struct OpposednessCertificate {
  RVec spectrum;                 // shared ascending spectrum of the compared pair
  std::vector<Subspace> pieces;  // transversal intersections, one per cluster
  double min_singular = 0.0;     // smallest singular value of the stacked bases
};

struct OpposednessResult {
  bool opposed = false;
  std::string reason;
  std::optional<OpposednessCertificate> cert;
};

// Opposedness of u and v.  With use_adjoint the pair is compared through
// ad(u), ad(v) (the criterion for directions in u(n)); without it the
// filtration test runs in the defining representation.
OpposednessResult opposed(const SkewHermitian& u, const SkewHermitian& v, bool use_adjoint = true,
                          const Tolerances& tol = {});

bool geodesically_connected(const BoundaryPoint& u, const BoundaryPoint& v,
                            const Tolerances& tol = {});

// Group element h with h in the parabolic of u and v . h = -u; the geodesic
// t -> [exp(i t u) h^{-1}] then joins v (t -> -inf) to u (t -> +inf).
// Postconditions are verified; throws ConnectFailure when they cannot be met.
CMat connect_geodesic(const BoundaryPoint& u, const BoundaryPoint& v, const Tolerances& tol = {});

// Dimension of the closure torus of the ray of s, computed from a declared
// exact rational spectrum of i s (matched to the numeric one within the
// cluster tolerance).
int torus_dim(const SkewHermitian& s, const std::vector<Rational>& declared_spectrum,
              const Tolerances& tol = {});

}  // namespace knstab
