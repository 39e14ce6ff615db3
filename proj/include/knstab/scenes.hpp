// Concrete Kähler manifolds with a Hamiltonian unitary action behind one
// interface: projective space with a unitary representation, a flat linear
// model, and tuples of points on the round sphere acted on by rotations and
// their Möbius extensions.  Each scene exposes the group action, the moment
// map and the infinitesimal vector fields of the action.
#pragma once

#include "knstab/matcore.hpp"
#include "knstab/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace knstab {

enum class SceneKind { Projective, Flat, SphereTuple };

std::string to_string(SceneKind kind);

// Immutable after construction; all operations below are pure.
//
// State encoding: Projective/Flat states are vectors z in C^N (projective
// representatives kept at unit norm); SphereTuple states are m stacked unit
// spinors in C^2, each representing a point of S^2 through
// z z* = (1/2)(I + x . sigma).
struct Scene {
  SceneKind kind = SceneKind::Projective;
  std::string name = "scene";
  Eigen::Index n = 0;        // the compact group sits inside U(n)
  Eigen::Index rep_dim = 0;  // N (2 for SphereTuple: the spinor block size)
  int tuple_len = 1;         // m; 1 unless SphereTuple
  std::vector<CMat> k_basis;  // orthonormal basis of the symmetry algebra in u(n)
  std::vector<CMat> rep;      // images of k_basis in u(rep_dim)
  bool torus = false;
  std::vector<std::vector<long long>> torus_weights;  // N rows x d columns
  double growth_c = 0.0;  // declared constant for the growth bounds
  CVec base;              // base point of the growth bounds
  std::map<std::string, CVec> points;  // named states

  int kdim() const { return static_cast<int>(k_basis.size()); }
  Eigen::Index state_dim() const;
};

// Ready-made scenes.
Scene make_sphere_scene(int tuple_len);
// Diagonal torus in U(d) acting with the given integer weight rows on C^N.
Scene make_torus_scene(const std::vector<std::vector<long long>>& weights, SceneKind kind);
// U(2) (or SU(2)) acting on the symmetric square of its defining space.
Scene make_sym2_scene(bool with_center);
// U(2) acting on C^2 as a flat model.
Scene make_flat_defining_scene();

// Orthonormality, skewness, bracket closure, homomorphism residual, state
// normalization of all named points.  Throws ValidationError naming the
// offending field.
void validate_scene(const Scene& scene, const Tolerances& tol = {});

// --------------------------------------------------------------------------
// Coordinates on the symmetry algebra.

SkewHermitian coords_to_k(const Scene& scene, const RVec& c);
// Frobenius coordinates of s against k_basis; *residual (if given) receives
// the norm of the component outside the span.
RVec k_to_coords(const Scene& scene, const SkewHermitian& s, double* residual = nullptr);
// Image of s under the representation; throws GroupNotInScene when s has a
// component outside the symmetry algebra.
CMat rep_of(const Scene& scene, const SkewHermitian& s, const Tolerances& tol = {});

// --------------------------------------------------------------------------
// Sphere chart helpers.

Eigen::Vector3d spinor_to_unit3(const Eigen::Vector2cd& z);
Eigen::Vector2cd unit3_to_spinor(const Eigen::Vector3d& x);
// i-th point of a SphereTuple state as a unit 3-vector.
Eigen::Vector3d sphere_point(const Scene& scene, const CVec& x, int i);
CVec sphere_state(const std::vector<Eigen::Vector3d>& pts);
double sphere_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b);
// Rotation covered by a unit-determinant unitary 2x2 matrix.
Eigen::Matrix3d so3_of_su2(const CMat& k);

// --------------------------------------------------------------------------
// States and the group action.

CVec normalize_state(const Scene& scene, const CVec& x);
void validate_state(const Scene& scene, const CVec& x, const Tolerances& tol = {});

// Action of an invertible group element along its Cartan path
// k exp(i u) -> rho(k) exp(i drho(u)).  SphereTuple acts through Möbius maps
// on the spinors, so no conditioning limit applies there.
CVec act(const Scene& scene, const CMat& g, const CVec& x, const Tolerances& tol = {});
// Action of exp(i t s) for s in the symmetry algebra, evaluated spectrally;
// stable for large t (Flat scenes throw Overflow in the divergent regime).
CVec act_flow(const Scene& scene, const SkewHermitian& s, double t, const CVec& x,
              const Tolerances& tol = {});
// Action of exp(w) for w in the symmetry algebra (a compact-group element).
CVec act_k(const Scene& scene, const SkewHermitian& w, const CVec& x,
           const Tolerances& tol = {});

// --------------------------------------------------------------------------
// Moment map and infinitesimal action.

// Coordinates of the moment map against k_basis.
RVec moment_coords(const Scene& scene, const CVec& x);
// Moment map as an element of the symmetry algebra via the Frobenius pairing.
SkewHermitian moment(const Scene& scene, const CVec& x);
double mu_pair(const Scene& scene, const CVec& x, const SkewHermitian& s,
               const Tolerances& tol = {});
double mu_norm(const Scene& scene, const CVec& x);

struct TangentData {
  // Chart components: stacked tangent 3-vectors (real entries) for
  // SphereTuple, an ambient C^N vector for Projective (orthogonal to the
  // representative) and Flat.
  CVec vec;
  double norm = 0.0;  // Riemannian norm in the scene metric
};

TangentData inf_action(const Scene& scene, const SkewHermitian& s, const CVec& x,
                       const Tolerances& tol = {});

double scene_distance(const Scene& scene, const CVec& x, const CVec& y);

// --------------------------------------------------------------------------
// Sampling aides.

// Directions worth probing when minimizing weights: spectral axes of the
// configuration (SphereTuple) and kernel directions of the infinitesimal
// action.
std::vector<SkewHermitian> special_directions(const Scene& scene, const CVec& x,
                                              const Tolerances& tol = {});
// Dimension of the isotropy algebra {s : xi_s(x) = 0} at eps.
int stabilizer_dim(const Scene& scene, const CVec& x, double eps = 1e-6,
                   const Tolerances& tol = {});

CVec random_state(const Scene& scene, Rng& rng);
SkewHermitian random_k_direction(const Scene& scene, Rng& rng);

// --------------------------------------------------------------------------
// Growth-bound verification: |xi_s(x)| <= C |s| (1 + d(x,base)) and
// |mu(x)| <= C (1 + d(x,base)^2) over random samples, with the declared C.

struct GrowthReport {
  int samples = 0;
  double worst_action_ratio = 0.0;  // max of |xi_s| / (C |s| (1 + d))
  double worst_moment_ratio = 0.0;  // max of |mu| / (C (1 + d^2))
};

// Throws BoundViolated with the witness sample on the first violated bound.
GrowthReport check_growth_bounds(const Scene& scene, int samples, Rng& rng,
                                 const Tolerances& tol = {});

}  // namespace knstab
