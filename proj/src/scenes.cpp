#include "knstab/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace knstab {

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::Projective: return "Projective";
    case SceneKind::Flat: return "Flat";
    case SceneKind::SphereTuple: return "SphereTuple";
  }
  return "?";
}

Eigen::Index Scene::state_dim() const {
  return kind == SceneKind::SphereTuple ? 2 * static_cast<Eigen::Index>(tuple_len) : rep_dim;
}

namespace {

const Complex kI(0.0, 1.0);

CMat pauli(int k) {
  CMat s(2, 2);
  switch (k) {
    case 1: s << 0, 1, 1, 0; break;
    case 2: s << 0, Complex(0, -1), Complex(0, 1), 0; break;
    default: s << 1, 0, 0, -1; break;
  }
  return s;
}

// Derived action of a 2x2 generator on the symmetric square of C^2, in the
// orthonormal basis {e1e1, (e1e2+e2e1)/sqrt2, e2e2}.
CMat sym_square(const CMat& a) {
  CMat big = CMat::Zero(4, 4);  // a (x) I + I (x) a on C^2 (x) C^2, index 2i+j
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        big(2 * i + j, 2 * k + j) += a(i, k);
        big(2 * i + j, 2 * i + k) += a(j, k);
      }
  CMat f = CMat::Zero(4, 3);
  f(0, 0) = 1.0;
  f(1, 1) = f(2, 1) = 1.0 / std::sqrt(2.0);
  f(3, 2) = 1.0;
  return f.adjoint() * big * f;
}

double spectral_norm(const CMat& a) {
  Eigen::JacobiSVD<CMat> svd(a);
  return svd.singularValues()[0];
}

double rep_norm_bound(const std::vector<CMat>& rep) {
  double s = 0.0;
  for (const CMat& r : rep) s += spectral_norm(r) * spectral_norm(r);
  return std::sqrt(s);
}

std::vector<CMat> su2_basis() {
  std::vector<CMat> b;
  for (int k = 1; k <= 3; ++k) b.push_back(-kI / std::sqrt(2.0) * pauli(k));
  return b;
}

}  // namespace

Scene make_sphere_scene(int tuple_len) {
  if (tuple_len < 1) fail(Err::ValidationError, "sphere scene needs at least one point");
  Scene sc;
  sc.kind = SceneKind::SphereTuple;
  sc.name = "sphere" + std::to_string(tuple_len);
  sc.n = 2;
  sc.rep_dim = 2;
  sc.tuple_len = tuple_len;
  sc.k_basis = su2_basis();
  sc.rep = sc.k_basis;
  sc.growth_c = 2.0;
  std::vector<Eigen::Vector3d> north(tuple_len, Eigen::Vector3d(0, 0, 1));
  sc.base = sphere_state(north);
  return sc;
}

Scene make_torus_scene(const std::vector<std::vector<long long>>& weights, SceneKind kind) {
  if (kind == SceneKind::SphereTuple) fail(Err::ValidationError, "torus scene must be Projective or Flat");
  if (weights.empty() || weights[0].empty()) fail(Err::ValidationError, "torus scene needs weights");
  const int nw = static_cast<int>(weights.size());
  const int d = static_cast<int>(weights[0].size());
  for (const auto& row : weights)
    if (static_cast<int>(row.size()) != d) fail(Err::ValidationError, "ragged weight rows");
  Scene sc;
  sc.kind = kind;
  sc.name = "torus";
  sc.n = d;
  sc.rep_dim = nw;
  sc.torus = true;
  sc.torus_weights = weights;
  for (int j = 0; j < d; ++j) {
    CMat b = CMat::Zero(d, d);
    b(j, j) = kI;
    sc.k_basis.push_back(b);
    CMat r = CMat::Zero(nw, nw);
    for (int row = 0; row < nw; ++row) r(row, row) = -kI * static_cast<double>(weights[row][j]);
    sc.rep.push_back(r);
  }
  double cs = rep_norm_bound(sc.rep);
  sc.growth_c = 1.0 + (kind == SceneKind::Projective ? std::sqrt(2.0) * cs : cs);
  if (kind == SceneKind::Projective) {
    sc.base = CVec::Constant(nw, Complex(1.0 / std::sqrt(static_cast<double>(nw)), 0.0));
  } else {
    sc.base = CVec::Zero(nw);
  }
  return sc;
}

Scene make_sym2_scene(bool with_center) {
  Scene sc;
  sc.kind = SceneKind::Projective;
  sc.name = with_center ? "sym2" : "su2sym2";
  sc.n = 2;
  sc.rep_dim = 3;
  if (with_center) sc.k_basis.push_back(kI / std::sqrt(2.0) * CMat::Identity(2, 2));
  for (const CMat& b : su2_basis()) sc.k_basis.push_back(b);
  for (const CMat& b : sc.k_basis) sc.rep.push_back(sym_square(b));
  sc.growth_c = 1.0 + std::sqrt(2.0) * rep_norm_bound(sc.rep);
  sc.base = CVec::Zero(3);
  sc.base[0] = 1.0;
  return sc;
}

Scene make_flat_defining_scene() {
  Scene sc;
  sc.kind = SceneKind::Flat;
  sc.name = "flat2";
  sc.n = 2;
  sc.rep_dim = 2;
  sc.k_basis.push_back(kI / std::sqrt(2.0) * CMat::Identity(2, 2));
  for (const CMat& b : su2_basis()) sc.k_basis.push_back(b);
  sc.rep = sc.k_basis;
  sc.growth_c = 1.0 + rep_norm_bound(sc.rep);
  sc.base = CVec::Zero(2);
  return sc;
}

// --------------------------------------------------------------------------

void validate_scene(const Scene& scene, const Tolerances& tol) {
  auto bad = [](const std::string& msg) { fail(Err::ValidationError, msg); };
  if (scene.n < 1 || scene.rep_dim < 1) bad("scene dimensions must be positive");
  if (scene.kind == SceneKind::SphereTuple) {
    if (scene.tuple_len < 1) bad("tuple length must be positive");
    if (scene.n != 2 || scene.rep_dim != 2 || scene.kdim() != 3)
      bad("SphereTuple scene must carry su(2) inside U(2)");
  } else if (scene.tuple_len != 1) {
    bad("tuple length is only meaningful for SphereTuple scenes");
  }
  if (scene.k_basis.empty()) bad("scene has no generators");
  if (scene.rep.size() != scene.k_basis.size()) bad("generator/representation count mismatch");

  for (int i = 0; i < scene.kdim(); ++i) {
    std::string tag = "generator " + std::to_string(i);
    if (scene.k_basis[i].rows() != scene.n || scene.k_basis[i].cols() != scene.n)
      bad(tag + " has wrong shape");
    if (!is_skew_hermitian(scene.k_basis[i], tol.sym)) bad(tag + " is not skew-Hermitian");
    if (scene.rep[i].rows() != scene.rep_dim || scene.rep[i].cols() != scene.rep_dim)
      bad("image of " + tag + " has wrong shape");
    if (!is_skew_hermitian(scene.rep[i], tol.sym)) bad("image of " + tag + " is not skew-Hermitian");
    for (int j = 0; j <= i; ++j) {
      double want = (i == j) ? 1.0 : 0.0;
      if (std::abs(kpair(scene.k_basis[i], scene.k_basis[j]) - want) > 1e-8)
        bad("generators are not orthonormal (pair " + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }

  // Bracket closure and the homomorphism property.
  for (int i = 0; i < scene.kdim(); ++i)
    for (int j = i + 1; j < scene.kdim(); ++j) {
      CMat br = scene.k_basis[i] * scene.k_basis[j] - scene.k_basis[j] * scene.k_basis[i];
      CMat res = br;
      CMat rep_br = CMat::Zero(scene.rep_dim, scene.rep_dim);
      for (int a = 0; a < scene.kdim(); ++a) {
        double c = kpair(br, scene.k_basis[a]);
        res -= c * scene.k_basis[a];
        rep_br += c * scene.rep[a];
      }
      std::string pair = std::to_string(i) + "," + std::to_string(j);
      if (res.norm() > tol.rep_hom * (1.0 + br.norm()))
        bad("generators do not close under the bracket (pair " + pair + ")");
      CMat br_rep = scene.rep[i] * scene.rep[j] - scene.rep[j] * scene.rep[i];
      if ((rep_br - br_rep).norm() > tol.rep_hom * (1.0 + br_rep.norm()))
        bad("representation is not a homomorphism (pair " + pair + ")");
    }

  if (scene.torus) {
    if (scene.kind == SceneKind::SphereTuple) bad("SphereTuple scene cannot be a torus scene");
    if (static_cast<Eigen::Index>(scene.torus_weights.size()) != scene.rep_dim)
      bad("weight rows must match the representation dimension");
    for (const auto& row : scene.torus_weights)
      if (static_cast<int>(row.size()) != scene.kdim()) bad("weight columns must match the generators");
    for (int j = 0; j < scene.kdim(); ++j) {
      CMat want = CMat::Zero(scene.rep_dim, scene.rep_dim);
      for (Eigen::Index r = 0; r < scene.rep_dim; ++r)
        want(r, r) = -kI * static_cast<double>(scene.torus_weights[r][j]);
      if ((scene.rep[j] - want).norm() > 1e-9)
        bad("representation disagrees with the declared weights (generator " + std::to_string(j) + ")");
    }
  }

  if (scene.growth_c < 0.0) bad("growth constant must be nonnegative");
  if (!(scene.base.size() == scene.state_dim())) bad("base point has wrong dimension");
  validate_state(scene, scene.base, tol);
  for (const auto& [name, x] : scene.points) {
    try {
      validate_state(scene, x, tol);
    } catch (const Error& e) {
      bad("point '" + name + "': " + e.what());
    }
  }
}

void validate_state(const Scene& scene, const CVec& x, const Tolerances&) {
  if (!x.allFinite()) fail(Err::ValidationError, "state has non-finite entries");
  if (x.size() != scene.state_dim()) fail(Err::ValidationError, "state has wrong dimension");
  if (scene.kind == SceneKind::SphereTuple) {
    for (int i = 0; i < scene.tuple_len; ++i)
      if (std::abs(x.segment<2>(2 * i).norm() - 1.0) > 1e-8)
        fail(Err::ValidationError, "sphere point " + std::to_string(i) + " is not unit");
  } else if (scene.kind == SceneKind::Projective) {
    if (std::abs(x.norm() - 1.0) > 1e-8)
      fail(Err::ValidationError, "projective representative is not unit");
  }
}

CVec normalize_state(const Scene& scene, const CVec& x) {
  CVec y = x;
  if (scene.kind == SceneKind::SphereTuple) {
    for (int i = 0; i < scene.tuple_len; ++i) {
      double nn = y.segment<2>(2 * i).norm();
      if (nn < 1e-150) fail(Err::Singular, "sphere spinor collapsed");
      y.segment<2>(2 * i) /= nn;
    }
  } else if (scene.kind == SceneKind::Projective) {
    double nn = y.norm();
    if (nn < 1e-150) fail(Err::Singular, "projective representative collapsed");
    y /= nn;
  }
  return y;
}

// --------------------------------------------------------------------------

SkewHermitian coords_to_k(const Scene& scene, const RVec& c) {
  if (c.size() != scene.kdim()) fail(Err::PreconditionUnmet, "coordinate vector has wrong length");
  CMat s = CMat::Zero(scene.n, scene.n);
  for (int i = 0; i < scene.kdim(); ++i) s += c[i] * scene.k_basis[i];
  return SkewHermitian::project(s);
}

RVec k_to_coords(const Scene& scene, const SkewHermitian& s, double* residual) {
  if (s.dim() != scene.n) fail(Err::PreconditionUnmet, "direction has wrong dimension");
  RVec c(scene.kdim());
  CMat rest = s.mat();
  for (int i = 0; i < scene.kdim(); ++i) {
    c[i] = kpair(s.mat(), scene.k_basis[i]);
    rest -= c[i] * scene.k_basis[i];
  }
  if (residual) *residual = rest.norm();
  return c;
}

CMat rep_of(const Scene& scene, const SkewHermitian& s, const Tolerances& tol) {
  double res = 0.0;
  RVec c = k_to_coords(scene, s, &res);
  if (res > tol.rep_hom * (1.0 + s.norm()))
    fail(Err::GroupNotInScene, "direction lies outside the scene's symmetry algebra");
  CMat r = CMat::Zero(scene.rep_dim, scene.rep_dim);
  for (int i = 0; i < scene.kdim(); ++i) r += c[i] * scene.rep[i];
  return r;
}

// --------------------------------------------------------------------------
// Sphere chart: z z* = (1/2)(I + x . sigma) for unit spinors z = (zeta, omega).

Eigen::Vector3d spinor_to_unit3(const Eigen::Vector2cd& z) {
  Complex zw = z[0] * std::conj(z[1]);
  return Eigen::Vector3d(2.0 * zw.real(), -2.0 * zw.imag(), std::norm(z[0]) - std::norm(z[1]));
}

Eigen::Vector2cd unit3_to_spinor(const Eigen::Vector3d& x) {
  double theta = std::atan2(std::hypot(x[0], x[1]), x[2]);
  double phi = std::atan2(x[1], x[0]);
  Eigen::Vector2cd z;
  z[0] = std::cos(theta / 2.0);
  z[1] = std::polar(std::sin(theta / 2.0), phi);
  return z;
}

Eigen::Vector3d sphere_point(const Scene& scene, const CVec& x, int i) {
  if (scene.kind != SceneKind::SphereTuple) fail(Err::PreconditionUnmet, "not a sphere scene");
  if (i < 0 || i >= scene.tuple_len) fail(Err::PreconditionUnmet, "point index out of range");
  return spinor_to_unit3(x.segment<2>(2 * i));
}

CVec sphere_state(const std::vector<Eigen::Vector3d>& pts) {
  CVec x(2 * static_cast<Eigen::Index>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) {
    Eigen::Vector3d p = pts[i];
    double nn = p.norm();
    if (nn < 1e-12) fail(Err::ValidationError, "sphere point is not a direction");
    x.segment<2>(2 * static_cast<Eigen::Index>(i)) = unit3_to_spinor(p / nn);
  }
  return x;
}

double sphere_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Eigen::Matrix3d so3_of_su2(const CMat& k) {
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = 0.5 * (pauli(i + 1) * k * pauli(j + 1) * k.adjoint()).trace().real();
  return r;
}

// --------------------------------------------------------------------------

namespace {

CVec apply_linear(const Scene& scene, const CMat& m, const CVec& x) {
  if (scene.kind == SceneKind::SphereTuple) {
    CVec y(x.size());
    for (int i = 0; i < scene.tuple_len; ++i) y.segment<2>(2 * i) = m * x.segment<2>(2 * i);
    return normalize_state(scene, y);
  }
  CVec y = m * x;
  if (!y.allFinite()) fail(Err::Overflow, "action left the representable range");
  if (scene.kind == SceneKind::Projective) return normalize_state(scene, y);
  return y;
}

}  // namespace

CVec act(const Scene& scene, const CMat& g, const CVec& x, const Tolerances& tol) {
  if (g.rows() != scene.n || g.cols() != scene.n)
    fail(Err::PreconditionUnmet, "group element has wrong dimension");
  if (!g.allFinite()) fail(Err::PreconditionUnmet, "group element has non-finite entries");
  if (scene.kind == SceneKind::SphereTuple) {
    // Möbius action on the spinors; any invertible matrix acts.
    if (std::abs(g.determinant()) < 1e-150) fail(Err::Singular, "group element is singular");
    return apply_linear(scene, g, x);
  }
  CartanPair cp = polar_cartan(g, tol);
  SkewHermitian wk = SkewHermitian::project(unitary_log(cp.k, tol));
  CMat du, dw;
  try {
    du = rep_of(scene, cp.u, tol);
    dw = rep_of(scene, wk, tol);
  } catch (const Error& e) {
    if (e.code() == Err::GroupNotInScene)
      fail(Err::GroupNotInScene, "group element's Cartan factors leave the scene's group");
    throw;
  }
  CVec y = apply_linear(scene, mat_exp(kI * du), x);
  return apply_linear(scene, mat_exp(dw), y);
}

namespace {

// Zero out eigencomponents below the relative support threshold.  A state
// lying in a sub-eigenspace then stays there exactly for all times, instead
// of drifting once rounding noise gets amplified by the dominant exponent.
void trim_support(CVec& c, double supp) {
  double nn = c.norm();
  for (Eigen::Index j = 0; j < c.size(); ++j)
    if (std::abs(c[j]) <= supp * nn) c[j] = 0.0;
}

}  // namespace

CVec act_flow(const Scene& scene, const SkewHermitian& s, double t, const CVec& x,
              const Tolerances& tol) {
  CMat a = kI * rep_of(scene, s, tol);  // Hermitian flow generator
  SpectralData sd = herm_eig(a, -1.0, tol);
  if (scene.kind == SceneKind::SphereTuple) {
    CVec y(x.size());
    for (int i = 0; i < scene.tuple_len; ++i) {
      CVec c = sd.basis.adjoint() * x.segment<2>(2 * i);
      trim_support(c, tol.supp);
      double shift = -1e300;
      for (Eigen::Index j = 0; j < c.size(); ++j)
        if (c[j] != 0.0) shift = std::max(shift, t * sd.raw_values[j]);
      if (shift == -1e300) fail(Err::Singular, "sphere spinor collapsed");
      for (Eigen::Index j = 0; j < c.size(); ++j)
        c[j] = (c[j] == 0.0) ? 0.0 : std::exp(t * sd.raw_values[j] - shift) * c[j];
      y.segment<2>(2 * i) = sd.basis * c;
    }
    return normalize_state(scene, y);
  }
  CVec c = sd.basis.adjoint() * x;
  if (scene.kind == SceneKind::Projective) {
    trim_support(c, tol.supp);
    // Shift by the largest exponent actually present so the leading component
    // survives; the projective class ignores the overall factor.
    double shift = -1e300;
    for (Eigen::Index j = 0; j < c.size(); ++j)
      if (c[j] != 0.0) shift = std::max(shift, t * sd.raw_values[j]);
    if (shift == -1e300) fail(Err::Singular, "projective representative collapsed");
    CVec w(c.size());
    for (Eigen::Index j = 0; j < c.size(); ++j)
      w[j] = (c[j] == 0.0) ? 0.0 : std::exp(t * sd.raw_values[j] - shift) * c[j];
    return normalize_state(scene, sd.basis * w);
  }
  trim_support(c, tol.supp);
  CVec w = CVec::Zero(c.size());
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    double mag = std::abs(c[j]);
    if (mag == 0.0) continue;
    double e = t * sd.raw_values[j] + std::log(mag);
    if (e > 690.0) fail(Err::Overflow, "flow leaves the representable range");
    w[j] = std::exp(e) * (c[j] / mag);
  }
  return sd.basis * w;
}

CVec act_k(const Scene& scene, const SkewHermitian& w, const CVec& x, const Tolerances& tol) {
  return apply_linear(scene, mat_exp(rep_of(scene, w, tol)), x);
}

// --------------------------------------------------------------------------

RVec moment_coords(const Scene& scene, const CVec& x) {
  if (scene.kind == SceneKind::SphereTuple) {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    for (int i = 0; i < scene.tuple_len; ++i) p += sphere_point(scene, x, i);
    p /= static_cast<double>(scene.tuple_len);
    return RVec(p);
  }
  RVec mu(scene.kdim());
  double scale = scene.kind == SceneKind::Projective ? 1.0 / x.squaredNorm() : 0.5;
  for (int i = 0; i < scene.kdim(); ++i)
    mu[i] = scale * (x.dot(kI * (scene.rep[i] * x))).real();
  return mu;
}

SkewHermitian moment(const Scene& scene, const CVec& x) {
  return coords_to_k(scene, moment_coords(scene, x));
}

double mu_pair(const Scene& scene, const CVec& x, const SkewHermitian& s, const Tolerances& tol) {
  double res = 0.0;
  RVec c = k_to_coords(scene, s, &res);
  if (res > tol.rep_hom * (1.0 + s.norm()))
    fail(Err::GroupNotInScene, "direction lies outside the scene's symmetry algebra");
  return moment_coords(scene, x).dot(c);
}

double mu_norm(const Scene& scene, const CVec& x) { return moment_coords(scene, x).norm(); }

TangentData inf_action(const Scene& scene, const SkewHermitian& s, const CVec& x,
                       const Tolerances& tol) {
  TangentData td;
  if (scene.kind == SceneKind::SphereTuple) {
    RVec c = k_to_coords(scene, s, nullptr);
    Eigen::Vector3d a = std::sqrt(2.0) * Eigen::Vector3d(c[0], c[1], c[2]);
    td.vec = CVec::Zero(3 * scene.tuple_len);
    double sum = 0.0;
    for (int i = 0; i < scene.tuple_len; ++i) {
      Eigen::Vector3d v = a.cross(sphere_point(scene, x, i));
      for (int k = 0; k < 3; ++k) td.vec[3 * i + k] = v[k];
      sum += v.squaredNorm();
    }
    td.norm = std::sqrt(sum / (std::sqrt(2.0) * scene.tuple_len));
    return td;
  }
  CMat ds = rep_of(scene, s, tol);
  if (scene.kind == SceneKind::Projective) {
    CVec z = normalize_state(scene, x);
    CVec v = ds * z;
    v -= z * z.dot(v);
    td.vec = v;
    td.norm = std::sqrt(2.0) * v.norm();
    return td;
  }
  td.vec = ds * x;
  td.norm = td.vec.norm();
  return td;
}

double scene_distance(const Scene& scene, const CVec& x, const CVec& y) {
  switch (scene.kind) {
    case SceneKind::SphereTuple: {
      double sum = 0.0;
      for (int i = 0; i < scene.tuple_len; ++i) {
        double th = sphere_angle(sphere_point(scene, x, i), sphere_point(scene, y, i));
        sum += th * th;
      }
      return std::sqrt(sum / (std::sqrt(2.0) * scene.tuple_len));
    }
    case SceneKind::Projective: {
      double ip = std::abs(x.normalized().dot(y.normalized()));
      return std::sqrt(2.0) * std::acos(std::min(1.0, ip));
    }
    case SceneKind::Flat:
      return (x - y).norm();
  }
  return 0.0;
}

// --------------------------------------------------------------------------

namespace {

// Real matrix of the linear map (coordinates c) -> chart components of
// xi_{c.b}(x); kernel vectors are isotropy directions.
Eigen::MatrixXd action_matrix(const Scene& scene, const CVec& x, const Tolerances& tol) {
  const int kd = scene.kdim();
  Eigen::MatrixXd t;
  for (int i = 0; i < kd; ++i) {
    RVec e = RVec::Zero(kd);
    e[i] = 1.0;
    TangentData td = inf_action(scene, coords_to_k(scene, e), x, tol);
    if (i == 0) t.resize(2 * td.vec.size(), kd);
    t.col(i).head(td.vec.size()) = td.vec.real();
    t.col(i).tail(td.vec.size()) = td.vec.imag();
  }
  return t;
}

}  // namespace

std::vector<SkewHermitian> special_directions(const Scene& scene, const CVec& x,
                                              const Tolerances& tol) {
  std::vector<RVec> coords;
  auto push = [&](RVec c) {
    double nn = c.norm();
    if (nn < 1e-12) return;
    c /= nn;
    for (const RVec& prev : coords)
      if ((prev - c).norm() < 1e-8 || (prev + c).norm() < 1e-8) return;
    coords.push_back(c);
  };

  if (scene.kind == SceneKind::SphereTuple) {
    // Axes through the configuration's points; the weight function is only
    // non-smooth at these.
    for (int i = 0; i < scene.tuple_len; ++i) {
      Eigen::Vector3d p = sphere_point(scene, x, i);
      push(-RVec(p));
    }
  }

  Eigen::MatrixXd t = action_matrix(scene, x, tol);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t, Eigen::ComputeFullV);
  const RVec& sig = svd.singularValues();
  double top = sig.size() ? sig[0] : 0.0;
  for (Eigen::Index j = 0; j < sig.size(); ++j)
    if (sig[j] <= 1e-8 * std::max(1.0, top)) push(svd.matrixV().col(j));

  std::vector<SkewHermitian> out;
  for (const RVec& c : coords) out.push_back(coords_to_k(scene, c));
  return out;
}

int stabilizer_dim(const Scene& scene, const CVec& x, double eps, const Tolerances& tol) {
  Eigen::MatrixXd t = action_matrix(scene, x, tol);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t);
  const RVec& sig = svd.singularValues();
  int dim = scene.kdim() - static_cast<int>(sig.size());
  for (Eigen::Index j = 0; j < sig.size(); ++j)
    if (sig[j] <= eps * std::max(1.0, sig[0])) ++dim;
  return dim;
}

CVec random_state(const Scene& scene, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (scene.kind == SceneKind::SphereTuple) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < scene.tuple_len; ++i) {
      Eigen::Vector3d p;
      do {
        p = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      } while (p.norm() < 1e-6);
      pts.push_back(p.normalized());
    }
    return sphere_state(pts);
  }
  CVec z = randn_complex(rng, scene.rep_dim, 1).col(0);
  if (scene.kind == SceneKind::Projective) return z.normalized();
  std::uniform_real_distribution<double> spread(-1.0, 2.0);
  return std::exp(spread(rng)) * z / std::sqrt(static_cast<double>(scene.rep_dim));
}

SkewHermitian random_k_direction(const Scene& scene, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  RVec c(scene.kdim());
  double nn = 0.0;
  do {
    for (int i = 0; i < scene.kdim(); ++i) c[i] = gauss(rng);
    nn = c.norm();
  } while (nn < 1e-6);
  return coords_to_k(scene, c / nn);
}

GrowthReport check_growth_bounds(const Scene& scene, int samples, Rng& rng,
                                 const Tolerances& tol) {
  GrowthReport rep;
  std::uniform_real_distribution<double> scale_dist(-1.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    CVec x = random_state(scene, rng);
    double scale = std::exp(scale_dist(rng));
    SkewHermitian s = SkewHermitian::project(scale * random_k_direction(scene, rng).mat());
    double d = scene_distance(scene, x, scene.base);
    double lhs1 = inf_action(scene, s, x, tol).norm;
    double rhs1 = scene.growth_c * s.norm() * (1.0 + d);
    double lhs2 = mu_norm(scene, x);
    double rhs2 = scene.growth_c * (1.0 + d * d);
    auto violated = [](double lhs, double rhs) { return lhs > rhs * (1.0 + 1e-9) + 1e-12; };
    if (violated(lhs1, rhs1) || violated(lhs2, rhs2)) {
      std::ostringstream os;
      os << "growth bound violated at sample " << i << ": |xi| = " << lhs1 << " vs " << rhs1
         << ", |mu| = " << lhs2 << " vs " << rhs2 << " (C = " << scene.growth_c << ")";
      fail(Err::BoundViolated, os.str());
    }
    rep.worst_action_ratio = std::max(rep.worst_action_ratio, rhs1 > 0 ? lhs1 / rhs1 : 0.0);
    rep.worst_moment_ratio = std::max(rep.worst_moment_ratio, rhs2 > 0 ? lhs2 / rhs2 : 0.0);
    ++rep.samples;
  }
  return rep;
}

}  // namespace knstab
