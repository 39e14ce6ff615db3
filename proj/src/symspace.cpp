#include "knstab/symspace.hpp"

#include <cmath>
#include <sstream>

namespace knstab {

BoundaryPoint::BoundaryPoint(const SkewHermitian& s, const Tolerances& tol) {
  double n = s.norm();
  if (n < 1e-12) fail(Err::PreconditionUnmet, "boundary point: zero direction");
  (void)tol;
  s_ = SkewHermitian::project(s.mat() / n);
}

double distance(const CMat& g, const CMat& h, const Tolerances& tol) {
  if (g.rows() != h.rows() || g.rows() != g.cols() || h.rows() != h.cols())
    fail(Err::PreconditionUnmet, "distance: dimension mismatch");
  // Right invariance: d([g],[h]) = d([1],[h g^{-1}]), and the Cartan factor of
  // h g^{-1} carries the whole geodesic displacement.
  CartanPair cp = polar_cartan(h * g.inverse(), tol);
  return cp.u.norm();
}

namespace {

Subspace cluster_subspace(const SpectralData& sd, int j) {
  Subspace s;
  s.ambient = sd.basis.rows();
  s.basis = sd.cumulative_basis(j);
  return s;
}

}  // namespace

BoundaryPoint boundary_action(const BoundaryPoint& s, const CMat& g, const Tolerances& tol) {
  const Eigen::Index n = s.dim();
  if (g.rows() != n || g.cols() != n)
    fail(Err::PreconditionUnmet, "boundary_action: dimension mismatch");
  SpectralData sd = herm_eig(Complex(0, 1) * s.mat(), -1.0, tol);
  const int rc = sd.clusters();

  // Pull the ascending eigenspace flag of i s back through g in one solve.
  Eigen::PartialPivLU<CMat> lu(g);
  CMat pulled = lu.solve(sd.basis);
  if (!pulled.allFinite()) fail(Err::Singular, "boundary_action: g not invertible");

  CMat assembled = CMat::Zero(n, n);
  CMat all_pieces(n, n);
  Eigen::Index col = 0;
  Subspace prev = Subspace::zero(n);
  for (int j = 0; j < rc; ++j) {
    Subspace wj = Subspace::span_of(pulled.leftCols(sd.offset(j) + sd.multiplicity[j]));
    Subspace piece = subspace_intersect(subspace_complement(prev), wj);
    if (piece.dim() != sd.multiplicity[j]) {
      std::ostringstream os;
      os << "boundary_action: filtration step " << j << " has dimension " << piece.dim()
         << ", expected " << sd.multiplicity[j];
      fail(Err::DegenerateFiltration, os.str());
    }
    assembled += Complex(0, -1) * sd.values[j] * piece.projector();
    all_pieces.middleCols(col, piece.dim()) = piece.basis;
    col += piece.dim();
    prev = wj;
  }
  // The pieces come out mutually orthogonal when the filtration is clean.
  double ortho = (all_pieces.adjoint() * all_pieces - CMat::Identity(n, n)).norm();
  if (ortho > 1e-7 * n)
    fail(Err::DegenerateFiltration, "boundary_action: filtration pieces not orthogonal");
  return BoundaryPoint(SkewHermitian::project(assembled), tol);
}

namespace {

// Cyclic complex Jacobi diagonalization of a Hermitian positive matrix.  The
// relative stopping rule keeps the small diagonal blocks meaningful even when
// the entries span hundreds of orders of magnitude, which tridiagonalization
// based solvers cannot do.
void graded_jacobi(CMat& s, CMat& w) {
  const Eigen::Index n = s.rows();
  w = CMat::Identity(n, n);
  for (int sweep = 0; sweep < 60; ++sweep) {
    double worst = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        double app = s(p, p).real(), aqq = s(q, q).real();
        double mag = std::abs(s(p, q));
        double gate = std::sqrt(std::max(app, 1e-300) * std::max(aqq, 1e-300));
        double rel = mag / gate;
        worst = std::max(worst, rel);
        if (rel <= 1e-15) continue;
        Complex phase = s(p, q) / mag;
        double zeta = (aqq - app) / (2.0 * mag);
        double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::hypot(1.0, zeta));
        if (zeta != 0.0 && std::abs(zeta) >= 1e15) t = 1.0 / (2.0 * zeta);
        t = -t;  // the root of t^2 - 2 zeta t - 1 = 0 with the smaller magnitude
        double c = 1.0 / std::sqrt(1.0 + t * t), sn = t * c;
        // Unitary rotation J = [[c, -sn*phase], [sn*conj(phase), c]] in the
        // (p, q) plane; S <- J* S J, eigenvectors accumulate as W <- W J.
        CVec colp = s.col(p), colq = s.col(q);
        s.col(p) = c * colp + sn * std::conj(phase) * colq;
        s.col(q) = -sn * phase * colp + c * colq;
        CVec rowp = s.row(p).adjoint(), rowq = s.row(q).adjoint();
        s.row(p) = (c * rowp + sn * std::conj(phase) * rowq).adjoint();
        s.row(q) = (-sn * phase * rowp + c * rowq).adjoint();
        double anew = app * c * c + 2.0 * sn * c * mag + aqq * sn * sn;
        double dnew = app * sn * sn - 2.0 * sn * c * mag + aqq * c * c;
        s(p, p) = anew;
        s(q, q) = dnew;
        s(p, q) = 0.0;
        s(q, p) = 0.0;
        CVec wp = w.col(p), wq = w.col(q);
        w.col(p) = c * wp + sn * std::conj(phase) * wq;
        w.col(q) = -sn * phase * wp + c * wq;
      }
    if (worst <= 1e-15) break;
  }
}

}  // namespace

SkewHermitian boundary_action_limit(const BoundaryPoint& s, const CMat& g, double tau,
                                    const Tolerances& tol) {
  if (tau <= 0.0) fail(Err::PreconditionUnmet, "boundary_action_limit: tau must be positive");
  const Eigen::Index n = s.dim();
  if (g.rows() != n || g.cols() != n)
    fail(Err::PreconditionUnmet, "boundary_action_limit: dimension mismatch");
  SpectralData sd = herm_eig(Complex(0, 1) * s.mat(), -1.0, tol);
  double radius = std::max(std::abs(sd.raw_values[0]), std::abs(sd.raw_values[n - 1]));
  if (2.0 * tau * radius > 690.0)
    fail(Err::Overflow, "boundary_action_limit: exp(tau s) overflows");
  // exp(i tau s) g = V (E B) with E = exp(tau Lambda) and B = V* g.  The
  // Cartan logarithm needs the eigendecomposition of B* E^2 B, whose clusters
  // are separated by factors exponential in tau.  Forming the Gram matrix
  // directly would bury the small clusters under roundoff from the large
  // ones, so: order the columns of A = B* E by descending scale (Householder
  // QR is columnwise backward stable, each column is perturbed relative to
  // its own norm), then diagonalize the graded triangular Gram R R* with a
  // relative-accuracy Jacobi iteration.
  CMat a(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index src = n - 1 - j;  // herm_eig sorts ascending; grade descending
    a.col(j) = std::exp(tau * sd.raw_values[src]) *
               (sd.basis.col(src).adjoint() * g).adjoint();
  }
  Eigen::HouseholderQR<CMat> qr(a);
  CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  CMat qfull = qr.householderQ() * CMat::Identity(n, n);
  CMat gram = r * r.adjoint();
  CMat w;
  graded_jacobi(gram, w);
  RVec sq = gram.diagonal().real();
  if (!(sq.array() > 0.0).all() || !sq.allFinite())
    fail(Err::Singular, "boundary_action_limit: singular factor");
  CMat u = qfull * w;
  CMat iu = u * (0.5 * sq.array().log() / tau).matrix().asDiagonal() * u.adjoint();
  return SkewHermitian::project(Complex(0, -1) * iu);
}

SkewHermitian boundary_action_extrapolated(const BoundaryPoint& s, const CMat& g,
                                           const std::array<double, 3>& taus,
                                           const Tolerances& tol) {
  std::vector<double> nodes;
  std::vector<CMat> vals;
  for (double tau : taus) {
    nodes.push_back(1.0 / tau);
    vals.push_back(boundary_action_limit(s, g, tau, tol).mat());
  }
  return SkewHermitian::project(extrapolate_to_zero(nodes, vals));
}

bool parabolic_contains(const SkewHermitian& s, const CMat& g, double rel_tol,
                        const Tolerances& tol) {
  if (rel_tol <= 0.0) rel_tol = tol.para;
  SpectralData sd = herm_eig(Complex(0, 1) * s.mat(), -1.0, tol);
  CMat gp = sd.basis.adjoint() * g * sd.basis;
  double off = 0.0;
  for (int j = 0; j < sd.clusters(); ++j)
    for (int k = 0; k < sd.clusters(); ++k) {
      if (sd.values[j] <= sd.values[k]) continue;  // only decaying blocks must vanish
      off += gp.block(sd.offset(j), sd.offset(k), sd.multiplicity[j], sd.multiplicity[k])
                 .squaredNorm();
    }
  return std::sqrt(off) <= rel_tol * g.norm();
}

CMat ad_matrix(const CMat& u) {
  const Eigen::Index n = u.rows();
  CMat m = CMat::Zero(n * n, n * n);
  // vec(u X - X u) with column-major vec: I (x) u - u^T (x) I.
  for (Eigen::Index b = 0; b < n; ++b)
    m.block(b * n, b * n, n, n) += u;
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index bp = 0; bp < n; ++bp)
      for (Eigen::Index a = 0; a < n; ++a)
        m(a + b * n, a + bp * n) -= u(bp, b);
  return m;
}

namespace {

// Shared filtration transversality test for skew-Hermitian a, b on the same
// space: growing eigenspace flags of i a and i b must meet complementarily.
OpposednessResult filtration_test(const CMat& a, const CMat& b, const Tolerances& tol) {
  OpposednessResult res;
  SpectralData sa = herm_eig(Complex(0, 1) * a, -1.0, tol);
  SpectralData sb = herm_eig(Complex(0, 1) * b, -1.0, tol);
  const int rc = sa.clusters();
  if (sb.clusters() != rc) {
    res.reason = "cluster counts differ";
    return res;
  }
  double ctol = 10.0 * std::max(default_cluster_tol(sa.raw_values, tol),
                                default_cluster_tol(sb.raw_values, tol));
  for (int j = 0; j < rc; ++j) {
    if (std::abs(sa.values[j] + sb.values[rc - 1 - j]) > ctol ||
        sa.multiplicity[j] != sb.multiplicity[rc - 1 - j]) {
      res.reason = "spectra are not opposite";
      return res;
    }
  }
  const Eigen::Index n = a.rows();
  OpposednessCertificate cert;
  cert.spectrum = sa.values;
  CMat stacked(n, n);
  Eigen::Index col = 0;
  for (int p = 0; p < rc; ++p) {
    Subspace ep = subspace_intersect(cluster_subspace(sa, p), cluster_subspace(sb, rc - 1 - p));
    if (ep.dim() != sa.multiplicity[p]) {
      std::ostringstream os;
      os << "filtration intersection " << p << " has dimension " << ep.dim() << ", expected "
         << sa.multiplicity[p];
      res.reason = os.str();
      return res;
    }
    stacked.middleCols(col, ep.dim()) = ep.basis;
    col += ep.dim();
    cert.pieces.push_back(std::move(ep));
  }
  Eigen::JacobiSVD<CMat> svd(stacked);
  double smin = svd.singularValues()[svd.singularValues().size() - 1];
  if (smin <= tol.rank_rel * std::max(1.0, svd.singularValues()[0])) {
    res.reason = "intersection pieces do not span";
    return res;
  }
  cert.min_singular = smin;
  res.opposed = true;
  res.cert = std::move(cert);
  return res;
}

}  // namespace

OpposednessResult opposed(const SkewHermitian& u, const SkewHermitian& v, bool use_adjoint,
                          const Tolerances& tol) {
  if (u.dim() != v.dim()) fail(Err::PreconditionUnmet, "opposed: dimension mismatch");
  if (!use_adjoint) return filtration_test(u.mat(), v.mat(), tol);

  // Orbit condition first: i u and -i v share a spectrum with multiplicities.
  SpectralData su = herm_eig(Complex(0, 1) * u.mat(), -1.0, tol);
  SpectralData sv = herm_eig(Complex(0, -1) * v.mat(), -1.0, tol);
  OpposednessResult res;
  if (su.clusters() != sv.clusters()) {
    res.reason = "different adjoint orbits (cluster counts)";
    return res;
  }
  double ctol = 10.0 * std::max(default_cluster_tol(su.raw_values, tol),
                                default_cluster_tol(sv.raw_values, tol));
  for (int j = 0; j < su.clusters(); ++j) {
    if (std::abs(su.values[j] - sv.values[j]) > ctol || su.multiplicity[j] != sv.multiplicity[j]) {
      res.reason = "different adjoint orbits (spectra)";
      return res;
    }
  }
  return filtration_test(ad_matrix(u.mat()), ad_matrix(v.mat()), tol);
}

bool geodesically_connected(const BoundaryPoint& u, const BoundaryPoint& v, const Tolerances& tol) {
  return opposed(u.dir(), v.dir(), true, tol).opposed;
}

namespace {

// Zero the strictly decaying blocks of h in the ascending eigenbasis of i u.
CMat project_parabolic(const CMat& h, const SpectralData& su) {
  CMat hp = su.basis.adjoint() * h * su.basis;
  for (int j = 0; j < su.clusters(); ++j)
    for (int k = 0; k < su.clusters(); ++k)
      if (su.values[j] > su.values[k])
        hp.block(su.offset(j), su.offset(k), su.multiplicity[j], su.multiplicity[k]).setZero();
  return su.basis * hp * su.basis.adjoint();
}

// Zero the blocks violating h(tail flag of i u) = matching flag of i v.
CMat project_flag_transport(const CMat& h, const SpectralData& su, const SpectralData& sv) {
  const int rc = su.clusters();
  CMat hp = sv.basis.adjoint() * h * su.basis;
  for (int k = 0; k < rc; ++k)
    for (int j = 0; j < rc; ++j)
      if (k + j > rc - 1)
        hp.block(sv.offset(k), su.offset(j), sv.multiplicity[k], su.multiplicity[j]).setZero();
  return sv.basis * hp * su.basis.adjoint();
}

bool verify_connect(const BoundaryPoint& u, const BoundaryPoint& v, const CMat& h,
                    const Tolerances& tol) {
  if (!h.allFinite()) return false;
  if (!parabolic_contains(u.dir(), h, tol.connect, tol)) return false;
  try {
    BoundaryPoint moved = boundary_action(v, h, tol);
    return (moved.mat() + u.mat()).norm() <= tol.connect;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

CMat connect_geodesic(const BoundaryPoint& u, const BoundaryPoint& v, const Tolerances& tol) {
  OpposednessResult opp = opposed(u.dir(), v.dir(), true, tol);
  if (!opp.opposed)
    fail(Err::ConnectFailure, "connect_geodesic: directions not opposed (" + opp.reason + ")");

  const Eigen::Index n = u.dim();
  SpectralData su = herm_eig(Complex(0, 1) * u.mat(), -1.0, tol);
  SpectralData sv = herm_eig(Complex(0, 1) * v.mat(), -1.0, tol);
  const int rc = su.clusters();

  CMat h;
  bool built = false;
  if (sv.clusters() == rc) {
    // Adapted-basis construction.  D_p = (ascending flag of i u at p) meet
    // (tail flag of i v at p) maps onto the p-th eigenspace of i u under the
    // orthogonal projection; h sends eigenspaces back to the D_p.
    CMat bmat(n, n), cmat(n, n);
    Eigen::Index col = 0;
    bool ok = true;
    for (int p = 0; p < rc && ok; ++p) {
      Subspace dp = subspace_intersect(cluster_subspace(su, p), cluster_subspace(sv, rc - 1 - p));
      if (dp.dim() != su.multiplicity[p]) {
        ok = false;
        break;
      }
      CMat qp = su.cluster_basis(p);
      bmat.middleCols(col, dp.dim()) = dp.basis;
      cmat.middleCols(col, dp.dim()) = qp * (qp.adjoint() * dp.basis);
      col += dp.dim();
    }
    if (ok) {
      Eigen::JacobiSVD<CMat> csvd(cmat);
      double smin = csvd.singularValues()[n - 1];
      if (smin > 1e-10 * csvd.singularValues()[0]) {
        h = bmat * cmat.inverse();
        h *= std::sqrt(static_cast<double>(n)) / h.norm();
        built = verify_connect(u, v, h, tol);
      }
    }
  }

  if (!built) {
    // Alternating projection onto the two linear constraint sets, seeded with
    // the adapted-basis candidate when one was formed.
    CMat cand = (h.size() > 0) ? h : CMat::Identity(n, n);
    for (int it = 0; it < 500; ++it) {
      CMat next = project_flag_transport(project_parabolic(cand, su), su, sv);
      double step = (next - cand).norm();
      cand = next;
      if (step < 1e-10) break;
    }
    if (cand.norm() > 1e-8) {
      cand *= std::sqrt(static_cast<double>(n)) / cand.norm();
      if (verify_connect(u, v, cand, tol)) {
        h = cand;
        built = true;
      }
    }
  }

  if (!built) fail(Err::ConnectFailure, "connect_geodesic: postconditions not met");
  return h;
}

int torus_dim(const SkewHermitian& s, const std::vector<Rational>& declared_spectrum,
              const Tolerances& tol) {
  SpectralData sd = herm_eig(Complex(0, 1) * s.mat(), -1.0, tol);
  std::vector<Rational> declared = declared_spectrum;
  std::sort(declared.begin(), declared.end(),
            [](const Rational& a, const Rational& b) { return a.to_double() < b.to_double(); });
  if (static_cast<int>(declared.size()) != sd.clusters())
    fail(Err::SpectrumMismatch, "torus_dim: declared spectrum has wrong number of values");
  double ctol = 10.0 * default_cluster_tol(sd.raw_values, tol);
  for (int j = 0; j < sd.clusters(); ++j)
    if (std::abs(sd.values[j] - declared[j].to_double()) > ctol)
      fail(Err::SpectrumMismatch, "torus_dim: numeric spectrum does not match declared values");
  // Q-span of rational numbers: rank of the column vector over Q.
  RatMatrix col;
  for (const Rational& r : declared) col.push_back({r});
  return rational_rank(col);
}

}  // namespace knstab
