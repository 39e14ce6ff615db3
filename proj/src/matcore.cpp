#include "knstab/matcore.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace knstab {

void fail(Err code, const std::string& msg) { throw Error(code, msg); }

double kpair(const CMat& a, const CMat& b) {
  return (a.array() * b.array().conjugate()).sum().real();
}

bool is_hermitian(const CMat& a, double tol_rel) {
  return (a - a.adjoint()).norm() <= tol_rel * (1.0 + a.norm());
}

bool is_skew_hermitian(const CMat& a, double tol_rel) {
  return (a + a.adjoint()).norm() <= tol_rel * (1.0 + a.norm());
}

SkewHermitian::SkewHermitian(CMat a, const Tolerances& tol) : a_(std::move(a)) {
  if (a_.rows() != a_.cols()) fail(Err::NotHermitian, "skew-Hermitian: matrix not square");
  if (!is_skew_hermitian(a_, tol.sym)) {
    std::ostringstream os;
    os << "skew-Hermitian residual " << (a_ + a_.adjoint()).norm() << " exceeds tolerance";
    fail(Err::NotHermitian, os.str());
  }
  // Snap to the exact skew part so downstream algebra sees a clean element.
  a_ = 0.5 * (a_ - a_.adjoint().eval());
}

SkewHermitian SkewHermitian::project(const CMat& a) {
  SkewHermitian s;
  s.a_ = 0.5 * (a - a.adjoint());
  return s;
}

int SpectralData::offset(int j) const {
  int off = 0;
  for (int i = 0; i < j; ++i) off += multiplicity[i];
  return off;
}

CMat SpectralData::cluster_basis(int j) const {
  return basis.middleCols(offset(j), multiplicity[j]);
}

CMat SpectralData::cumulative_basis(int j) const {
  return basis.leftCols(offset(j) + multiplicity[j]);
}

double default_cluster_tol(const RVec& raw_values, const Tolerances& tol) {
  double radius = 0.0;
  for (Eigen::Index i = 0; i < raw_values.size(); ++i)
    radius = std::max(radius, std::abs(raw_values[i]));
  return tol.cluster_rel * (1.0 + radius);
}

SpectralData herm_eig(const CMat& h, double cluster_tol, const Tolerances& tol) {
  if (h.rows() != h.cols()) fail(Err::NotHermitian, "herm_eig: matrix not square");
  if (!is_hermitian(h, tol.sym)) fail(Err::NotHermitian, "herm_eig: matrix not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (h + h.adjoint()));
  if (es.info() != Eigen::Success) fail(Err::EigFailure, "herm_eig: eigensolver failed");

  SpectralData sd;
  sd.raw_values = es.eigenvalues();
  sd.basis = es.eigenvectors();
  if (cluster_tol <= 0.0) cluster_tol = default_cluster_tol(sd.raw_values, tol);

  const Eigen::Index n = h.rows();
  std::vector<double> reps;
  std::vector<int> mult;
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i + 1;
    // Chain merge: successive gaps below cluster_tol belong to one cluster.
    while (j < n && sd.raw_values[j] - sd.raw_values[j - 1] <= cluster_tol) ++j;
    reps.push_back(sd.raw_values.segment(i, j - i).mean());
    mult.push_back(static_cast<int>(j - i));
    i = j;
  }
  sd.values = Eigen::Map<RVec>(reps.data(), static_cast<Eigen::Index>(reps.size()));
  sd.multiplicity = std::move(mult);
  return sd;
}

CMat mat_exp(const CMat& a) {
  CMat r;
  if (is_hermitian(a, 1e-13)) {
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (a + a.adjoint()));
    if (es.info() != Eigen::Success) fail(Err::EigFailure, "mat_exp: eigensolver failed");
    r = es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
        es.eigenvectors().adjoint();
  } else if (is_skew_hermitian(a, 1e-13)) {
    // a = i h with h Hermitian; exp(a) = Q exp(i lambda) Q*.
    Eigen::SelfAdjointEigenSolver<CMat> es(Complex(0, -1) * a);
    if (es.info() != Eigen::Success) fail(Err::EigFailure, "mat_exp: eigensolver failed");
    CVec phases = (Complex(0, 1) * es.eigenvalues().cast<Complex>()).array().exp().matrix();
    r = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  } else {
    r = a.exp();
  }
  if (!r.allFinite()) fail(Err::Overflow, "mat_exp: overflow");
  return r;
}

CMat herm_log_pd(const CMat& p, const Tolerances& tol) {
  if (!is_hermitian(p, tol.sym)) fail(Err::NotHermitian, "herm_log_pd: matrix not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (p + p.adjoint()));
  if (es.info() != Eigen::Success) fail(Err::EigFailure, "herm_log_pd: eigensolver failed");
  const RVec& ev = es.eigenvalues();
  if (ev[0] <= 0.0) fail(Err::Singular, "herm_log_pd: matrix not positive definite");
  return es.eigenvectors() * ev.array().log().matrix().asDiagonal() * es.eigenvectors().adjoint();
}

CMat unitary_log(const CMat& k, const Tolerances& tol) {
  if ((k * k.adjoint() - CMat::Identity(k.rows(), k.cols())).norm() >
      1e-8 * (1.0 + std::sqrt(static_cast<double>(k.rows()))))
    fail(Err::PreconditionUnmet, "unitary_log: matrix not unitary");
  Eigen::ComplexSchur<CMat> schur(k);
  if (schur.info() != Eigen::Success) fail(Err::EigFailure, "unitary_log: Schur failed");
  // Unitary matrices are normal, so T is diagonal up to roundoff.
  const CMat& t = schur.matrixT();
  CVec logs(k.rows());
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    logs[i] = Complex(0.0, std::arg(t(i, i)));
  CMat w = schur.matrixU() * logs.asDiagonal() * schur.matrixU().adjoint();
  (void)tol;
  return 0.5 * (w - w.adjoint().eval());  // snap to skew
}

double cond_estimate(const CMat& g) {
  Eigen::JacobiSVD<CMat> svd(g);
  double smin = svd.singularValues()[svd.singularValues().size() - 1];
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return svd.singularValues()[0] / smin;
}

CartanPair polar_cartan(const CMat& g, const Tolerances& tol) {
  if (g.rows() != g.cols()) fail(Err::Singular, "polar_cartan: matrix not square");
  if (!g.allFinite()) fail(Err::Overflow, "polar_cartan: non-finite entries");
  // SVD-based polar: g = W S V* = (W V*) (V S V*), so i u = V log(S) V*.
  Eigen::JacobiSVD<CMat> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RVec& s = svd.singularValues();
  double smin = s[s.size() - 1];
  if (smin <= 0.0 || s[0] / smin > tol.cond_max)
    fail(Err::Singular, "polar_cartan: matrix singular or condition number too large");
  CMat iu = svd.matrixV() * s.array().log().matrix().asDiagonal() * svd.matrixV().adjoint();
  CartanPair cp;
  cp.u = SkewHermitian::project(Complex(0, -1) * iu);
  cp.k = svd.matrixU() * svd.matrixV().adjoint();
  return cp;
}

Subspace Subspace::zero(Eigen::Index n) { return Subspace{n, CMat(n, 0)}; }

Subspace Subspace::full(Eigen::Index n) { return Subspace{n, CMat::Identity(n, n)}; }

Subspace Subspace::span_of(const CMat& cols, double rank_tol) {
  Subspace s;
  s.ambient = cols.rows();
  if (cols.cols() == 0) {
    s.basis = CMat(cols.rows(), 0);
    return s;
  }
  Eigen::JacobiSVD<CMat> svd(cols, Eigen::ComputeThinU);
  const RVec& sv = svd.singularValues();
  if (rank_tol <= 0.0) rank_tol = 1e-10 * std::max(1.0, sv.size() ? sv[0] : 1.0);
  Eigen::Index r = 0;
  while (r < sv.size() && sv[r] > rank_tol) ++r;
  s.basis = svd.matrixU().leftCols(r);
  return s;
}

Subspace subspace_intersect(const Subspace& u, const Subspace& v, double rank_tol) {
  if (u.ambient != v.ambient)
    fail(Err::PreconditionUnmet, "subspace_intersect: ambient dimensions differ");
  const Eigen::Index n = u.ambient;
  // x lies in both spans iff both complement projectors annihilate it; the
  // singular values of the stacked projectors scale like principal angles.
  CMat m(2 * n, n);
  m.topRows(n) = CMat::Identity(n, n) - u.projector();
  m.bottomRows(n) = CMat::Identity(n, n) - v.projector();
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeFullV);
  const RVec& sv = svd.singularValues();
  if (rank_tol <= 0.0) rank_tol = 1e-10 * std::max(1.0, sv.size() ? sv[0] : 1.0);
  Eigen::Index null_dim = 0;
  while (null_dim < sv.size() && sv[sv.size() - 1 - null_dim] <= rank_tol) ++null_dim;
  Subspace r;
  r.ambient = n;
  r.basis = svd.matrixV().rightCols(null_dim);
  return r;
}

Subspace subspace_complement(const Subspace& u) {
  const Eigen::Index n = u.ambient;
  const Eigen::Index d = u.dim();
  if (d == 0) return Subspace::full(n);
  if (d == n) return Subspace::zero(n);
  Eigen::HouseholderQR<CMat> qr(u.basis);
  CMat q = qr.householderQ() * CMat::Identity(n, n);
  Subspace r;
  r.ambient = n;
  r.basis = q.rightCols(n - d);
  return r;
}

Subspace subspace_image(const CMat& g, const Subspace& u) {
  if (g.cols() != u.ambient) fail(Err::PreconditionUnmet, "subspace_image: dimension mismatch");
  if (u.dim() == 0) return Subspace::zero(g.rows());
  CMat img = g * u.basis;
  Eigen::HouseholderQR<CMat> qr(img);
  Subspace r;
  r.ambient = g.rows();
  r.basis = qr.householderQ() * CMat::Identity(g.rows(), u.dim());
  return r;
}

Subspace subspace_sum(const Subspace& u, const Subspace& v, double rank_tol) {
  if (u.ambient != v.ambient)
    fail(Err::PreconditionUnmet, "subspace_sum: ambient dimensions differ");
  CMat cols(u.ambient, u.dim() + v.dim());
  cols << u.basis, v.basis;
  return Subspace::span_of(cols, rank_tol);
}

namespace {

template <typename T>
T neville(const std::vector<double>& h, std::vector<T> f) {
  const size_t n = h.size();
  for (size_t level = 1; level < n; ++level)
    for (size_t i = 0; i + level < n; ++i)
      f[i] = f[i + 1] + (f[i + 1] - f[i]) * (h[i + level] / (h[i] - h[i + level]));
  return f[0];
}

void check_nodes(const std::vector<double>& h) {
  for (size_t i = 0; i < h.size(); ++i) {
    if (!std::isfinite(h[i])) fail(Err::PreconditionUnmet, "extrapolate_to_zero: non-finite node");
    for (size_t j = i + 1; j < h.size(); ++j)
      if (std::abs(h[i] - h[j]) <= 1e-14 * std::max(std::abs(h[i]), std::abs(h[j])))
        fail(Err::PreconditionUnmet, "extrapolate_to_zero: nodes must be distinct");
  }
}

}  // namespace

double extrapolate_to_zero(const std::vector<double>& h, const std::vector<double>& f) {
  if (h.size() != f.size() || h.empty())
    fail(Err::PreconditionUnmet, "extrapolate_to_zero: bad node list");
  check_nodes(h);
  return neville(h, f);
}

CMat extrapolate_to_zero(const std::vector<double>& h, const std::vector<CMat>& f) {
  if (h.size() != f.size() || h.empty())
    fail(Err::PreconditionUnmet, "extrapolate_to_zero: bad node list");
  check_nodes(h);
  return neville(h, f);
}

}  // namespace knstab
