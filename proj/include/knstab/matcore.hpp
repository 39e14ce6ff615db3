// Dense complex linear-algebra kernel: validated Lie-algebra element types,
// clustered Hermitian eigendecompositions, Cartan (polar) factorization and
// tolerance-aware subspace arithmetic.  Everything downstream builds on these.
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace knstab {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors.  One exception type with a code; callers branch on code().

enum class Err {
  NotHermitian,
  EigFailure,
  Singular,
  Overflow,
  DegenerateFiltration,
  SpectrumMismatch,
  ConnectFailure,
  PreconditionUnmet,
  QuadratureFailure,
  BoundViolated,
  NotATorusScene,
  GroupNotInScene,
  StepFailure,
  BudgetExhausted,
  Inconclusive,
  ParseError,
  ValidationError,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] void fail(Err code, const std::string& msg);

// ---------------------------------------------------------------------------
// Tolerance configuration.  Read-only bag of knobs with pinned defaults;
// functions take it by const reference and never mutate it.

struct Tolerances {
  double sym = 1e-10;         // Hermitian/skew-Hermitian symmetry residual (relative)
  double cluster_rel = 1e-8;  // eigenvalue clustering, scaled by 1 + spectral radius
  double rank_rel = 1e-10;    // subspace rank cut, scaled by largest singular value
  double cond_max = 1e12;     // refuse group elements conditioned worse than this
  double exp_check = 1e-9;    // exp/log round-trip validation
  double supp = 1e-10;        // eigencomponent support threshold (projective weights)
  double angle = 1e-8;        // antipodal coincidence threshold on the sphere (radians)
  double quad_rel = 1e-8;     // quadrature target, scaled by 1 + |integral|
  double mono = 1e-9;         // per-step slack for monotone weight curves
  double zero_band = 1e-6;    // |lambda| band treated as zero by classifiers
  double bw_agree = 1e-3;     // analytic vs ray weight agreement (relative)
  double fixed_point = 1e-8;  // infinitesimal-action norm treated as fixed
  double rep_hom = 1e-8;      // representation homomorphism residual
  double para = 1e-8;         // parabolic membership residual (relative)
  double connect = 1e-8;      // connect_geodesic postcondition residual
};

// ---------------------------------------------------------------------------
// Element of u(n): matrix with A* = -A within tolerance.

class SkewHermitian {
 public:
  SkewHermitian() = default;
  explicit SkewHermitian(CMat a, const Tolerances& tol = {});
  // Skew part (a - a*)/2 without validation.
  static SkewHermitian project(const CMat& a);

  const CMat& mat() const { return a_; }
  Eigen::Index dim() const { return a_.rows(); }
  double norm() const { return a_.norm(); }

 private:
  CMat a_;
};

// Frobenius pairing Re tr(a b*), the bi-invariant inner product used throughout.
double kpair(const CMat& a, const CMat& b);

bool is_hermitian(const CMat& a, double tol_rel);
bool is_skew_hermitian(const CMat& a, double tol_rel);

// ---------------------------------------------------------------------------
// Clustered spectrum of a Hermitian matrix.

struct SpectralData {
  RVec values;                    // one representative per cluster, ascending
  std::vector<int> multiplicity;  // cluster sizes, sums to n
  RVec raw_values;                // all n eigenvalues ascending
  CMat basis;                     // n x n unitary, columns grouped by cluster

  int clusters() const { return static_cast<int>(multiplicity.size()); }
  int offset(int j) const;                 // column offset of cluster j
  CMat cluster_basis(int j) const;         // n x multiplicity[j] block
  CMat cumulative_basis(int j) const;      // clusters 0..j stacked
};

// Eigendecomposition of Hermitian h; eigenvalues closer than cluster_tol are
// merged (cluster_tol <= 0 picks the default 1e-8 * (1 + spectral radius)).
SpectralData herm_eig(const CMat& h, double cluster_tol = -1.0, const Tolerances& tol = {});

double default_cluster_tol(const RVec& raw_values, const Tolerances& tol = {});

// ---------------------------------------------------------------------------
// Exponential and logarithms.

// Spectral route for (skew-)Hermitian input, scaling-and-squaring otherwise.
CMat mat_exp(const CMat& a);

// Principal logarithm of a Hermitian positive-definite matrix.
CMat herm_log_pd(const CMat& p, const Tolerances& tol = {});

// Principal logarithm of a unitary matrix; result is skew-Hermitian with
// eigenvalue arguments in (-pi, pi].
CMat unitary_log(const CMat& k, const Tolerances& tol = {});

// ---------------------------------------------------------------------------
// Cartan decomposition g = k exp(i u), k unitary, u in u(n).

struct CartanPair {
  CMat k;
  SkewHermitian u;
};

CartanPair polar_cartan(const CMat& g, const Tolerances& tol = {});

// Condition number from singular values.
double cond_estimate(const CMat& g);

// ---------------------------------------------------------------------------
// Subspaces as orthonormal column bases.

struct Subspace {
  Eigen::Index ambient = 0;
  CMat basis;  // ambient x d, orthonormal columns

  Eigen::Index dim() const { return basis.cols(); }
  CMat projector() const { return basis * basis.adjoint(); }

  static Subspace zero(Eigen::Index n);
  static Subspace full(Eigen::Index n);
  // Orthonormal basis of the column span, rank decided at rank_tol
  // (rank_tol <= 0 picks 1e-10 * sigma_max).
  static Subspace span_of(const CMat& cols, double rank_tol = -1.0);
};

Subspace subspace_intersect(const Subspace& u, const Subspace& v, double rank_tol = -1.0);
Subspace subspace_complement(const Subspace& u);
// Image g(U) for invertible g.
Subspace subspace_image(const CMat& g, const Subspace& u);
Subspace subspace_sum(const Subspace& u, const Subspace& v, double rank_tol = -1.0);

// ---------------------------------------------------------------------------
// Polynomial (Neville) extrapolation of f(h) to h = 0; nodes need not be sorted.

double extrapolate_to_zero(const std::vector<double>& h, const std::vector<double>& f);
CMat extrapolate_to_zero(const std::vector<double>& h, const std::vector<CMat>& f);

}  // namespace knstab
