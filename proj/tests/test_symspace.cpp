#include "doctest.h"

#include "knstab/rng.hpp"
#include "knstab/symspace.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

using namespace knstab;

namespace {

const Complex kI(0.0, 1.0);

CMat exp_i(const CMat& u) { return mat_exp(kI * u); }

SkewHermitian diag_skew(std::initializer_list<double> vals) {
  const auto n = static_cast<Eigen::Index>(vals.size());
  CMat m = CMat::Zero(n, n);
  Eigen::Index i = 0;
  // i * (this matrix) has spectrum exactly -vals.
  for (double v : vals) m(i, i) = kI * v, ++i;
  return SkewHermitian(m);
}

}  // namespace

TEST_CASE("distance along rays and its invariances") {
  Rng rng(101);
  SkewHermitian s = random_unit_skew(rng, 3);
  for (double t : {0.0, 0.7, 2.5}) {
    CHECK(distance(CMat::Identity(3, 3), exp_i(t * s.mat())) == doctest::Approx(t).epsilon(1e-9));
  }

  CMat g = random_group_element(rng, 3, 40.0);
  CMat h = random_group_element(rng, 3, 40.0);
  CMat r = random_group_element(rng, 3, 40.0);
  const double d = distance(g, h);
  CHECK(distance(g * r, h * r) == doctest::Approx(d).epsilon(1e-8));
  CHECK(distance(h, g) == doctest::Approx(d).epsilon(1e-8));
  CHECK(distance(g, g) <= 1e-9);

  // Triangle inequality.
  CHECK(distance(g, h) <= distance(g, r) + distance(r, h) + 1e-9);
}

TEST_CASE("boundary points are normalized directions") {
  Rng rng(102);
  SkewHermitian s = random_skew(rng, 3, 5.0);
  BoundaryPoint e(s);
  CHECK(e.dir().norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((e.mat() * s.norm() - s.mat()).norm() <= 1e-9 * s.norm());
  CHECK_THROWS_AS(BoundaryPoint{SkewHermitian(CMat::Zero(2, 2))}, Error);
}

TEST_CASE("boundary action: identity, unitaries, spectrum") {
  Rng rng(103);
  SkewHermitian s = random_unit_skew(rng, 4);
  BoundaryPoint e(s);

  CHECK((boundary_action(e, CMat::Identity(4, 4)).mat() - e.mat()).norm() <= 1e-12);

  // Unitaries act by conjugation.
  CMat k = haar_unitary(rng, 4);
  BoundaryPoint ek = boundary_action(e, k);
  CHECK((ek.mat() - k.adjoint() * e.mat() * k).norm() <= 1e-9);

  // The spectrum of i s never moves.
  CMat g = random_group_element(rng, 4, 100.0);
  BoundaryPoint eg = boundary_action(e, g);
  RVec before = herm_eig(CMat((kI * e.mat()).eval())).raw_values;
  RVec after = herm_eig(CMat((kI * eg.mat()).eval())).raw_values;
  CHECK((before - after).norm() <= 1e-8);

  CHECK_THROWS_AS(boundary_action(e, CMat::Zero(4, 4)), Error);
}

TEST_CASE("boundary action is a right action") {
  Rng rng(104);
  for (int trial = 0; trial < 5; ++trial) {
    SkewHermitian s = random_unit_skew(rng, 3);
    BoundaryPoint e(s);
    CMat g = random_group_element(rng, 3, 30.0);
    CMat h = random_group_element(rng, 3, 30.0);
    BoundaryPoint nested = boundary_action(boundary_action(e, g), h);
    BoundaryPoint joint = boundary_action(e, CMat(g * h));
    CHECK((nested.mat() - joint.mat()).norm() <= 1e-6);
  }
}

namespace {

// The inverse-time ladder resolves the limit once the eigenvalue clusters of
// i s are separated; tiny gaps would need times beyond double range, so draw
// until the smallest cluster gap is comfortable.
SkewHermitian gapped_unit_skew(Rng& rng, Eigen::Index n) {
  for (int draw = 0; draw < 200; ++draw) {
    SkewHermitian s = random_unit_skew(rng, n);
    SpectralData sd = herm_eig(CMat((kI * s.mat()).eval()));
    if (sd.clusters() < 2) continue;
    double gap = 1e300;
    for (int j = 0; j + 1 < sd.clusters(); ++j)
      gap = std::min(gap, sd.values[j + 1] - sd.values[j]);
    if (gap >= 0.3) return s;
  }
  throw std::runtime_error("no well-separated direction found");
}

}  // namespace

TEST_CASE("boundary action agrees with the finite-time logarithm limit") {
  Rng rng(105);
  for (int trial = 0; trial < 5; ++trial) {
    SkewHermitian s = gapped_unit_skew(rng, 3);
    BoundaryPoint e(s);
    CMat g = random_group_element(rng, 3, 100.0);
    SkewHermitian lim = boundary_action_extrapolated(e, g);
    CHECK((boundary_action(e, g).mat() - lim.mat()).norm() <= 1e-3);
  }
  // The ladder itself converges: larger tau lands closer to the fixed limit.
  SkewHermitian s = gapped_unit_skew(rng, 3);
  BoundaryPoint e(s);
  CMat g = random_group_element(rng, 3, 20.0);
  CMat target = boundary_action(e, g).mat();
  auto defect = [&](double tau) {
    CMat m = boundary_action_limit(e, g, tau).mat();
    return (m / m.norm() - target).norm();
  };
  CHECK(defect(160.0) <= defect(40.0) + 1e-12);
}

TEST_CASE("parabolic members fix their direction") {
  Rng rng(106);
  SkewHermitian s = diag_skew({-3.0, -1.0, 2.0});  // i s has distinct spectrum {3, 1, -2}
  BoundaryPoint e(s);

  // Commuting elements always stabilize.
  CMat c = exp_i(CMat(0.6 * s.mat()));
  CHECK(parabolic_contains(s, c));
  CHECK((boundary_action(e, c).mat() - e.mat()).norm() <= 1e-8);

  // Build a member from the triangular shape in the ascending eigenbasis of i s.
  SpectralData sd = herm_eig(CMat((kI * s.mat()).eval()));
  CMat tri = CMat::Identity(3, 3);
  tri(0, 1) = Complex(0.4, -0.2);
  tri(0, 2) = Complex(-0.1, 0.3);
  tri(1, 2) = Complex(0.25, 0.15);
  CMat lower = tri.adjoint();
  CMat cand_u = sd.basis * tri * sd.basis.adjoint();
  CMat cand_l = sd.basis * lower * sd.basis.adjoint();
  const bool upper_in = parabolic_contains(s, cand_u);
  const bool lower_in = parabolic_contains(s, cand_l);
  CHECK(upper_in != lower_in);  // exactly one triangle stabilizes the ray
  CMat member = upper_in ? cand_u : cand_l;
  CHECK((boundary_action(e, member).mat() - e.mat()).norm() <= 1e-8);
  // ... and the oracle confirms the fixed point.
  CHECK((boundary_action_extrapolated(e, member).mat() - e.mat()).norm() <= 1e-3);

  // A generic group element is not parabolic for a regular direction.
  CMat g = random_group_element(rng, 3, 30.0);
  BoundaryPoint moved = boundary_action(e, g);
  CHECK((moved.mat() - e.mat()).norm() > 1e-3);
  CHECK_FALSE(parabolic_contains(s, g));
}

TEST_CASE("ad matrix realizes the commutator") {
  Rng rng(107);
  CMat u = randn_complex(rng, 3, 3);
  CMat v = randn_complex(rng, 3, 3);
  CMat ad = ad_matrix(u);
  CVec vec_v = Eigen::Map<const CVec>(v.data(), 9);
  CVec lhs = ad * vec_v;
  CMat comm = u * v - v * u;
  CVec rhs = Eigen::Map<const CVec>(comm.data(), 9);
  CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
}

TEST_CASE("opposedness in su(2): distinct directions are opposed") {
  CMat sig1(2, 2), sig3(2, 2);
  sig1 << 0, 1, 1, 0;
  sig3 << 1, 0, 0, -1;
  SkewHermitian b1{CMat((-kI / std::sqrt(2.0) * sig1).eval())};
  SkewHermitian b3{CMat((-kI / std::sqrt(2.0) * sig3).eval())};
  SkewHermitian mix{CMat(((-kI / std::sqrt(2.0)) * ((0.6 * sig1 + 0.8 * sig3)).eval()).eval())};

  CHECK(opposed(b3, SkewHermitian(CMat((-b3.mat()).eval()))).opposed);
  CHECK(opposed(b3, b1).opposed);
  CHECK(opposed(b3, mix).opposed);
  OpposednessResult self = opposed(b3, b3);
  CHECK_FALSE(self.opposed);
  CHECK_FALSE(self.reason.empty());
}

TEST_CASE("opposedness certificates for antipodal pairs") {
  Rng rng(108);
  for (Eigen::Index n : {2, 3, 4}) {
    SkewHermitian u = random_unit_skew(rng, n);
    SkewHermitian minus_u{CMat((-u.mat()).eval())};
    OpposednessResult r = opposed(u, minus_u);
    REQUIRE(r.opposed);
    REQUIRE(r.cert.has_value());
    CHECK(r.cert->min_singular > 0.0);
    CHECK_FALSE(r.cert->pieces.empty());
  }
  // Degenerate spectrum: conjugated multiplicity-two direction.  The adjoint
  // filtration of i ad(u) for eigenvalues {1,1,2} has clusters {-1, 0, +1}.
  CMat k = haar_unitary(rng, 3);
  SkewHermitian u = diag_skew({1.0, 1.0, 2.0});
  SkewHermitian cu{CMat((k * u.mat() * k.adjoint()).eval())};
  SkewHermitian minus_cu{CMat((-cu.mat()).eval())};
  OpposednessResult r = opposed(cu, minus_cu);
  REQUIRE(r.opposed);
  REQUIRE(r.cert.has_value());
  CHECK(r.cert->pieces.size() == 3);
}

TEST_CASE("opposedness rejects mismatched or entangled flags") {
  // Spectra that cannot be opposed.
  SkewHermitian a = diag_skew({1.0, 2.0});
  SkewHermitian b = diag_skew({1.0, 3.0});
  OpposednessResult r1 = opposed(a, b);
  CHECK_FALSE(r1.opposed);
  CHECK_FALSE(r1.reason.empty());

  // Matching spectra but shared filtration pieces: i a = -e11, i c = e22.
  SkewHermitian u = diag_skew({1.0, 0.0, 0.0});
  SkewHermitian v = diag_skew({0.0, -1.0, 0.0});
  CHECK_FALSE(opposed(u, v).opposed);

  // On the diagonal torus opposedness pins the exact negative.
  SkewHermitian w = diag_skew({-1.0, 0.0, 0.0});
  CHECK(opposed(u, w).opposed);
}

TEST_CASE("opposedness is symmetric") {
  Rng rng(109);
  for (int trial = 0; trial < 8; ++trial) {
    SkewHermitian u = random_unit_skew(rng, 3);
    SkewHermitian v = trial % 2 ? random_unit_skew(rng, 3)
                                : SkewHermitian(CMat((-u.mat()).eval()));
    CHECK(opposed(u, v).opposed == opposed(v, u).opposed);
    CHECK(geodesically_connected(BoundaryPoint(u), BoundaryPoint(v)) == opposed(u, v).opposed);
  }
}

TEST_CASE("connect_geodesic satisfies its postconditions") {
  Rng rng(110);
  for (Eigen::Index n : {2, 3}) {
    for (int trial = 0; trial < 3; ++trial) {
      SkewHermitian u0 = random_unit_skew(rng, n);
      CMat k = haar_unitary(rng, n);
      SkewHermitian u{CMat((k * u0.mat() * k.adjoint()).eval())};
      SkewHermitian v{CMat((-u.mat()).eval())};
      BoundaryPoint eu(u), ev(v);
      REQUIRE(geodesically_connected(eu, ev));
      CMat h = connect_geodesic(eu, ev);
      CHECK(parabolic_contains(eu.dir(), h));
      CHECK((boundary_action(ev, h).mat() + eu.mat()).norm() <= 1e-6);
    }
  }

  // Failure is reported with the ConnectFailure code.
  SkewHermitian u = diag_skew({1.0, 0.0, 0.0});
  SkewHermitian v = diag_skew({0.0, -1.0, 0.0});
  try {
    connect_geodesic(BoundaryPoint(u), BoundaryPoint(v));
    FAIL("expected ConnectFailure");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ConnectFailure);
  }
}

TEST_CASE("torus dimension from a declared rational spectrum") {
  SkewHermitian s123 = diag_skew({-1.0, -2.0, -3.0});  // i s has spectrum {1,2,3}
  CHECK(torus_dim(s123, {Rational(1), Rational(2), Rational(3)}) == 1);

  // One declared value per eigenvalue cluster: the zero matrix has a single
  // cluster of multiplicity two.
  SkewHermitian zero{CMat(CMat::Zero(2, 2))};
  CHECK(torus_dim(zero, {Rational(0)}) == 0);

  SkewHermitian frac = diag_skew({-1.0 / 3.0, -1.0 / 2.0});  // spectrum {1/3, 1/2}
  CHECK(torus_dim(frac, {Rational(1, 3), Rational(1, 2)}) == 1);

  try {
    torus_dim(s123, {Rational(1), Rational(1), Rational(3)});
    FAIL("expected SpectrumMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Err::SpectrumMismatch);
  }
  CHECK_THROWS_AS(torus_dim(s123, {Rational(1), Rational(2)}), Error);
}
