#include "knstab/rng.hpp"

#include <cmath>

namespace knstab {

CMat randn_complex(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      double re = nd(rng);
      double im = nd(rng);
      m(i, j) = Complex(re, im);
    }
  return m;
}

CMat haar_unitary(Rng& rng, Eigen::Index n) {
  CMat g = randn_complex(rng, n, n);
  Eigen::HouseholderQR<CMat> qr(g);
  CMat q = qr.householderQ() * CMat::Identity(n, n);
  CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    Complex d = r(j, j);
    q.col(j) *= d / std::abs(d);
  }
  return q;
}

SkewHermitian random_skew(Rng& rng, Eigen::Index n, double scale) {
  CMat g = randn_complex(rng, n, n);
  return SkewHermitian::project(scale * g);
}

SkewHermitian random_unit_skew(Rng& rng, Eigen::Index n) {
  SkewHermitian s = random_skew(rng, n);
  double nrm = s.norm();
  while (nrm < 1e-12) {
    s = random_skew(rng, n);
    nrm = s.norm();
  }
  return SkewHermitian::project(s.mat() / nrm);
}

CMat random_group_element(Rng& rng, Eigen::Index n, double cond_cap) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    CMat g = randn_complex(rng, n, n);
    double c = cond_estimate(g);
    if (std::isfinite(c) && c <= cond_cap) return g;
  }
  fail(Err::PreconditionUnmet, "random_group_element: condition cap too tight");
}

namespace {

double halton(uint64_t index, uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

constexpr uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

RVec halton_sphere(uint64_t index, int d) {
  // Box-Muller over consecutive Halton coordinates, then normalize.
  RVec v(d);
  int pairs = (d + 1) / 2;
  for (int p = 0; p < pairs; ++p) {
    double u1 = halton(index + 1, kPrimes[(2 * p) % 16]);
    double u2 = halton(index + 1, kPrimes[(2 * p + 1) % 16]);
    u1 = std::max(u1, 1e-12);
    double rad = std::sqrt(-2.0 * std::log(u1));
    if (2 * p < d) v[2 * p] = rad * std::cos(2.0 * M_PI * u2);
    if (2 * p + 1 < d) v[2 * p + 1] = rad * std::sin(2.0 * M_PI * u2);
  }
  double nrm = v.norm();
  if (nrm < 1e-9) {
    v.setZero();
    v[0] = 1.0;
    return v;
  }
  return v / nrm;
}

}  // namespace knstab
