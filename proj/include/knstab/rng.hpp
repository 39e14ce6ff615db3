// Seeded random and low-discrepancy generators used by samplers and tests.
#pragma once

#include "knstab/matcore.hpp"

#include <cstdint>
#include <random>

namespace knstab {

using Rng = std::mt19937_64;

CMat randn_complex(Rng& rng, Eigen::Index rows, Eigen::Index cols);

// Haar-distributed unitary: QR of a Gaussian matrix with the R diagonal
// phases absorbed into Q.
CMat haar_unitary(Rng& rng, Eigen::Index n);

SkewHermitian random_skew(Rng& rng, Eigen::Index n, double scale = 1.0);

// Unit Frobenius norm element of u(n).
SkewHermitian random_unit_skew(Rng& rng, Eigen::Index n);

// Invertible complex matrix with condition number below cond_cap.
CMat random_group_element(Rng& rng, Eigen::Index n, double cond_cap = 1e3);

// Halton sequence entry (bases 2,3,5,...) mapped to the unit sphere of R^d
// through Box-Muller; deterministic in index.
RVec halton_sphere(uint64_t index, int d);

}  // namespace knstab
