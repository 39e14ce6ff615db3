// Built-in verification suite: named invariant checks over all modules,
// runnable at two depths and under caller-supplied tolerance overrides.
#pragma once

#include "knstab/stability.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace knstab {

enum class SelftestLevel { Quick, Full };

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // failure reason, or a short statistic on success
};

struct SelftestReport {
  SelftestLevel level = SelftestLevel::Quick;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;
  bool all_pass() const;
};

// Quick runs the per-module invariants in seconds; Full adds the quadrature,
// equivariance, flow and density suites (minutes).  Deterministic given seed.
SelftestReport run_selftest(SelftestLevel level, std::uint64_t seed, const Tolerances& tol = {});

}  // namespace knstab
