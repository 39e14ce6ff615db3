// Stability classification of scene points: exact rational verdicts for torus
// weights, a sampling classifier for general scenes driven by maximal-weight
// minimization and zero-partner search, the moment-map norm descent flow in
// the group, and K-orbit comparison of flow limits.
#pragma once

#include "knstab/weights.hpp"

#include <iosfwd>
#include <optional>

namespace knstab {

enum class Verdict { Stable, Polystable, NonnegativeNotPolystable, Unstable };

std::string to_string(Verdict v);

// A vanishing weight direction together with its opposed vanishing partner.
// Directions are stored as coordinate vectors against the scene's generators.
struct ZeroPair {
  RVec s_coords;
  RVec u_coords;
  std::optional<OpposednessCertificate> cert;
};

struct StabilityResult {
  Verdict verdict = Verdict::Unstable;
  double zero_band = 1e-6;  // |lambda| band treated as zero
  bool exact = false;       // rational-arithmetic verdict vs sampled evidence

  // Stable: evidence for min lambda > 0.
  double min_weight = 0.0;
  long evaluations = 0;

  // Unstable: direction with negative weight.
  std::optional<RVec> witness_coords;
  double witness_weight = 0.0;

  // Polystable: every vanishing direction paired with an opposed one.
  std::vector<ZeroPair> pairs;

  // NonnegativeNotPolystable: a vanishing direction with no partner.
  std::optional<RVec> unpaired_zero;

  std::string diagnostics;
};

// Indices j with |z_j| above the support threshold.
std::vector<int> state_support(const Scene& scene, const CVec& z, const Tolerances& tol = {});

// Exact verdict for a diagonal torus acting with the given integer weight
// rows, considering only the supported rows.  All hull decisions are made in
// rational arithmetic.
StabilityResult classify_torus_projective(const std::vector<std::vector<long long>>& weights,
                                          const std::vector<int>& support);

// Scene-level wrapper; throws NotATorusScene for non-torus scenes.  Attaches
// opposedness certificates to any zero pairs.
StabilityResult classify_torus_point(const Scene& scene, const CVec& z,
                                     const Tolerances& tol = {});

// Sampling classifier: multistart minimization of the maximal weight over the
// unit sphere of the symmetry algebra, then an opposed-partner search over the
// vanishing directions.  budget caps the number of weight evaluations.
StabilityResult classify_sampling(const Scene& scene, const CVec& x, long budget, Rng& rng,
                                  const Tolerances& tol = {});

// --------------------------------------------------------------------------
// Moment-map norm descent in the group.

enum class FlowOutcome { ConvergedInOrbit, ConvergedDegenerate, Diverged, BudgetExhausted };

std::string to_string(FlowOutcome o);

struct FlowParams {
  double t_max = 1e7;       // flow-time budget
  long max_steps = 400000;  // accepted + rejected step budget
  double eps_zero = 1e-8;   // |mu| level counted as a zero of the moment map
  double eps_div = 1e-2;    // |mu| must stay above this to call a flow divergent
  double dist_cap = 12.0;   // group displacement treated as leaving every bounded set
  double merge_tol = 0.02;  // sphere monitor: collision angle for initially distinct points
  double h0 = 1e-2;
  double h_min = 1e-12;
  double rtol = 1e-8;
  double atol = 1e-12;
  int trace_len = 160;  // target number of retained samples
};

struct FlowTrace {
  RVec times;
  RVec mu_norms;
  RVec distances;
  CMat g_final;
  CVec x_final;
  FlowOutcome outcome = FlowOutcome::BudgetExhausted;
  std::string note;
};

// Integrates g' = -i m(t) g with m(t) the Frobenius dual of mu(g(t).x),
// embedded Runge-Kutta with step rejection whenever |mu| increases.
FlowTrace kempf_ness_flow(const Scene& scene, const CVec& x, const FlowParams& params = {},
                          const Tolerances& tol = {});

// Columns: t, mu_norm, distance.
void write_flow_csv(std::ostream& os, const FlowTrace& trace);

// --------------------------------------------------------------------------

// True when some compact-group element carries x1 onto x2 within tol_dist
// (scene distance).  Exact alignment for sphere tuples, multistart search on
// the group otherwise.
bool korbit_equal(const Scene& scene, const CVec& x1, const CVec& x2, double tol_dist, Rng& rng,
                  const Tolerances& tol = {});

struct WitnessCheck {
  bool ok = false;
  std::string failed;  // empty, or the first failing condition
  std::optional<CMat> connecting;
};

// Verifies the polystability witness pair: both weights vanish and the two
// boundary directions are joined by a geodesic; on success attempts to attach
// the connecting group element.
WitnessCheck polystable_witness_check(const Scene& scene, const CVec& x, const SkewHermitian& s,
                                      const SkewHermitian& u, const Tolerances& tol = {});

}  // namespace knstab
