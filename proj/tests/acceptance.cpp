// End-to-end acceptance gate.  Each numbered check prints exactly one
// PASS/FAIL line with a short statistic; the exit code is the number of
// failed checks.  All tolerances are pinned here, next to their checks.
#include "knstab/scene_io.hpp"
#include "knstab/selftest.hpp"
#include "knstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <string>
#include <vector>

using namespace knstab;

namespace {

const Complex kI(0.0, 1.0);

struct Gate {
  int failures = 0;

  void report(int idx, bool ok, const std::string& what, const std::string& stat) {
    std::printf("[%2d] %s %s%s%s\n", idx, ok ? "PASS" : "FAIL", what.c_str(),
                stat.empty() ? "" : " -- ", stat.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

RVec coords(std::initializer_list<double> vals) {
  RVec c(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double v : vals) c[i++] = v;
  return c;
}

struct SphereStates {
  Scene scene = make_sphere_scene(4);
  Eigen::Vector3d p1{1.0, 2.0, 3.0};
  Eigen::Vector3d p2{-0.8, 0.1, 0.5};
  Eigen::Vector3d p3{0.3, -0.9, 0.2};
  Eigen::Vector3d p4{-0.2, 0.4, -0.9};
  CVec distinct, one_double, two_doubles;

  SphereStates() {
    p1.normalize();
    p2.normalize();
    p3.normalize();
    p4.normalize();
    distinct = sphere_state({p1, p2, p3, p4});
    one_double = sphere_state({p1, p1, p2, p3});
    two_doubles = sphere_state({p1, p1, p2, p2});
  }

  SkewHermitian axis(const Eigen::Vector3d& a) const {
    Eigen::Vector3d u = a.normalized();
    return coords_to_k(scene, coords({u[0], u[1], u[2]}));
  }
};

// Group element of the scene's complexified group, built from its generators.
CMat scene_group_element(const Scene& scene, Rng& rng, double compact_scale,
                         double stretch_scale) {
  CMat w = (compact_scale * random_k_direction(scene, rng).mat()).eval();
  CMat u = (stretch_scale * random_k_direction(scene, rng).mat()).eval();
  return mat_exp(w) * mat_exp(CMat((kI * u).eval()));
}

double min_eigengap(const SkewHermitian& s) {
  RVec ev = herm_eig(CMat((kI * s.mat()).eval())).raw_values;
  double gap = 1e300;
  for (int i = 0; i + 1 < ev.size(); ++i) gap = std::min(gap, ev[i + 1] - ev[i]);
  return gap;
}

// ---------------------------------------------------------------------------

void criterion_sphere_verdicts(Gate& gate) {
  const double kDirTol = 1e-3;  // match between found zero directions and axes
  SphereStates st;
  bool ok = true;
  std::string detail;

  Rng r1(11);
  StabilityResult rs = classify_sampling(st.scene, st.distinct, 30000, r1);
  ok = ok && rs.verdict == Verdict::Stable;

  Rng r2(12);
  StabilityResult rn = classify_sampling(st.scene, st.one_double, 30000, r2);
  ok = ok && rn.verdict == Verdict::NonnegativeNotPolystable;

  Rng r3(13);
  StabilityResult rp = classify_sampling(st.scene, st.two_doubles, 30000, r3);
  ok = ok && rp.verdict == Verdict::Polystable && !rp.pairs.empty();
  if (ok) {
    const ZeroPair& pair = rp.pairs.front();
    Eigen::Vector3d a{pair.s_coords[0], pair.s_coords[1], pair.s_coords[2]};
    Eigen::Vector3d b{pair.u_coords[0], pair.u_coords[1], pair.u_coords[2]};
    a.normalize();
    b.normalize();
    double direct = std::max((a + st.p1).norm(), (b + st.p2).norm());
    double swapped = std::max((a + st.p2).norm(), (b + st.p1).norm());
    double mismatch = std::min(direct, swapped);
    bool cert_ok = pair.cert.has_value() && pair.cert->min_singular > 0.0;
    ok = ok && mismatch <= kDirTol && cert_ok;
    detail = "pair mismatch " + num(mismatch) +
             (cert_ok ? ", certificate attached" : ", certificate missing");
  }
  gate.report(1, ok, "four-point sphere verdicts with the doubled-pair witness", detail);
}

void criterion_boundary_oracle(Gate& gate) {
  const double kAgree = 1e-3;   // action vs extrapolated finite-time logarithm
  const double kSpec = 1e-8;    // spectrum preservation
  const double kGapFloor = 0.25;  // drawn directions resolve at tau <= 100
  Rng rng(21);
  int done = 0;
  double worst_agree = 0.0, worst_spec = 0.0;
  bool ok = true;
  while (done < 50) {
    SkewHermitian s = random_unit_skew(rng, 3);
    if (min_eigengap(s) < kGapFloor) continue;
    CMat g = random_group_element(rng, 3, 1e3);
    BoundaryPoint e(s);
    BoundaryPoint eg = boundary_action(e, g);
    SkewHermitian lim = boundary_action_extrapolated(e, g);
    worst_agree = std::max(worst_agree, (eg.mat() - lim.mat()).norm());
    RVec before = herm_eig(CMat((kI * e.mat()).eval())).raw_values;
    RVec after = herm_eig(CMat((kI * eg.mat()).eval())).raw_values;
    worst_spec = std::max(worst_spec, (before - after).norm());
    ++done;
  }
  ok = worst_agree <= kAgree && worst_spec <= kSpec;
  gate.report(2, ok, "boundary action matches the logarithm oracle on 50 seeded pairs",
              "worst defect " + num(worst_agree) + ", worst spectrum drift " + num(worst_spec));
}

void criterion_cocycle(Gate& gate) {
  Tolerances tight;
  tight.quad_rel = 1e-10;  // quadrature well below the acceptance budget
  SphereStates st;
  std::vector<Scene> scenes = {st.scene, make_sym2_scene(true),
                               make_torus_scene({{1}, {-1}}, SceneKind::Projective),
                               make_flat_defining_scene()};
  Rng rng(31);
  double worst_ratio = 0.0;
  bool ok = true;
  for (const Scene& scene : scenes) {
    for (int trial = 0; trial < 50; ++trial) {
      CVec x = random_state(scene, rng);
      CMat g = scene_group_element(scene, rng, 0.8, 0.6);
      CMat h = scene_group_element(scene, rng, 0.8, 0.5);
      IntegralValue pg = kn_integral(scene, x, g, tight);
      IntegralValue ph = kn_integral(scene, act(scene, g, x), h, tight);
      IntegralValue phg = kn_integral(scene, x, CMat(h * g), tight);
      double scale = std::max({std::abs(pg.value), std::abs(ph.value), std::abs(phg.value)});
      double budget = 2.0 * 1e-8 * (1.0 + scale);
      double defect = std::abs(pg.value + ph.value - phg.value);
      worst_ratio = std::max(worst_ratio, defect / budget);
      ok = ok && defect <= budget;
    }
  }
  gate.report(3, ok, "group-integral cocycle holds for 50 seeded triples per scene",
              "worst defect at " + num(100.0 * worst_ratio) + "% of budget");
}

void criterion_weight_equivariance(Gate& gate) {
  const double kTol = 1e-5;
  SphereStates st;
  Scene sym = make_sym2_scene(true);
  Scene sq = make_torus_scene({{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {0, 0}},
                              SceneKind::Projective);
  Rng rng(41);
  double worst = 0.0;
  int done = 0;
  bool ok = true;
  for (const Scene& scene : {st.scene, sym, sq}) {
    for (int trial = 0; trial < 10; ++trial) {
      CVec x = random_state(scene, rng);
      SkewHermitian s = random_k_direction(scene, rng);
      CMat g = scene_group_element(scene, rng, 0.7, 0.6);
      BoundaryPoint moved = boundary_action(BoundaryPoint(s), g);
      double residual = 0.0;
      k_to_coords(scene, moved.dir(), &residual);
      if (residual > 1e-7) {
        ok = false;  // the action must stay inside the symmetry algebra here
        continue;
      }
      ExtendedReal lhs = max_weight(scene, act(scene, g, x), s);
      ExtendedReal rhs = max_weight(scene, x, moved.dir());
      if (!lhs.finite || !rhs.finite) {
        ok = false;
        continue;
      }
      worst = std::max(worst, std::abs(lhs.value - rhs.value));
      ++done;
    }
  }
  ok = ok && done == 30 && worst <= kTol;
  gate.report(4, ok, "maximal weights are equivariant on 30 seeded configurations",
              "worst defect " + num(worst));
}

void criterion_monotone_curves(Gate& gate) {
  const double kMono = 1e-9;  // per-step slack
  SphereStates st;
  std::vector<std::pair<Scene, double>> suite = {
      {st.scene, 40.0},
      {make_sym2_scene(true), 40.0},
      {make_torus_scene({{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {0, 0}}, SceneKind::Projective),
       40.0},
      {make_flat_defining_scene(), 10.0}};  // flat values stay in double range
  Rng rng(51);
  long curves = 0;
  double worst_drop = 0.0;
  bool ok = true;
  for (const auto& [scene, t1] : suite) {
    for (int trial = 0; trial < 10; ++trial) {
      CVec x = random_state(scene, rng);
      SkewHermitian s = random_k_direction(scene, rng);
      WeightCurve curve = weight_curve(scene, x, s, 0.0, t1, 128);
      for (int i = 0; i + 1 < curve.values.size(); ++i) {
        double drop = curve.values[i] - curve.values[i + 1];
        worst_drop = std::max(worst_drop, drop);
        ok = ok && drop <= kMono;
      }
      ++curves;
    }
  }
  gate.report(5, ok, "all " + std::to_string(curves) + " weight curves are nondecreasing",
              "worst step drop " + num(std::max(worst_drop, 0.0)));
}

void criterion_flow_outcomes(Gate& gate) {
  SphereStates st;
  auto final_mu = [](const FlowTrace& tr) {
    return tr.mu_norms.size() ? tr.mu_norms[tr.mu_norms.size() - 1] : 1e300;
  };
  FlowTrace stable = kempf_ness_flow(st.scene, st.distinct);
  bool ok1 = stable.outcome == FlowOutcome::ConvergedInOrbit && final_mu(stable) <= 1e-8;
  FlowTrace poly = kempf_ness_flow(st.scene, st.two_doubles);
  bool ok2 = poly.outcome == FlowOutcome::ConvergedInOrbit && final_mu(poly) <= 1e-8;
  FlowTrace semi = kempf_ness_flow(st.scene, st.one_double);
  bool ok3 = semi.outcome == FlowOutcome::ConvergedDegenerate ||
             semi.outcome == FlowOutcome::Diverged;
  gate.report(6, ok1 && ok2 && ok3, "descent flow outcomes on the three sphere marks",
              to_string(stable.outcome) + " / " + to_string(poly.outcome) + " / " +
                  to_string(semi.outcome));
}

void criterion_flow_limits_one_orbit(Gate& gate) {
  const double kOrbitTol = 1e-6;
  SphereStates st;
  Rng rng(71);
  std::vector<CVec> limits;
  bool ok = true;
  for (int i = 0; i < 5; ++i) {
    CMat g = random_group_element(rng, 2, 100.0);
    CVec y = act(st.scene, g, st.two_doubles);
    FlowTrace tr = kempf_ness_flow(st.scene, y);
    ok = ok && tr.outcome == FlowOutcome::ConvergedInOrbit;
    limits.push_back(tr.x_final);
  }
  int agreeing = 0, pairs = 0;
  if (ok) {
    for (size_t i = 0; i < limits.size(); ++i) {
      for (size_t j = i + 1; j < limits.size(); ++j) {
        ++pairs;
        if (korbit_equal(st.scene, limits[i], limits[j], kOrbitTol, rng)) ++agreeing;
      }
    }
    ok = agreeing == pairs;
  }
  gate.report(7, ok, "five flow limits of one polystable orbit agree pairwise",
              std::to_string(agreeing) + "/" + std::to_string(pairs) + " pairs matched");
}

void criterion_torus_agreement(Gate& gate) {
  Rng rng(81);
  std::uniform_int_distribution<int> wdist(-3, 3);
  std::uniform_int_distribution<int> ddist(1, 3);
  std::uniform_int_distribution<int> ndist(2, 6);
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  int agree = 0;
  const int kCases = 30;
  for (int c = 0; c < kCases; ++c) {
    int d = ddist(rng), nw = ndist(rng);
    std::vector<std::vector<long long>> w(nw, std::vector<long long>(d));
    for (auto& row : w)
      for (auto& v : row) v = wdist(rng);
    Scene scene = make_torus_scene(w, SceneKind::Projective);
    CVec z = CVec::Zero(nw);
    for (int j = 0; j < nw; ++j)
      if (rng() % 2 == 0) z[j] = mag(rng);
    if (z.norm() < 1e-12) z[0] = 1.0;
    z = normalize_state(scene, z);

    StabilityResult exact = classify_torus_point(scene, z);
    Rng sampler(9000 + c);
    StabilityResult sampled = classify_sampling(scene, z, 40000, sampler);
    if (exact.verdict == sampled.verdict) ++agree;
  }
  gate.report(8, agree == kCases,
              "exact and sampling torus verdicts agree on 30 random scenes",
              std::to_string(agree) + "/" + std::to_string(kCases) + " agreed");
}

void criterion_opposedness(Gate& gate) {
  Rng rng(91);
  bool antipodal_ok = true, symmetric_ok = true;
  for (Eigen::Index n : {2, 3, 4}) {
    for (int trial = 0; trial < 20; ++trial) {
      SkewHermitian u = random_unit_skew(rng, n);
      SkewHermitian v{CMat((-u.mat()).eval())};
      antipodal_ok = antipodal_ok && opposed(u, v).opposed;
      symmetric_ok = symmetric_ok && opposed(u, v).opposed == opposed(v, u).opposed;
    }
  }
  int conjugate_hits = 0;
  const int kTrials = 200;
  for (int trial = 0; trial < kTrials; ++trial) {
    Eigen::Index n = 2 + trial % 3;
    SkewHermitian u = random_unit_skew(rng, n);
    CMat k = haar_unitary(rng, n);
    SkewHermitian v{CMat((-(k * u.mat() * k.adjoint())).eval())};
    OpposednessResult r = opposed(u, v);
    symmetric_ok = symmetric_ok && r.opposed == opposed(v, u).opposed;
    if (r.opposed) ++conjugate_hits;
  }
  bool ok = antipodal_ok && symmetric_ok && conjugate_hits >= 190;
  gate.report(9, ok, "opposedness: antipodes always, conjugates generically, symmetric",
              std::to_string(conjugate_hits) + "/200 conjugate pairs opposed");
}

void criterion_connect(Gate& gate) {
  const double kActTol = 1e-8;
  Rng rng(95);
  int built = 0, wanted = 0;
  double worst = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 200 && wanted < 20; ++trial) {
    // Alternate between su(2) pairs and u(3) pairs.
    Eigen::Index n = (trial % 2 == 0) ? 2 : 3;
    SkewHermitian u = random_unit_skew(rng, n);
    if (n == 2) {
      // Trace out the center so the pair lives in su(2).
      CMat m = u.mat();
      m -= (m.trace() / 2.0) * CMat::Identity(2, 2);
      m /= m.norm();
      u = SkewHermitian(m);
    }
    SkewHermitian v = (trial % 4 < 2)
                          ? SkewHermitian(CMat((-u.mat()).eval()))
                          : [&] {
                              CMat k = haar_unitary(rng, n);
                              return SkewHermitian(CMat((-(k * u.mat() * k.adjoint())).eval()));
                            }();
    if (!opposed(u, v).opposed) continue;  // ensemble keeps drawing until 20 pairs
    ++wanted;
    BoundaryPoint eu(u), ev(v);
    CMat h = connect_geodesic(eu, ev);
    bool member = parabolic_contains(eu.dir(), h);
    double defect = (boundary_action(ev, h).mat() + eu.mat()).norm();
    worst = std::max(worst, defect);
    if (member && defect <= kActTol) ++built;
  }
  ok = wanted == 20 && built == wanted;
  gate.report(10, ok, "connecting elements satisfy both postconditions on 20 seeded pairs",
              std::to_string(built) + "/" + std::to_string(wanted) + " pairs, worst defect " +
                  num(worst));
}

}  // namespace

int main() {
  std::printf("acceptance v1\n");
  Gate gate;
  auto run = [&gate](int idx, void (*fn)(Gate&)) {
    try {
      fn(gate);
    } catch (const std::exception& e) {
      gate.report(idx, false, "check aborted by exception", e.what());
    }
  };
  run(1, criterion_sphere_verdicts);
  run(2, criterion_boundary_oracle);
  run(3, criterion_cocycle);
  run(4, criterion_weight_equivariance);
  run(5, criterion_monotone_curves);
  run(6, criterion_flow_outcomes);
  run(7, criterion_flow_limits_one_orbit);
  run(8, criterion_torus_agreement);
  run(9, criterion_opposedness);
  run(10, criterion_connect);
  if (gate.failures == 0) {
    std::printf("all 10 checks passed\n");
  } else {
    std::printf("%d of 10 checks failed\n", gate.failures);
  }
  return gate.failures;
}
