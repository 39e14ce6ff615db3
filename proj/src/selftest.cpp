#include "knstab/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "knstab/scene_io.hpp"

namespace knstab {

bool SelftestReport::all_pass() const {
  for (const CheckResult& c : checks)
    if (!c.pass) return false;
  return true;
}

namespace {

struct Harness {
  SelftestReport& report;
  Rng& rng;
  const Tolerances& tol;

  // body returns an empty string on success, a failure detail otherwise.
  void check(const std::string& name, const std::function<std::string()>& body) {
    CheckResult r;
    r.name = name;
    try {
      r.detail = body();
      r.pass = r.detail.empty();
    } catch (const Error& e) {
      r.pass = false;
      r.detail = std::string("unexpected error: ") + e.what();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("unexpected exception: ") + e.what();
    }
    report.checks.push_back(std::move(r));
  }
};

std::string numfail(const std::string& what, double got, double bound) {
  std::ostringstream os;
  os << what << ": " << got << " exceeds " << bound;
  return os.str();
}

std::vector<Scene> test_scenes() {
  return {make_sphere_scene(4), make_torus_scene({{1}, {-1}}, SceneKind::Projective),
          make_sym2_scene(true), make_flat_defining_scene()};
}

// The four-point sphere states used throughout: four pairwise distinct
// points, a doubled point with two singles, and two doubled points.
struct SphereStates {
  Scene scene = make_sphere_scene(4);
  Eigen::Vector3d p1{1.0 / std::sqrt(14.0), 2.0 / std::sqrt(14.0), 3.0 / std::sqrt(14.0)};
  Eigen::Vector3d p2, p3, p4;
  CVec distinct, one_double, two_doubles;
  SphereStates() {
    p2 = Eigen::Vector3d(-0.8, 0.1, 0.5).normalized();
    p3 = Eigen::Vector3d(0.3, -0.9, 0.2).normalized();
    p4 = Eigen::Vector3d(-0.2, 0.4, -0.9).normalized();
    distinct = sphere_state({p1, p2, p3, p4});
    one_double = sphere_state({p1, p1, p2, p3});
    two_doubles = sphere_state({p1, p1, p2, p2});
  }
};

// J applied to a chart tangent vector.
CVec apply_complex_structure(const Scene& scene, const CVec& x, const CVec& v) {
  if (scene.kind != SceneKind::SphereTuple) return CVec(Complex(0, 1) * v);
  CVec out(v.size());
  for (int i = 0; i < scene.tuple_len; ++i) {
    Eigen::Vector3d xi = sphere_point(scene, x, i);
    Eigen::Vector3d vi;
    for (int a = 0; a < 3; ++a) vi[a] = v[3 * i + a].real();
    Eigen::Vector3d ji = xi.cross(vi);
    for (int a = 0; a < 3; ++a) out[3 * i + a] = ji[a];
  }
  return out;
}

// Chart difference quotient of t -> exp(i t s).x at t = 0.
CVec flow_velocity(const Scene& scene, const SkewHermitian& s, const CVec& x, double h) {
  CVec plus = act_flow(scene, s, h, x);
  CVec minus = act_flow(scene, s, -h, x);
  if (scene.kind != SceneKind::SphereTuple) {
    // Fix the representative phase against x before differencing.
    if (scene.kind == SceneKind::Projective) {
      Complex ap = x.dot(plus), am = x.dot(minus);
      if (std::abs(ap) > 1e-12) plus *= std::abs(ap) / ap;
      if (std::abs(am) > 1e-12) minus *= std::abs(am) / am;
    }
    return CVec((plus - minus) / (2.0 * h));
  }
  CVec out(3 * scene.tuple_len);
  for (int i = 0; i < scene.tuple_len; ++i) {
    Eigen::Vector3d d =
        (sphere_point(scene, plus, i) - sphere_point(scene, minus, i)) / (2.0 * h);
    for (int a = 0; a < 3; ++a) out[3 * i + a] = d[a];
  }
  return out;
}

}  // namespace

SelftestReport run_selftest(SelftestLevel level, std::uint64_t seed, const Tolerances& tol) {
  SelftestReport report;
  report.level = level;
  report.seed = seed;
  Rng rng(seed);
  Harness h{report, rng, tol};

  h.check("spectral-reconstruction", [&]() -> std::string {
    for (int n : {2, 4, 6}) {
      for (int rep = 0; rep < 3; ++rep) {
        CMat a = randn_complex(rng, n, n);
        CMat herm = a + a.adjoint();
        SpectralData sd = herm_eig(herm, -1.0, tol);
        CMat rebuilt = sd.basis * sd.raw_values.asDiagonal() * sd.basis.adjoint();
        double err = (rebuilt - herm).norm() / std::max(1.0, herm.norm());
        if (err > 1e-12) return numfail("reconstruction residual", err, 1e-12);
        double ortho = (sd.basis.adjoint() * sd.basis - CMat::Identity(n, n)).norm();
        if (ortho > 1e-12) return numfail("eigenbasis orthonormality", ortho, 1e-12);
      }
    }
    return "";
  });

  h.check("polar-factorization", [&]() -> std::string {
    for (int n : {2, 3, 4}) {
      for (int rep = 0; rep < 3; ++rep) {
        CMat g = random_group_element(rng, n);
        CartanPair cp = polar_cartan(g, tol);
        CMat back = cp.k * mat_exp(Complex(0, 1) * cp.u.mat());
        double err = (back - g).norm() / g.norm();
        if (err > 1e-9) return numfail("polar residual", err, 1e-9);
        double uni = (cp.k.adjoint() * cp.k - CMat::Identity(n, n)).norm();
        if (uni > 1e-10) return numfail("compact factor unitarity", uni, 1e-10);
      }
    }
    return "";
  });

  h.check("exp-log-roundtrip", [&]() -> std::string {
    for (int n : {2, 3, 4}) {
      CMat k = haar_unitary(rng, n);
      CMat back = mat_exp(unitary_log(k, tol));
      double err = (back - k).norm();
      if (err > 1e-9) return numfail("exp(log(k)) residual", err, 1e-9);
    }
    return "";
  });

  h.check("distance-right-invariance", [&]() -> std::string {
    for (int rep = 0; rep < 3; ++rep) {
      CMat g = random_group_element(rng, 3), f = random_group_element(rng, 3);
      CMat w = random_group_element(rng, 3);
      double d1 = distance(g, w, tol);
      double d2 = distance(g * f, w * f, tol);
      if (std::abs(d1 - d2) > 1e-8 * (1.0 + d1))
        return numfail("invariance defect", std::abs(d1 - d2), 1e-8 * (1.0 + d1));
    }
    return "";
  });

  h.check("boundary-action-consistency", [&]() -> std::string {
    for (int rep = 0; rep < 2; ++rep) {
      BoundaryPoint s(random_unit_skew(rng, 3), tol);
      CMat g = random_group_element(rng, 3, 1e2);
      BoundaryPoint alg = boundary_action(s, g, tol);
      SkewHermitian lim = boundary_action_extrapolated(s, g, {25.0, 50.0, 100.0}, tol);
      double gap = (alg.mat() - lim.mat()).norm();
      if (gap > 1e-3) return numfail("algebraic vs limit gap", gap, 1e-3);
      RVec sa = herm_eig(CMat(Complex(0, 1) * s.mat()), -1.0, tol).raw_values;
      RVec sb = herm_eig(CMat(Complex(0, 1) * alg.mat()), -1.0, tol).raw_values;
      double spec = (sa - sb).norm();
      if (spec > 1e-8) return numfail("spectrum drift", spec, 1e-8);
    }
    return "";
  });

  h.check("opposedness-basics", [&]() -> std::string {
    CMat s1(2, 2), s2(2, 2);
    s1 << Complex(0, 0), Complex(0, 1), Complex(0, 1), Complex(0, 0);
    s2 << Complex(0, 1), Complex(0, 0), Complex(0, 0), Complex(0, -1);
    SkewHermitian u(s1 / std::sqrt(2.0)), v(s2 / std::sqrt(2.0));
    if (!opposed(u, SkewHermitian(CMat(-u.mat())), true, tol).opposed)
      return "antipodal su(2) directions must be opposed";
    if (!opposed(u, v, true, tol).opposed)
      return "distinct su(2) directions must be opposed";
    if (opposed(u, u, true, tol).opposed) return "a direction must not oppose itself";
    CMat d1 = CMat::Zero(3, 3), d2 = CMat::Zero(3, 3);
    d1(0, 0) = Complex(0, 1);
    d2(1, 1) = Complex(0, -1);
    if (opposed(SkewHermitian(d1), SkewHermitian(d2), true, tol).opposed)
      return "misaligned diagonal directions must not be opposed";
    if (!opposed(SkewHermitian(d1), SkewHermitian(CMat(-d1)), true, tol).opposed)
      return "antipodal diagonal directions must be opposed";
    return "";
  });

  h.check("scene-validation", [&]() -> std::string {
    for (const Scene& scene : test_scenes()) validate_scene(scene, tol);
    validate_scene(make_sym2_scene(false), tol);
    validate_scene(make_torus_scene({{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {0, 0}},
                                    SceneKind::Projective),
                   tol);
    return "";
  });

  h.check("parser-diagnostics", [&]() -> std::string {
    Scene s = parse_scene_text("scene v1\nkind projective\nweights [[1],[-1]]\n"
                               "point z [[1,0],[1,0]]\n",
                               "<selftest>");
    if (!s.torus || s.rep_dim != 2) return "torus scene round-trip failed";
    try {
      parse_scene_text("scene v2\n", "<selftest>");
      return "version check not enforced";
    } catch (const Error& e) {
      if (e.code() != Err::ParseError) return "wrong error class for bad header";
    }
    try {
      parse_scene_text("scene v1\nkind projective\nn 2\nN 2\n"
                       "kbasis [[[[0,0],[0,0]],[[0,0],[1,0]]]]\n"
                       "rep [[[[0,1],[0,0]],[[0,0],[0,-1]]]]\n",
                       "<selftest>");
      return "skew-Hermitian generator check not enforced";
    } catch (const Error& e) {
      if (e.code() != Err::ValidationError) return "wrong error class for bad generator";
      if (std::string(e.what()).find("generator 0") == std::string::npos)
        return "generator diagnostics must name the generator";
    }
    return "";
  });

  h.check("moment-equivariance", [&]() -> std::string {
    for (const Scene& scene : test_scenes()) {
      for (int rep = 0; rep < 3; ++rep) {
        CVec x = random_state(scene, rng);
        SkewHermitian w = random_k_direction(scene, rng);
        CMat kmat = mat_exp(w.mat());
        SkewHermitian lhs = moment(scene, act_k(scene, w, x, tol));
        CMat rhs = kmat * moment(scene, x).mat() * kmat.adjoint();
        double err = (lhs.mat() - rhs).norm();
        if (err > 1e-9 * (1.0 + rhs.norm()))
          return scene.name + ": " + numfail("equivariance defect", err, 1e-9);
      }
    }
    return "";
  });

  h.check("holomorphy-shadow", [&]() -> std::string {
    for (const Scene& scene : test_scenes()) {
      for (int rep = 0; rep < 2; ++rep) {
        CVec x = random_state(scene, rng);
        SkewHermitian s = random_k_direction(scene, rng);
        CVec numeric = flow_velocity(scene, s, x, 1e-6);
        CVec analytic = apply_complex_structure(scene, x, inf_action(scene, s, x, tol).vec);
        double err = (numeric - analytic).norm();
        if (err > 1e-5 * (1.0 + analytic.norm()))
          return scene.name + ": " + numfail("J xi_s vs velocity of exp(its)", err, 1e-5);
      }
    }
    return "";
  });

  h.check("gradient-slope", [&]() -> std::string {
    for (const Scene& scene : test_scenes()) {
      for (int rep = 0; rep < 2; ++rep) {
        CVec x = random_state(scene, rng);
        SkewHermitian s = random_k_direction(scene, rng);
        const double t0 = 0.7, dt = 1e-4;
        double slope =
            (lambda_t(scene, x, s, t0 + dt, tol) - lambda_t(scene, x, s, t0 - dt, tol)) /
            (2.0 * dt);
        CVec xt = act_flow(scene, s, t0, x, tol);
        double speed = inf_action(scene, s, xt, tol).norm;
        double err = std::abs(slope - speed * speed);
        if (err > 1e-5 * (1.0 + speed * speed))
          return scene.name + ": " + numfail("slope vs |xi|^2", err, 1e-5);
      }
    }
    return "";
  });

  h.check("weight-monotonicity", [&]() -> std::string {
    if (!(tol.mono > 0.0))
      return "monotonicity slack must be positive: exact monotonicity is unattainable in "
             "floating point";
    int worst_count = 0;
    double worst = 0.0;
    for (const Scene& scene : test_scenes()) {
      for (int rep = 0; rep < 3; ++rep) {
        CVec x = random_state(scene, rng);
        SkewHermitian s = random_k_direction(scene, rng);
        double prev = lambda_t(scene, x, s, 0.0, tol);
        for (int i = 1; i <= 64; ++i) {
          double t = 40.0 * i / 64.0;
          double cur;
          try {
            cur = lambda_t(scene, x, s, t, tol);
          } catch (const Error& e) {
            if (e.code() == Err::Overflow) break;  // divergent flat regime
            throw;
          }
          double slack = tol.mono * std::max(1.0, std::abs(prev));
          if (cur < prev - slack) {
            ++worst_count;
            worst = std::max(worst, prev - cur);
          }
          prev = cur;
        }
      }
    }
    if (worst_count > 0)
      return numfail("monotonicity violations (" + std::to_string(worst_count) + " samples)",
                     worst, tol.mono);
    return "";
  });

  h.check("max-weight-agreement", [&]() -> std::string {
    SphereStates st;
    for (const CVec* x : {&st.distinct, &st.one_double, &st.two_doubles}) {
      for (int rep = 0; rep < 2; ++rep) {
        SkewHermitian s = random_k_direction(st.scene, rng);
        ExtendedReal a = max_weight(st.scene, *x, s, tol);
        ExtendedReal n = max_weight_numeric(st.scene, *x, s, {10.0, 20.0, 40.0}, tol);
        if (a.finite != n.finite) return "sphere: analytic and ray weights disagree on finiteness";
        double err = std::abs(a.value - n.value);
        if (err > tol.bw_agree * (1.0 + std::abs(a.value)))
          return numfail("sphere analytic vs ray weight", err, tol.bw_agree);
      }
    }
    Scene torus = make_torus_scene({{1}, {-1}}, SceneKind::Projective);
    CVec z(2);
    z << Complex(1, 0), Complex(1, 0);
    z = normalize_state(torus, z);
    RVec plus(1);
    plus << 1.0;
    ExtendedReal top = max_weight(torus, z, coords_to_k(torus, plus), tol);
    if (!top.finite || std::abs(top.value - 1.0) > 1e-12)
      return "torus {+1,-1}: weight along the positive generator must be 1";
    return "";
  });

  h.check("cocycle-identity", [&]() -> std::string {
    for (const Scene& scene : test_scenes()) {
      CVec x = random_state(scene, rng);
      SkewHermitian a = random_k_direction(scene, rng), b = random_k_direction(scene, rng);
      CMat g = mat_exp(CMat(Complex(0, 1) * a.mat() * 0.7));
      CMat hh = mat_exp(CMat(Complex(0, 1) * b.mat() * 0.5)) *
                mat_exp(CMat(random_k_direction(scene, rng).mat() * 0.4));
      IntegralValue i1 = kn_integral(scene, x, g, tol);
      IntegralValue i2 = kn_integral(scene, act(scene, g, x, tol), hh, tol);
      IntegralValue i3 = kn_integral(scene, x, hh * g, tol);
      double scale = 1.0 + std::max({std::abs(i1.value), std::abs(i2.value), std::abs(i3.value)});
      double defect = std::abs(i1.value + i2.value - i3.value);
      if (defect > 2e-8 * scale + 2.0 * (i1.error + i2.error + i3.error))
        return scene.name + ": " + numfail("cocycle defect", defect, 2e-8 * scale);
    }
    return "";
  });

  h.check("classify-example-verdicts", [&]() -> std::string {
    SphereStates st;
    StabilityResult a = classify_sampling(st.scene, st.distinct, 4000, rng, tol);
    if (a.verdict != Verdict::Stable)
      return "four distinct points: expected Stable, got " + to_string(a.verdict);
    if (std::abs(a.min_weight - 0.5) > 1e-6)
      return numfail("four distinct points: min weight vs 1/2", std::abs(a.min_weight - 0.5), 1e-6);
    StabilityResult b = classify_sampling(st.scene, st.one_double, 4000, rng, tol);
    if (b.verdict != Verdict::NonnegativeNotPolystable)
      return "doubled point: expected NonnegativeNotPolystable, got " + to_string(b.verdict);
    StabilityResult c = classify_sampling(st.scene, st.two_doubles, 4000, rng, tol);
    if (c.verdict != Verdict::Polystable)
      return "two doubled points: expected Polystable, got " + to_string(c.verdict);
    if (c.pairs.empty()) return "two doubled points: no zero pairs reported";
    return "";
  });

  h.check("torus-exact-vs-sampling", [&]() -> std::string {
    std::uniform_int_distribution<int> dist_d(1, 2), dist_n(2, 4), dist_w(-3, 3);
    for (int rep = 0; rep < 3; ++rep) {
      int d = dist_d(rng), nw = dist_n(rng);
      std::vector<std::vector<long long>> w(nw, std::vector<long long>(d));
      for (auto& row : w)
        for (auto& e : row) e = dist_w(rng);
      Scene scene = make_torus_scene(w, SceneKind::Projective);
      CVec z = random_state(scene, rng);
      StabilityResult exact = classify_torus_point(scene, z, tol);
      StabilityResult sampled = classify_sampling(scene, z, 20000, rng, tol);
      if (exact.verdict != sampled.verdict)
        return "exact " + to_string(exact.verdict) + " vs sampled " + to_string(sampled.verdict);
    }
    return "";
  });

  h.check("flow-zero-start", [&]() -> std::string {
    Scene scene = make_sphere_scene(4);
    double r = 1.0 / std::sqrt(3.0);
    CVec x = sphere_state({{r, r, r}, {r, -r, -r}, {-r, r, -r}, {-r, -r, r}});
    FlowTrace tr = kempf_ness_flow(scene, x, {}, tol);
    if (tr.outcome != FlowOutcome::ConvergedInOrbit)
      return "balanced start: expected ConvergedInOrbit, got " + to_string(tr.outcome);
    if ((tr.g_final - CMat::Identity(2, 2)).norm() > 1e-12)
      return "balanced start must not move the group element";
    return "";
  });

  if (level == SelftestLevel::Quick) return report;

  h.check("growth-bounds", [&]() -> std::string {
    for (const Scene& scene : test_scenes()) {
      GrowthReport gr = check_growth_bounds(scene, 200, rng, tol);
      if (gr.samples != 200) return scene.name + ": sample count mismatch";
    }
    return "";
  });

  h.check("weight-equivariance", [&]() -> std::string {
    for (const Scene& scene : test_scenes()) {
      for (int rep = 0; rep < 3; ++rep) {
        CVec x = random_state(scene, rng);
        SkewHermitian s = random_k_direction(scene, rng);
        CMat g = mat_exp(CMat(random_k_direction(scene, rng).mat() * 0.6)) *
                 mat_exp(CMat(Complex(0, 1) * random_k_direction(scene, rng).mat() * 0.8));
        BoundaryPoint moved = boundary_action(BoundaryPoint(s, tol), g, tol);
        double res = 0.0;
        RVec c = k_to_coords(scene, moved.dir(), &res);
        if (res > 1e-7) continue;  // moved direction left the scene algebra
        ExtendedReal lhs = max_weight(scene, act(scene, g, x, tol), s, tol);
        ExtendedReal rhs = max_weight(scene, x, moved.dir(), tol);
        if (lhs.finite != rhs.finite) return scene.name + ": equivariance finiteness mismatch";
        if (lhs.finite && std::abs(lhs.value - rhs.value) > 1e-5)
          return scene.name + ": " + numfail("weight equivariance defect",
                                             std::abs(lhs.value - rhs.value), 1e-5);
      }
    }
    return "";
  });

  h.check("boundary-weight-modes", [&]() -> std::string {
    SphereStates st;
    RVec down = -st.p1;
    ExtendedReal zero =
        boundary_weight(st.scene, st.two_doubles,
                        BoundaryPoint(coords_to_k(st.scene, down), tol),
                        BoundaryWeightMode::Both, tol);
    if (!zero.finite || std::abs(zero.value) > tol.zero_band)
      return "doubled-point direction must carry weight 0 in both modes";
    for (int rep = 0; rep < 2; ++rep) {
      SkewHermitian s = random_k_direction(st.scene, rng);
      boundary_weight(st.scene, st.distinct, BoundaryPoint(s, tol), BoundaryWeightMode::Both,
                      tol);
    }
    Scene sym2 = make_sym2_scene(true);
    CVec x = random_state(sym2, rng);
    boundary_weight(sym2, x, BoundaryPoint(random_k_direction(sym2, rng), tol),
                    BoundaryWeightMode::Both, tol);
    return "";
  });

  h.check("kn-compact-invariance", [&]() -> std::string {
    for (const Scene& scene : test_scenes()) {
      CVec x = random_state(scene, rng);
      CMat g = mat_exp(CMat(Complex(0, 1) * random_k_direction(scene, rng).mat() * 0.8));
      CMat kmat = mat_exp(CMat(random_k_direction(scene, rng).mat()));
      IntegralValue a = kn_integral(scene, x, g, tol);
      IntegralValue b = kn_integral(scene, x, kmat * g, tol);
      double defect = std::abs(a.value - b.value);
      if (defect > 1e-7 * (1.0 + std::abs(a.value)) + 2.0 * (a.error + b.error))
        return scene.name + ": " + numfail("compact-factor invariance defect", defect, 1e-7);
    }
    return "";
  });

  h.check("flow-behaviour", [&]() -> std::string {
    SphereStates st;
    FlowTrace good = kempf_ness_flow(st.scene, st.two_doubles, {}, tol);
    if (good.outcome != FlowOutcome::ConvergedInOrbit)
      return "two doubled points: expected ConvergedInOrbit, got " + to_string(good.outcome) +
             " (" + good.note + ")";
    for (Eigen::Index i = 1; i < good.mu_norms.size(); ++i)
      if (good.mu_norms[i] > good.mu_norms[i - 1] * (1.0 + 1e-9) + 1e-12)
        return "moment norm increased along the descent";
    FlowTrace bad = kempf_ness_flow(st.scene, st.one_double, {}, tol);
    if (bad.outcome == FlowOutcome::ConvergedInOrbit)
      return "doubled point with singles: flow must not converge inside the orbit";
    if (bad.outcome == FlowOutcome::BudgetExhausted)
      return "doubled point with singles: flow budget exhausted before a verdict";
    return "";
  });

  h.check("opposedness-density", [&]() -> std::string {
    SkewHermitian u = random_unit_skew(rng, 3);
    int hits = 0;
    const int trials = 100;
    for (int i = 0; i < trials; ++i) {
      CMat k = haar_unitary(rng, 3);
      SkewHermitian v(CMat(-(k * u.mat() * k.adjoint())));
      if (opposed(u, v, true, tol).opposed) ++hits;
    }
    if (hits < 95) return numfail("opposed fraction", hits / 100.0, 0.95);
    return "";
  });

  h.check("connect-contract", [&]() -> std::string {
    for (int n : {2, 3}) {
      for (int rep = 0; rep < 3; ++rep) {
        SkewHermitian u = random_unit_skew(rng, n);
        CMat k = haar_unitary(rng, n);
        SkewHermitian v(CMat(-(k * u.mat() * k.adjoint())));
        if (!opposed(u, v, true, tol).opposed) continue;
        BoundaryPoint eu(u, tol), ev(v, tol);
        CMat conn = connect_geodesic(eu, ev, tol);
        if (!parabolic_contains(eu.dir(), conn, tol.connect, tol))
          return "connector must lie in the forward parabolic";
        double defect = (boundary_action(ev, conn, tol).mat() + eu.mat()).norm();
        if (defect > 1e-6) return numfail("connector action defect", defect, 1e-6);
      }
    }
    return "";
  });

  return report;
}

}  // namespace knstab
