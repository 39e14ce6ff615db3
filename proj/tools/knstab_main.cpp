// Batch front end: loads scene files, evaluates weights, curves, stability
// verdicts, descent flows, boundary actions and group integrals, and runs the
// built-in verification suite.  Reports are deterministic given the seed.
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "knstab/scene_io.hpp"
#include "knstab/selftest.hpp"
#include "knstab/stability.hpp"

using namespace knstab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitJobFailure = 1;
constexpr int kExitUsage = 2;

void add_tol_options(CLI::App* cmd, Tolerances& t) {
  cmd->add_option("--tol.sym", t.sym);
  cmd->add_option("--tol.cluster_rel", t.cluster_rel);
  cmd->add_option("--tol.rank_rel", t.rank_rel);
  cmd->add_option("--tol.cond_max", t.cond_max);
  cmd->add_option("--tol.exp_check", t.exp_check);
  cmd->add_option("--tol.supp", t.supp);
  cmd->add_option("--tol.angle", t.angle);
  cmd->add_option("--tol.quad_rel", t.quad_rel);
  cmd->add_option("--tol.mono", t.mono);
  cmd->add_option("--tol.zero_band", t.zero_band);
  cmd->add_option("--tol.bw_agree", t.bw_agree);
  cmd->add_option("--tol.fixed_point", t.fixed_point);
  cmd->add_option("--tol.rep_hom", t.rep_hom);
  cmd->add_option("--tol.para", t.para);
  cmd->add_option("--tol.connect", t.connect);
}

std::string tol_line(const Tolerances& t) {
  std::ostringstream os;
  os << "tolerances sym=" << fmt(t.sym) << " cluster_rel=" << fmt(t.cluster_rel)
     << " rank_rel=" << fmt(t.rank_rel) << " cond_max=" << fmt(t.cond_max)
     << " exp_check=" << fmt(t.exp_check) << " supp=" << fmt(t.supp)
     << " angle=" << fmt(t.angle) << " quad_rel=" << fmt(t.quad_rel) << " mono=" << fmt(t.mono)
     << " zero_band=" << fmt(t.zero_band) << " bw_agree=" << fmt(t.bw_agree)
     << " fixed_point=" << fmt(t.fixed_point) << " rep_hom=" << fmt(t.rep_hom)
     << " para=" << fmt(t.para) << " connect=" << fmt(t.connect);
  return os.str();
}

// Common state shared by the subcommands; the report is a line buffer so a
// failing job can still flush everything accumulated so far.
struct Job {
  std::string scene_path;
  std::string out_path;
  std::uint64_t seed = 12345;
  Tolerances tol;
  std::ostringstream report;

  void header(const std::string& command) {
    report << "report v1\ncommand " << command << "\n";
    if (!scene_path.empty()) report << "scene " << scene_path << "\n";
    report << "seed " << seed << "\n" << tol_line(tol) << "\n";
  }

  void describe(const Scene& scene) {
    report << "scene_name " << scene.name << "\nscene_kind " << to_string(scene.kind)
           << "\nscene_group_dim " << scene.n << "\nscene_generators " << scene.kdim() << "\n";
  }

  int flush(int code) {
    if (out_path.empty()) {
      std::cout << report.str();
    } else {
      std::ofstream out(out_path);
      if (!out) {
        std::cerr << "cannot open output file " << out_path << "\n";
        return kExitUsage;
      }
      out << report.str();
    }
    return code;
  }
};

void attach_common(CLI::App* cmd, Job& job, bool needs_scene) {
  auto* opt = cmd->add_option("--scene", job.scene_path, "scene file");
  if (needs_scene) opt->required();
  cmd->add_option("--seed", job.seed, "random seed (fixed default keeps reports reproducible)");
  cmd->add_option("--out", job.out_path, "write the report to this file instead of stdout");
  add_tol_options(cmd, job.tol);
}

const CVec& named_point(const Scene& scene, const std::string& name) {
  auto it = scene.points.find(name);
  if (it == scene.points.end())
    fail(Err::ValidationError, "scene has no point named '" + name + "'");
  return it->second;
}

std::string describe_pair(const Scene& scene, const ZeroPair& p, int index) {
  std::ostringstream os;
  os << "pair " << index << " s " << fmt_vec(p.s_coords) << " u " << fmt_vec(p.u_coords);
  if (p.cert) os << " certificate_min_singular " << fmt(p.cert->min_singular);
  (void)scene;
  return os.str();
}

int run_weight(Job& job, const std::string& point, const std::string& dir,
               const std::string& mode_name) {
  Scene scene = parse_scene(job.scene_path);
  job.header("weight");
  job.describe(scene);
  job.report << "point " << point << "\ndirection " << dir << "\nmode " << mode_name << "\n";
  const CVec& x = named_point(scene, point);
  SkewHermitian s = parse_direction(scene, dir);
  BoundaryWeightMode mode = BoundaryWeightMode::Both;
  std::string provenance = "analytic-and-ray-agree";
  if (mode_name == "analytic") {
    mode = BoundaryWeightMode::Analytic;
    provenance = "analytic";
  } else if (mode_name == "ray") {
    mode = BoundaryWeightMode::Ray;
    provenance = "ray-extrapolated";
  } else if (mode_name != "both") {
    fail(Err::ParseError, "mode must be analytic, ray or both");
  }
  ExtendedReal w = boundary_weight(scene, x, BoundaryPoint(s, job.tol), mode, job.tol);
  job.report << "lambda " << to_string(w) << "\nprovenance " << provenance << "\n";
  if (w.finite && std::abs(w.value) <= 10.0 * job.tol.zero_band)
    job.report << "warning weight lies within 10x of the zero band\n";
  return kExitOk;
}

int run_curve(Job& job, const std::string& point, const std::string& dir, double t0, double t1,
              int samples, const std::string& csv_path) {
  Scene scene = parse_scene(job.scene_path);
  job.header("curve");
  job.describe(scene);
  job.report << "point " << point << "\ndirection " << dir << "\nrange " << fmt(t0) << " "
             << fmt(t1) << "\nsamples " << samples << "\n";
  WeightCurve curve =
      weight_curve(scene, named_point(scene, point), parse_direction(scene, dir), t0, t1,
                   samples, job.tol);
  job.report << "terminal_value " << fmt(curve.values[curve.values.size() - 1]) << "\n";
  if (csv_path.empty()) {
    job.report << "csv inline\n";
    std::ostringstream csv;
    write_curve_csv(csv, curve);
    job.report << csv.str();
  } else {
    std::ofstream out(csv_path);
    if (!out) fail(Err::ParseError, "cannot open CSV output " + csv_path);
    write_curve_csv(out, curve);
    job.report << "csv " << csv_path << "\n";
  }
  return kExitOk;
}

int run_classify(Job& job, const std::vector<std::string>& points, long budget,
                 const std::string& method) {
  Scene scene = parse_scene(job.scene_path);
  job.header("classify");
  job.describe(scene);
  job.report << "budget " << budget << "\nmethod " << method << "\njobs " << points.size()
             << "\n";
  std::vector<int> failed;
  for (size_t i = 0; i < points.size(); ++i) {
    // Iteration-local randomness: a point classifies identically alone or in
    // a batch.
    Rng rng(job.seed);
    job.report << "job " << i << " point " << points[i];
    try {
      const CVec& x = named_point(scene, points[i]);
      bool exact = method == "exact" || (method == "auto" && scene.torus &&
                                         scene.kind == SceneKind::Projective);
      if (exact && !scene.torus) fail(Err::NotATorusScene, "exact method needs a torus scene");
      StabilityResult res = exact ? classify_torus_point(scene, x, job.tol)
                                  : classify_sampling(scene, x, budget, rng, job.tol);
      job.report << " method " << (res.exact ? "exact-rational" : "sampled") << " verdict "
                 << to_string(res.verdict) << "\n";
      if (res.verdict == Verdict::Stable)
        job.report << "min_weight " << fmt(res.min_weight) << "\n";
      if (res.witness_coords)
        job.report << "witness " << fmt_vec(*res.witness_coords) << " weight "
                   << fmt(res.witness_weight) << "\n";
      for (size_t pi = 0; pi < res.pairs.size(); ++pi)
        job.report << describe_pair(scene, res.pairs[pi], static_cast<int>(pi)) << "\n";
      if (res.unpaired_zero) job.report << "unpaired_zero " << fmt_vec(*res.unpaired_zero) << "\n";
      if (!res.diagnostics.empty()) job.report << "diagnostics " << res.diagnostics << "\n";
      if (!res.exact) job.report << "evaluations " << res.evaluations << "\n";
      if (!res.exact && res.verdict == Verdict::Stable &&
          res.min_weight <= 10.0 * res.zero_band)
        job.report << "warning stable margin within 10x of the zero band\n";
    } catch (const Error& e) {
      job.report << " error " << e.what() << "\n";
      failed.push_back(static_cast<int>(i));
    }
  }
  job.report << "failures " << failed.size();
  for (int i : failed) job.report << " " << i;
  job.report << "\n";
  return failed.empty() ? kExitOk : kExitJobFailure;
}

int run_flow(Job& job, const std::string& point, FlowParams params, const std::string& csv_path) {
  Scene scene = parse_scene(job.scene_path);
  job.header("flow");
  job.describe(scene);
  job.report << "point " << point << "\nparams t_max=" << fmt(params.t_max)
             << " eps_zero=" << fmt(params.eps_zero) << " eps_div=" << fmt(params.eps_div)
             << " dist_cap=" << fmt(params.dist_cap) << " merge_tol=" << fmt(params.merge_tol)
             << "\n";
  FlowTrace trace = kempf_ness_flow(scene, named_point(scene, point), params, job.tol);
  const Eigen::Index last = trace.times.size() - 1;
  job.report << "outcome " << to_string(trace.outcome) << "\nnote " << trace.note
             << "\nfinal_t " << fmt(trace.times[last]) << "\nfinal_mu "
             << fmt(trace.mu_norms[last]) << "\nfinal_distance " << fmt(trace.distances[last])
             << "\nsamples " << trace.times.size() << "\n";
  job.report << "limit_stabilizer_dim " << stabilizer_dim(scene, trace.x_final, 1e-6, job.tol)
             << "\n";
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) fail(Err::ParseError, "cannot open CSV output " + csv_path);
    write_flow_csv(out, trace);
    job.report << "csv " << csv_path << "\n";
  }
  return kExitOk;
}

int run_boundary_act(Job& job, const std::string& dir, const std::string& group) {
  Scene scene = parse_scene(job.scene_path);
  job.header("boundary-act");
  job.describe(scene);
  job.report << "direction " << dir << "\ngroup " << group << "\n";
  Rng rng(job.seed);
  SkewHermitian s = parse_direction(scene, dir);
  CMat g = parse_group_element(scene, group, rng);
  BoundaryPoint moved = boundary_action(BoundaryPoint(s, job.tol), g, job.tol);
  job.report << "result " << fmt_cmat(moved.mat()) << "\n";
  double res = 0.0;
  RVec coords = k_to_coords(scene, moved.dir(), &res);
  if (res <= 1e-8) job.report << "result_coords " << fmt_vec(coords) << "\n";
  job.report << "parabolic_member " << (parabolic_contains(s, g, -1.0, job.tol) ? "true" : "false")
             << "\n";
  return kExitOk;
}

int run_opposed(Job& job, const std::string& dir1, const std::string& dir2) {
  Scene scene = parse_scene(job.scene_path);
  job.header("opposed");
  job.describe(scene);
  job.report << "direction1 " << dir1 << "\ndirection2 " << dir2 << "\n";
  OpposednessResult res =
      opposed(parse_direction(scene, dir1), parse_direction(scene, dir2), true, job.tol);
  job.report << "opposed " << (res.opposed ? "true" : "false") << "\n";
  if (!res.reason.empty()) job.report << "reason " << res.reason << "\n";
  if (res.cert)
    job.report << "certificate pieces=" << res.cert->pieces.size() << " min_singular="
               << fmt(res.cert->min_singular) << "\n";
  return kExitOk;
}

int run_connect(Job& job, const std::string& dir1, const std::string& dir2) {
  Scene scene = parse_scene(job.scene_path);
  job.header("connect");
  job.describe(scene);
  job.report << "direction1 " << dir1 << "\ndirection2 " << dir2 << "\n";
  SkewHermitian u = parse_direction(scene, dir1), v = parse_direction(scene, dir2);
  BoundaryPoint eu(u, job.tol), ev(v, job.tol);
  CMat conn = connect_geodesic(eu, ev, job.tol);
  job.report << "connector " << fmt_cmat(conn) << "\n";
  double defect = (boundary_action(ev, conn, job.tol).mat() + eu.mat()).norm();
  job.report << "action_defect " << fmt(defect) << "\n";
  return kExitOk;
}

int run_integral(Job& job, const std::string& point, const std::string& group) {
  Scene scene = parse_scene(job.scene_path);
  job.header("integral");
  job.describe(scene);
  job.report << "point " << point << "\ngroup " << group << "\n";
  Rng rng(job.seed);
  CMat g = parse_group_element(scene, group, rng);
  IntegralValue v = kn_integral(scene, named_point(scene, point), g, job.tol);
  job.report << "psi " << fmt(v.value) << "\nquadrature_error " << fmt(v.error) << "\n";
  return kExitOk;
}

int run_selftest_cmd(Job& job, const std::string& level_name) {
  job.header("selftest");
  SelftestLevel level;
  if (level_name == "quick")
    level = SelftestLevel::Quick;
  else if (level_name == "full")
    level = SelftestLevel::Full;
  else
    fail(Err::ParseError, "level must be quick or full");
  job.report << "level " << level_name << "\n";
  SelftestReport rep = run_selftest(level, job.seed, job.tol);
  int passed = 0;
  for (const CheckResult& c : rep.checks) {
    job.report << "check " << c.name << " " << (c.pass ? "PASS" : "FAIL");
    if (!c.detail.empty()) job.report << " " << c.detail;
    job.report << "\n";
    passed += c.pass ? 1 : 0;
  }
  job.report << "result " << (rep.all_pass() ? "PASS" : "FAIL") << " " << passed << "/"
             << rep.checks.size() << "\n";
  return rep.all_pass() ? kExitOk : kExitJobFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moment-map weights, stability verdicts and descent flows on scene files"};
  app.require_subcommand(1);

  Job job;
  std::string point = "x", dir, dir2, group = "identity", mode = "both", method = "auto";
  std::string csv_path, level = "quick";
  std::vector<std::string> points;
  double t0 = 0.0, t1 = 10.0;
  int samples = 64;
  long budget = 20000;
  FlowParams fparams;

  CLI::App* weight = app.add_subcommand("weight", "maximal weight of a boundary direction");
  attach_common(weight, job, true);
  weight->add_option("--point", point, "named scene point")->required();
  weight->add_option("--dir", dir, "direction (coords:[..], axis:[..] or mat:[[..]])")->required();
  weight->add_option("--mode", mode, "analytic | ray | both");

  CLI::App* curve = app.add_subcommand("curve", "weight curve t -> lambda_t as CSV");
  attach_common(curve, job, true);
  curve->add_option("--point", point)->required();
  curve->add_option("--dir", dir)->required();
  curve->add_option("--t0", t0);
  curve->add_option("--t1", t1);
  curve->add_option("--samples", samples)->check(CLI::PositiveNumber);
  curve->add_option("--csv", csv_path, "CSV destination (inline in the report when absent)");

  CLI::App* classify = app.add_subcommand("classify", "stability verdicts for scene points");
  attach_common(classify, job, true);
  classify->add_option("--point", points, "named scene points (batch)")->required();
  classify->add_option("--budget", budget, "weight evaluation budget per point");
  classify->add_option("--method", method, "auto | exact | sampling");

  CLI::App* flow = app.add_subcommand("flow", "moment-map norm descent from a scene point");
  attach_common(flow, job, true);
  flow->add_option("--point", point)->required();
  flow->add_option("--t-max", fparams.t_max);
  flow->add_option("--max-steps", fparams.max_steps);
  flow->add_option("--eps-zero", fparams.eps_zero);
  flow->add_option("--eps-div", fparams.eps_div);
  flow->add_option("--dist-cap", fparams.dist_cap);
  flow->add_option("--merge-tol", fparams.merge_tol);
  flow->add_option("--csv", csv_path, "write the t, mu_norm, distance trace here");

  CLI::App* bact = app.add_subcommand("boundary-act", "push a boundary direction by a group element");
  attach_common(bact, job, true);
  bact->add_option("--dir", dir)->required();
  bact->add_option("--group", group, "identity | random | mat:[[..]]");

  CLI::App* opp = app.add_subcommand("opposed", "test two boundary directions for opposedness");
  attach_common(opp, job, true);
  opp->add_option("--dir1", dir)->required();
  opp->add_option("--dir2", dir2)->required();

  CLI::App* conn = app.add_subcommand("connect", "group element carrying one direction opposite the other");
  attach_common(conn, job, true);
  conn->add_option("--dir1", dir)->required();
  conn->add_option("--dir2", dir2)->required();

  CLI::App* integral = app.add_subcommand("integral", "group primitive of the weight pairing");
  attach_common(integral, job, true);
  integral->add_option("--point", point)->required();
  integral->add_option("--group", group)->required();

  CLI::App* selftest = app.add_subcommand("selftest", "built-in verification suite");
  attach_common(selftest, job, false);
  selftest->add_option("--level", level, "quick | full");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (weight->parsed()) return job.flush(run_weight(job, point, dir, mode));
    if (curve->parsed()) return job.flush(run_curve(job, point, dir, t0, t1, samples, csv_path));
    if (classify->parsed()) return job.flush(run_classify(job, points, budget, method));
    if (flow->parsed()) return job.flush(run_flow(job, point, fparams, csv_path));
    if (bact->parsed()) return job.flush(run_boundary_act(job, dir, group));
    if (opp->parsed()) return job.flush(run_opposed(job, dir, dir2));
    if (conn->parsed()) return job.flush(run_connect(job, dir, dir2));
    if (integral->parsed()) return job.flush(run_integral(job, point, group));
    if (selftest->parsed()) return job.flush(run_selftest_cmd(job, level));
  } catch (const Error& e) {
    job.report << "error " << e.what() << "\n";
    job.flush(0);
    std::cerr << "error: " << e.what() << "\n";
    return (e.code() == Err::ParseError || e.code() == Err::ValidationError) ? kExitUsage
                                                                             : kExitJobFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitJobFailure;
  }
  return kExitUsage;
}
