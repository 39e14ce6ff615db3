// Black-box checks of the command-line binary: spawns it against the shipped
// scene files and inspects exit codes and report contents.
// Usage: cli_driver <path-to-binary> <path-to-data-dir>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _WIN32
#error "the driver relies on POSIX wait status macros"
#endif
#include <sys/wait.h>

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

struct Driver {
  std::string bin;
  std::string data;
  std::filesystem::path tmp;
  int failures = 0;
  int checks = 0;

  Outcome run(const std::string& args) {
    std::filesystem::path outfile = tmp / "out.txt";
    std::string cmd = bin + " " + args + " > " + outfile.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream in(outfile);
    std::stringstream ss;
    ss << in.rdbuf();
    o.out = ss.str();
    return o;
  }

  void expect(bool ok, const std::string& name, const std::string& detail) {
    ++checks;
    if (ok) {
      std::printf("ok %s\n", name.c_str());
    } else {
      ++failures;
      std::printf("FAILED %s\n%s\n", name.c_str(), detail.c_str());
    }
  }

  void expect_contains(const Outcome& o, int code, const std::string& needle,
                       const std::string& name) {
    bool ok = o.code == code && o.out.find(needle) != std::string::npos;
    expect(ok, name,
           "exit code " + std::to_string(o.code) + " (wanted " + std::to_string(code) +
               "), looking for '" + needle + "' in:\n" + o.out);
  }

  std::string scene(const std::string& file) { return "--scene " + data + "/" + file; }
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: cli_driver <binary> <data-dir>\n");
    return 2;
  }
  Driver d;
  d.bin = argv[1];
  d.data = argv[2];
  d.tmp = std::filesystem::temp_directory_path() / "knstab_cli_driver";
  std::filesystem::create_directories(d.tmp);

  // --- classification of the shipped sphere marks ---------------------------
  Outcome o = d.run("classify " + d.scene("sphere4.scene") + " --point x");
  d.expect_contains(o, 0, "verdict Stable", "classify sphere x");

  o = d.run("classify " + d.scene("sphere4.scene") + " --point xp");
  d.expect_contains(o, 0, "verdict NonnegativeNotPolystable", "classify sphere xp");

  o = d.run("classify " + d.scene("sphere4.scene") + " --point xpp");
  d.expect_contains(o, 0, "verdict Polystable", "classify sphere xpp");
  d.expect(o.out.find("pair 0") != std::string::npos, "classify sphere xpp reports a pair", o.out);

  // Batch mode classifies every named point and reports per-job results.
  o = d.run("classify " + d.scene("torus_square.scene") + " --point zS --point zP --point zU --point zN");
  d.expect_contains(o, 0, "failures 0", "classify torus batch");
  for (const char* frag : {"verdict Stable", "verdict Polystable", "verdict Unstable",
                           "verdict NonnegativeNotPolystable"}) {
    d.expect(o.out.find(frag) != std::string::npos,
             std::string("classify torus batch contains '") + frag + "'", o.out);
  }
  d.expect(o.out.find("exact-rational") != std::string::npos, "torus verdicts are exact", o.out);

  o = d.run("classify " + d.scene("flat2.scene") + " --point origin --point e1");
  d.expect_contains(o, 0, "verdict Polystable", "classify flat origin");
  d.expect(o.out.find("verdict NonnegativeNotPolystable") != std::string::npos,
           "classify flat e1", o.out);

  // The symmetric-square scene exercises the sampling classifier on a
  // non-torus projective representation.
  o = d.run("classify " + d.scene("su2sym2.scene") + " --point zQ --point zC --point zSq");
  d.expect_contains(o, 0, "failures 0", "classify sym2 batch");
  d.expect(o.out.find("verdict Unstable") != std::string::npos, "classify sym2 square point",
           o.out);
  {
    size_t first = o.out.find("verdict Polystable");
    bool two = first != std::string::npos &&
               o.out.find("verdict Polystable", first + 1) != std::string::npos;
    d.expect(two, "classify sym2 closed orbits", o.out);
  }

  // --- weights and curves ---------------------------------------------------
  o = d.run("weight " + d.scene("sphere4.scene") + " --point x --dir \"axis:[-1,-2,-3]\"");
  d.expect_contains(o, 0, "lambda 5.000000000000e-01", "weight of the doubled axis");

  o = d.run("weight " + d.scene("sphere4.scene") + " --point xpp --dir \"axis:[-1,-2,-3]\"");
  d.expect_contains(o, 0, "lambda", "weight at a vanishing direction runs");
  d.expect(o.out.find("warning") != std::string::npos,
           "vanishing weight carries a zero-band warning", o.out);

  std::string curve_csv = (d.tmp / "curve.csv").string();
  o = d.run("curve " + d.scene("sphere4.scene") +
            " --point xpp --dir \"axis:[-1,-2,-3]\" --t1 12 --samples 32 --csv " + curve_csv);
  d.expect_contains(o, 0, "terminal_value", "curve subcommand writes a summary");
  {
    std::ifstream csv(curve_csv);
    std::string header;
    std::getline(csv, header);
    d.expect(header == "t,lambda_t,slope", "curve CSV header", header);
    int rows = 0;
    std::string line;
    while (std::getline(csv, line)) ++rows;
    d.expect(rows == 32, "curve CSV row count", std::to_string(rows));
  }

  // --- flows ----------------------------------------------------------------
  std::string flow_csv = (d.tmp / "flow.csv").string();
  o = d.run("flow " + d.scene("sphere4.scene") + " --point xpp --csv " + flow_csv);
  d.expect_contains(o, 0, "outcome ConvergedInOrbit", "flow from the polystable mark");
  {
    std::ifstream csv(flow_csv);
    std::string header;
    std::getline(csv, header);
    d.expect(header == "t,mu_norm,distance", "flow CSV header", header);
  }

  // --- boundary geometry ----------------------------------------------------
  o = d.run("boundary-act " + d.scene("sphere4.scene") +
            " --dir \"axis:[0,0,1]\" --group identity");
  d.expect_contains(o, 0, "parabolic_member true", "boundary action under the identity");

  o = d.run("opposed " + d.scene("sphere4.scene") + " --dir1 \"axis:[0,0,1]\" --dir2 \"axis:[0,0,-1]\"");
  d.expect_contains(o, 0, "opposed true", "antipodal axes are opposed");

  o = d.run("opposed " + d.scene("sphere4.scene") + " --dir1 \"axis:[0,0,1]\" --dir2 \"axis:[0,0,1]\"");
  d.expect_contains(o, 0, "opposed false", "identical axes are not opposed");

  o = d.run("connect " + d.scene("sphere4.scene") + " --dir1 \"axis:[0,0,1]\" --dir2 \"axis:[1,0,0]\"");
  d.expect_contains(o, 0, "connector", "connect produces a group element");
  d.expect(o.out.find("action_defect") != std::string::npos, "connect reports its defect", o.out);

  o = d.run("integral " + d.scene("sphere4.scene") + " --point x --group identity");
  d.expect_contains(o, 0, "psi 0.000000000000e+00", "integral vanishes at the identity");

  // --- selftest and tamper detection ---------------------------------------
  o = d.run("selftest " + d.scene("sphere4.scene") + " --level quick");
  d.expect_contains(o, 0, "result PASS", "quick selftest passes");

  o = d.run("selftest " + d.scene("sphere4.scene") + " --level quick --tol.mono 0");
  d.expect(o.code != 0, "zero monotonicity slack is reported as a failure", o.out);
  d.expect(o.out.find("FAIL") != std::string::npos, "tampered selftest prints FAIL", o.out);

  // --- determinism ----------------------------------------------------------
  Outcome first = d.run("classify " + d.scene("sphere4.scene") + " --point xpp");
  Outcome second = d.run("classify " + d.scene("sphere4.scene") + " --point xpp");
  d.expect(first.out == second.out && first.code == second.code,
           "repeated runs produce byte-identical reports", first.out + "----\n" + second.out);

  // --- error handling -------------------------------------------------------
  o = d.run("classify --scene " + d.data + "/does_not_exist.scene --point x");
  d.expect(o.code == 2, "missing scene file exits with the usage code",
           "exit " + std::to_string(o.code) + "\n" + o.out);

  o = d.run("weight " + d.scene("sphere4.scene") + " --point nope --dir \"axis:[0,0,1]\"");
  d.expect(o.code != 0, "unknown point name fails", o.out);

  o = d.run("weight " + d.scene("torus_square.scene") + " --point zS --dir \"axis:[0,0,1]\"");
  d.expect(o.code == 2, "axis directions are rejected off the sphere",
           "exit " + std::to_string(o.code) + "\n" + o.out);

  std::printf("%d checks, %d failures\n", d.checks, d.failures);
  return d.failures == 0 ? 0 : 1;
}
