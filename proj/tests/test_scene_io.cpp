#include "doctest.h"

#include "knstab/scene_io.hpp"

#include <cmath>
#include <complex>
#include <string>

using namespace knstab;

namespace {

const char* kSphereText = R"(# two marked points
scene v1
name demo
kind sphere
m 2
point up_down [[0, 0, 1], [0, 0, -1]]
point side [[1, 0, 0], [0, 0, 1]]
)";

const char* kTorusText = R"(scene v1
name circle
kind projective
weights [[1], [-1]]
point z [[1, 0], [1, 0]]
)";

// su(2) acting on its defining space; generators are -i sigma_k / sqrt(2).
const std::string kGeneralText = []() {
  const double r = 1.0 / std::sqrt(2.0);
  auto num = [](double v) { return fmt(v); };
  std::string b1 = "[[[0,0],[0,-" + num(r) + "]],[[0,-" + num(r) + "],[0,0]]]";
  std::string b2 = "[[[0,0],[-" + num(r) + ",0]],[[" + num(r) + ",0],[0,0]]]";
  std::string b3 = "[[[0,-" + num(r) + "],[0,0]],[[0,0],[0," + num(r) + "]]]";
  std::string text = "scene v1\nname su2defining\nkind projective\nn 2\nN 2\n";
  text += "kbasis [" + b1 + ", " + b2 + ", " + b3 + "]\n";
  text += "rep [" + b1 + ", " + b2 + ", " + b3 + "]\n";
  text += "point e1 [[1, 0], [0, 0]]\n";
  return text;
}();

std::string expect_parse_error(const std::string& text) {
  try {
    parse_scene_text(text, "mem");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ParseError);
    return e.what();
  }
  return "";
}

std::string expect_validation_error(const std::string& text) {
  try {
    parse_scene_text(text, "mem");
    FAIL("expected ValidationError");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ValidationError);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parses sphere scenes with named points") {
  Scene scene = parse_scene_text(kSphereText, "mem");
  CHECK(scene.kind == SceneKind::SphereTuple);
  CHECK(scene.name == "demo");
  CHECK(scene.tuple_len == 2);
  CHECK(scene.n == 2);
  REQUIRE(scene.points.count("up_down") == 1);
  REQUIRE(scene.points.count("side") == 1);
  CVec x = scene.points.at("up_down");
  CHECK((sphere_point(scene, x, 0) - Eigen::Vector3d{0, 0, 1}).norm() <= 1e-12);
  CHECK((sphere_point(scene, x, 1) - Eigen::Vector3d{0, 0, -1}).norm() <= 1e-12);
}

TEST_CASE("parses torus weight systems") {
  Scene scene = parse_scene_text(kTorusText, "mem");
  CHECK(scene.torus);
  CHECK(scene.kind == SceneKind::Projective);
  CHECK(scene.n == 1);
  CHECK(scene.rep_dim == 2);
  REQUIRE(scene.torus_weights.size() == 2);
  CHECK(scene.torus_weights[0][0] == 1);
  CHECK(scene.torus_weights[1][0] == -1);
  CHECK(scene.points.count("z") == 1);
}

TEST_CASE("parses general representation scenes") {
  Scene scene = parse_scene_text(kGeneralText, "mem");
  CHECK(scene.kind == SceneKind::Projective);
  CHECK_FALSE(scene.torus);
  CHECK(scene.n == 2);
  CHECK(scene.rep_dim == 2);
  CHECK(scene.kdim() == 3);
  CHECK_NOTHROW(validate_scene(scene));
  // The defining representation realizes mu(e1) with a definite pairing.
  CVec e1 = scene.points.at("e1");
  CHECK(moment_coords(scene, e1).norm() > 0.1);
}

TEST_CASE("reports malformed headers with file and line") {
  std::string msg = expect_parse_error("scene v2\n");
  CHECK(msg.find("mem:1") != std::string::npos);

  msg = expect_parse_error("scene v1\nkind banana\n");
  CHECK(msg.find("mem:2") != std::string::npos);

  msg = expect_parse_error("kind sphere\n");
  CHECK(msg.find("mem:1") != std::string::npos);
}

TEST_CASE("reports malformed payloads and duplicates") {
  std::string msg = expect_parse_error("scene v1\nkind projective\nweights [[1.5]]\n");
  CHECK(msg.find("mem:3") != std::string::npos);

  expect_parse_error("scene v1\nkind projective\nweights [[1], [2]\n");  // unbalanced JSON

  // Duplicate keyword and duplicate point names.
  expect_parse_error("scene v1\nkind sphere\nkind sphere\nm 1\npoint a [[0,0,1]]\n");
  msg = expect_parse_error(
      "scene v1\nkind sphere\nm 1\npoint a [[0,0,1]]\npoint a [[0,0,1]]\n");
  CHECK(msg.find("a") != std::string::npos);

  // Sphere scenes take exactly m rows.
  expect_parse_error("scene v1\nkind sphere\nm 2\npoint a [[0,0,1]]\n");

  // Mixing incompatible keywords is rejected.
  expect_parse_error("scene v1\nkind sphere\nm 1\nweights [[1]]\npoint a [[0,0,1]]\n");
}

TEST_CASE("rejects states and generators that fail validation") {
  std::string msg = expect_validation_error(
      "scene v1\nkind sphere\nm 1\npoint far [[0, 0, 2]]\n");
  CHECK(msg.find("far") != std::string::npos);
  CHECK(msg.find("unit") != std::string::npos);

  // A symmetric (not skew-Hermitian) generator is named in the diagnostic.
  std::string bad =
      "scene v1\nkind projective\nn 2\nN 2\n"
      "kbasis [[[1, 0], [0, 1]]]\n"
      "rep [[[1, 0], [0, 1]]]\n";
  msg = expect_validation_error(bad);
  CHECK(msg.find("generator 0") != std::string::npos);
}

TEST_CASE("formats numbers deterministically") {
  CHECK(fmt(0.5) == "5.000000000000e-01");
  CHECK(fmt(-1.0) == "-1.000000000000e+00");
  CHECK(fmt(Complex(1.0, -2.0)) == "[1.000000000000e+00, -2.000000000000e+00]");

  RVec v(2);
  v << 0.25, -0.5;
  std::string sv = fmt_vec(v);
  CHECK(sv.find("2.500000000000e-01") != std::string::npos);
  CHECK(sv.find(",") != std::string::npos);

  CVec cv(1);
  cv << Complex(0.0, 1.0);
  CHECK(fmt_cvec(cv).find("1.000000000000e+00") != std::string::npos);

  CMat m = CMat::Identity(2, 2);
  std::string sm = fmt_cmat(m);
  CHECK(sm.front() == '[');
  CHECK(sm.back() == ']');
}

TEST_CASE("parses direction specifications") {
  Scene sph = parse_scene_text(kSphereText, "mem");
  SkewHermitian down = parse_direction(sph, "axis:[0, 0, -1]");
  RVec c = k_to_coords(sph, down, nullptr);
  CHECK((c - (RVec(3) << 0, 0, -1).finished()).norm() <= 1e-12);

  SkewHermitian mixed = parse_direction(sph, "axis:[3, 0, 4]");
  CHECK(k_to_coords(sph, mixed, nullptr)[0] == doctest::Approx(0.6).epsilon(1e-12));

  SkewHermitian byc = parse_direction(sph, "coords:[1, 0, 0]");
  CHECK(k_to_coords(sph, byc, nullptr)[0] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(parse_direction(sph, "axis:[0, 0, 0]"), Error);
  CHECK_THROWS_AS(parse_direction(sph, "coords:[1]"), Error);
  CHECK_THROWS_AS(parse_direction(sph, "spin:[1,0,0]"), Error);

  Scene torus = parse_scene_text(kTorusText, "mem");
  CHECK_THROWS_AS(parse_direction(torus, "axis:[0, 0, 1]"), Error);
  SkewHermitian one = parse_direction(torus, "mat:[[[0, 1]]]");
  CHECK(k_to_coords(torus, one, nullptr)[0] == doctest::Approx(1.0).epsilon(1e-12));

  // The center of u(2) lies outside the sphere's su(2) algebra.
  try {
    parse_direction(sph, "mat:[[[0, 1], [0, 0]], [[0, 0], [0, 1]]]");
    FAIL("expected ValidationError");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ValidationError);
  }
}

TEST_CASE("parses group element specifications") {
  Scene sph = parse_scene_text(kSphereText, "mem");
  Rng rng(501);
  CHECK((parse_group_element(sph, "identity", rng) - CMat::Identity(2, 2)).norm() == 0.0);

  Rng r1(9), r2(9);
  CMat g1 = parse_group_element(sph, "random", r1);
  CMat g2 = parse_group_element(sph, "random", r2);
  CHECK((g1 - g2).norm() == 0.0);
  CHECK(cond_estimate(g1) < 1e6);

  CMat id = parse_group_element(sph, "mat:[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]", rng);
  CHECK((id - CMat::Identity(2, 2)).norm() <= 1e-12);

  try {
    parse_group_element(sph, "mat:[[[0, 0], [0, 0]], [[0, 0], [0, 0]]]", rng);
    FAIL("expected ValidationError");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ValidationError);
  }
  CHECK_THROWS_AS(parse_group_element(sph, "sudden", rng), Error);
}

TEST_CASE("round-trips a formatted scene through the parser") {
  // Format a state with fmt and read it back at full precision.
  Eigen::Vector3d p{0.36, -0.48, 0.8};
  std::string text = "scene v1\nkind sphere\nm 1\npoint p [[";
  text += fmt(p[0]) + ", " + fmt(p[1]) + ", " + fmt(p[2]) + "]]\n";
  Scene again = parse_scene_text(text, "mem");
  CHECK((sphere_point(again, again.points.at("p"), 0) - p).norm() <= 1e-12);
}
