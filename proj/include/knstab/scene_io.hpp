// Line-oriented scene files and deterministic numeric formatting shared by
// the command-line front end and the golden tests.
#pragma once

#include "knstab/scenes.hpp"

#include <string>

namespace knstab {

// Parses a versioned scene file and returns a validated Scene.
//
// Grammar: one keyword per line, '#' starts a comment, payloads are JSON,
// complex entries are [re, im] pairs (plain numbers are taken as reals).
//
//   scene v1
//   name <identifier>
//   kind sphere | projective | flat
//   m <int>                  sphere scenes: tuple length
//   weights <int rows>       torus scenes: N rows of d integer weights
//   n <int>                  general scenes: the group sits inside U(n)
//   N <int>                  general scenes: acted-on space dimension
//   kbasis <kdim x n x n>    general scenes: orthonormal algebra basis
//   rep <kdim x N x N>       general scenes: images of the basis
//   growth_c <real>          optional override of the growth constant
//   base <complex vector>    optional override of the growth base point
//   point <name> <payload>   sphere: m rows of unit 3-vectors; else C^N
//
// Throws ParseError with file:line diagnostics for malformed input and
// ValidationError (naming the offending generator/point) for well-formed
// input that fails the structural checks.
Scene parse_scene(const std::string& path);
// Same grammar from in-memory text; origin labels diagnostics.
Scene parse_scene_text(const std::string& text, const std::string& origin);

// Fixed-precision decimals used across reports and CSV output.
std::string fmt(double v);
std::string fmt(const Complex& v);  // "[re, im]"
std::string fmt_vec(const RVec& v);
std::string fmt_cvec(const CVec& v);
std::string fmt_cmat(const CMat& m);  // row-major nested arrays

// Direction arguments accepted by the front end:
//   coords:[c1,...]   coordinates against the scene's generators
//   axis:[x,y,z]      sphere scenes: unit direction attracting toward the axis
//   mat:[[..],..]     explicit skew-Hermitian n x n matrix in the algebra
SkewHermitian parse_direction(const Scene& scene, const std::string& spec);

// Group-element arguments:
//   identity | random | mat:[[..],..]
CMat parse_group_element(const Scene& scene, const std::string& spec, Rng& rng);

}  // namespace knstab
