#include "knstab/scene_io.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace knstab {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& msg) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << msg;
  fail(Err::ParseError, os.str());
}

json payload_of(const std::string& origin, int line, const std::string& text) {
  try {
    return json::parse(text);
  } catch (const std::exception& e) {
    parse_fail(origin, line, std::string("bad JSON payload: ") + e.what());
  }
}

Complex complex_of(const json& j, const std::string& origin, int line) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Complex(j[0].get<double>(), j[1].get<double>());
  parse_fail(origin, line, "complex entries must be numbers or [re, im] pairs");
}

CVec cvec_of(const json& j, const std::string& origin, int line) {
  if (!j.is_array()) parse_fail(origin, line, "expected an array of complex entries");
  CVec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = complex_of(j[i], origin, line);
  return v;
}

CMat cmat_of(const json& j, const std::string& origin, int line) {
  if (!j.is_array() || j.empty()) parse_fail(origin, line, "expected a non-empty array of rows");
  const size_t rows = j.size();
  size_t cols = 0;
  CMat m;
  for (size_t r = 0; r < rows; ++r) {
    CVec row = cvec_of(j[r], origin, line);
    if (r == 0) {
      cols = static_cast<size_t>(row.size());
      if (cols == 0) parse_fail(origin, line, "matrix rows must be non-empty");
      m.resize(rows, cols);
    } else if (static_cast<size_t>(row.size()) != cols) {
      parse_fail(origin, line, "matrix rows have inconsistent lengths");
    }
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

template <typename T>
struct Field {
  T value{};
  int line = 0;
  bool set = false;
  void assign(T v, int ln, const std::string& origin, const char* key) {
    if (set) parse_fail(origin, ln, std::string("duplicate '") + key + "' line");
    value = std::move(v);
    line = ln;
    set = true;
  }
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double spectral_norm_of(const CMat& a) {
  Eigen::JacobiSVD<CMat> svd(a);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

}  // namespace

Scene parse_scene_text(const std::string& text, const std::string& origin) {
  Field<std::string> name;
  Field<SceneKind> kind;
  Field<int> tuple_len, group_n, space_n;
  Field<std::vector<std::vector<long long>>> weights;
  Field<std::vector<CMat>> kbasis, rep;
  Field<double> growth;
  Field<CVec> base;
  struct PointLine {
    std::string pname;
    json payload;
    int line;
  };
  std::vector<PointLine> raw_points;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != "scene v1") parse_fail(origin, lineno, "expected 'scene v1' header");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::string rest = trim(line.substr(key.size()));
    if (key == "name") {
      if (rest.empty()) parse_fail(origin, lineno, "'name' needs a value");
      name.assign(rest, lineno, origin, "name");
    } else if (key == "kind") {
      SceneKind k;
      if (rest == "sphere")
        k = SceneKind::SphereTuple;
      else if (rest == "projective")
        k = SceneKind::Projective;
      else if (rest == "flat")
        k = SceneKind::Flat;
      else
        parse_fail(origin, lineno, "kind must be sphere, projective or flat");
      kind.assign(k, lineno, origin, "kind");
    } else if (key == "m" || key == "n" || key == "N") {
      json j = payload_of(origin, lineno, rest);
      if (!j.is_number_integer() || j.get<long long>() <= 0)
        parse_fail(origin, lineno, std::string("'") + key + "' must be a positive integer");
      int v = static_cast<int>(j.get<long long>());
      if (key == "m")
        tuple_len.assign(v, lineno, origin, "m");
      else if (key == "n")
        group_n.assign(v, lineno, origin, "n");
      else
        space_n.assign(v, lineno, origin, "N");
    } else if (key == "weights") {
      json j = payload_of(origin, lineno, rest);
      if (!j.is_array() || j.empty()) parse_fail(origin, lineno, "weights must be a non-empty array of rows");
      std::vector<std::vector<long long>> w;
      size_t d = 0;
      for (const json& row : j) {
        if (!row.is_array() || row.empty())
          parse_fail(origin, lineno, "each weight row must be a non-empty integer array");
        std::vector<long long> r;
        for (const json& e : row) {
          if (!e.is_number_integer()) parse_fail(origin, lineno, "weight entries must be integers");
          r.push_back(e.get<long long>());
        }
        if (w.empty())
          d = r.size();
        else if (r.size() != d)
          parse_fail(origin, lineno, "weight rows have inconsistent lengths");
        w.push_back(std::move(r));
      }
      weights.assign(std::move(w), lineno, origin, "weights");
    } else if (key == "kbasis" || key == "rep") {
      json j = payload_of(origin, lineno, rest);
      if (!j.is_array() || j.empty())
        parse_fail(origin, lineno, std::string("'") + key + "' must be a non-empty array of matrices");
      std::vector<CMat> mats;
      for (const json& e : j) mats.push_back(cmat_of(e, origin, lineno));
      if (key == "kbasis")
        kbasis.assign(std::move(mats), lineno, origin, "kbasis");
      else
        rep.assign(std::move(mats), lineno, origin, "rep");
    } else if (key == "growth_c") {
      json j = payload_of(origin, lineno, rest);
      if (!j.is_number() || j.get<double>() <= 0.0)
        parse_fail(origin, lineno, "growth_c must be a positive number");
      growth.assign(j.get<double>(), lineno, origin, "growth_c");
    } else if (key == "base") {
      base.assign(cvec_of(payload_of(origin, lineno, rest), origin, lineno), lineno, origin, "base");
    } else if (key == "point") {
      std::istringstream ps(rest);
      std::string pname;
      ps >> pname;
      if (pname.empty()) parse_fail(origin, lineno, "'point' needs a name and a payload");
      std::string body = trim(rest.substr(pname.size()));
      if (body.empty()) parse_fail(origin, lineno, "'point' needs a name and a payload");
      raw_points.push_back({pname, payload_of(origin, lineno, body), lineno});
    } else {
      parse_fail(origin, lineno, "unknown keyword '" + key + "'");
    }
  }
  if (!header) parse_fail(origin, std::max(lineno, 1), "empty scene file (missing 'scene v1' header)");
  if (!kind.set) parse_fail(origin, std::max(lineno, 1), "missing 'kind' line");

  auto forbid = [&](bool present, int at, const char* what, const char* ctx) {
    if (present) parse_fail(origin, at, std::string("'") + what + "' is not valid " + ctx);
  };

  Scene scene;
  if (kind.value == SceneKind::SphereTuple) {
    if (!tuple_len.set) parse_fail(origin, std::max(lineno, 1), "sphere scenes need an 'm' line");
    forbid(weights.set, weights.line, "weights", "in a sphere scene");
    forbid(kbasis.set, kbasis.line, "kbasis", "in a sphere scene");
    forbid(rep.set, rep.line, "rep", "in a sphere scene");
    forbid(group_n.set, group_n.line, "n", "in a sphere scene");
    forbid(space_n.set, space_n.line, "N", "in a sphere scene");
    scene = make_sphere_scene(tuple_len.value);
  } else if (weights.set) {
    forbid(kbasis.set, kbasis.line, "kbasis", "in a torus scene");
    forbid(rep.set, rep.line, "rep", "in a torus scene");
    forbid(tuple_len.set, tuple_len.line, "m", "outside a sphere scene");
    scene = make_torus_scene(weights.value, kind.value);
  } else {
    if (!group_n.set || !space_n.set || !kbasis.set || !rep.set)
      parse_fail(origin, std::max(lineno, 1),
                 "general scenes need 'n', 'N', 'kbasis' and 'rep' lines (or 'weights' for a torus)");
    forbid(tuple_len.set, tuple_len.line, "m", "outside a sphere scene");
    const int n = group_n.value, nn = space_n.value;
    if (kbasis.value.size() != rep.value.size())
      parse_fail(origin, rep.line, "'kbasis' and 'rep' must list the same number of generators");
    for (size_t i = 0; i < kbasis.value.size(); ++i) {
      const CMat& a = kbasis.value[i];
      const CMat& b = rep.value[i];
      std::ostringstream tag;
      tag << "generator " << i;
      if (a.rows() != n || a.cols() != n)
        fail(Err::ValidationError, tag.str() + " of kbasis is not " + std::to_string(n) + "x" +
                                       std::to_string(n));
      if (b.rows() != nn || b.cols() != nn)
        fail(Err::ValidationError, tag.str() + " image is not " + std::to_string(nn) + "x" +
                                       std::to_string(nn));
      if ((a + a.adjoint()).norm() > 1e-8 * (1.0 + a.norm()))
        fail(Err::ValidationError, tag.str() + " of kbasis is not skew-Hermitian");
      if ((b + b.adjoint()).norm() > 1e-8 * (1.0 + b.norm()))
        fail(Err::ValidationError, tag.str() + " image is not skew-Hermitian");
    }
    scene.kind = kind.value;
    scene.n = n;
    scene.rep_dim = nn;
    scene.tuple_len = 1;
    scene.k_basis = kbasis.value;
    scene.rep = rep.value;
    double bound = 0.0;
    for (const CMat& r : scene.rep) {
      double s = spectral_norm_of(r);
      bound += s * s;
    }
    bound = std::sqrt(bound);
    scene.growth_c = scene.kind == SceneKind::Projective ? 1.0 + std::sqrt(2.0) * bound : 1.0 + bound;
    scene.base = scene.kind == SceneKind::Projective ? CVec(CVec::Unit(nn, 0)) : CVec(CVec::Zero(nn));
  }

  if (name.set) scene.name = name.value;
  if (growth.set) scene.growth_c = growth.value;
  if (base.set) {
    if (base.value.size() != scene.state_dim())
      parse_fail(origin, base.line, "base has the wrong dimension for this scene");
    scene.base = scene.kind == SceneKind::Flat ? base.value : normalize_state(scene, base.value);
  }

  for (const PointLine& p : raw_points) {
    if (scene.points.count(p.pname)) parse_fail(origin, p.line, "duplicate point '" + p.pname + "'");
    if (scene.kind == SceneKind::SphereTuple) {
      if (!p.payload.is_array() || static_cast<int>(p.payload.size()) != scene.tuple_len)
        parse_fail(origin, p.line,
                   "point '" + p.pname + "' must list " + std::to_string(scene.tuple_len) +
                       " unit 3-vectors");
      std::vector<Eigen::Vector3d> pts;
      for (size_t i = 0; i < p.payload.size(); ++i) {
        CVec row = cvec_of(p.payload[i], origin, p.line);
        if (row.size() != 3 || row.imag().norm() != 0.0)
          parse_fail(origin, p.line, "sphere points are rows of 3 real entries");
        Eigen::Vector3d v = row.real();
        if (std::abs(v.norm() - 1.0) > 1e-6)
          fail(Err::ValidationError,
               "point '" + p.pname + "' row " + std::to_string(i) + " is not a unit vector");
        pts.push_back(v.normalized());
      }
      scene.points[p.pname] = sphere_state(pts);
    } else {
      CVec z = cvec_of(p.payload, origin, p.line);
      if (z.size() != scene.rep_dim)
        parse_fail(origin, p.line, "point '" + p.pname + "' must have " +
                                       std::to_string(scene.rep_dim) + " entries");
      scene.points[p.pname] = scene.kind == SceneKind::Flat ? z : normalize_state(scene, z);
    }
  }

  validate_scene(scene);
  return scene;
}

Scene parse_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::ParseError, path + ": cannot open scene file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scene_text(buf.str(), path);
}

std::string fmt(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.12e", v);
  return b;
}

std::string fmt(const Complex& v) { return "[" + fmt(v.real()) + ", " + fmt(v.imag()) + "]"; }

std::string fmt_vec(const RVec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

std::string fmt_cvec(const CVec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

std::string fmt_cmat(const CMat& m) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    s += r ? ", [" : "[";
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += (c ? ", " : "") + fmt(m(r, c));
    s += "]";
  }
  return s + "]";
}

namespace {

std::pair<std::string, std::string> split_spec(const std::string& spec) {
  size_t colon = spec.find(':');
  if (colon == std::string::npos) return {spec, ""};
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

}  // namespace

SkewHermitian parse_direction(const Scene& scene, const std::string& spec) {
  auto [head, body] = split_spec(spec);
  const std::string origin = "<direction>";
  if (head == "coords") {
    json j = payload_of(origin, 1, body);
    if (!j.is_array() || static_cast<int>(j.size()) != scene.kdim())
      fail(Err::ParseError, "coords direction needs " + std::to_string(scene.kdim()) + " numbers");
    RVec c(scene.kdim());
    for (int i = 0; i < scene.kdim(); ++i) {
      if (!j[i].is_number()) fail(Err::ParseError, "coords entries must be numbers");
      c[i] = j[i].get<double>();
    }
    return coords_to_k(scene, c);
  }
  if (head == "axis") {
    if (scene.kind != SceneKind::SphereTuple)
      fail(Err::ParseError, "axis directions are only defined for sphere scenes");
    json j = payload_of(origin, 1, body);
    if (!j.is_array() || j.size() != 3) fail(Err::ParseError, "axis needs 3 numbers");
    RVec a(3);
    for (int i = 0; i < 3; ++i) {
      if (!j[i].is_number()) fail(Err::ParseError, "axis entries must be numbers");
      a[i] = j[i].get<double>();
    }
    if (a.norm() < 1e-12) fail(Err::ParseError, "axis must be nonzero");
    return coords_to_k(scene, RVec(a / a.norm()));
  }
  if (head == "mat") {
    CMat m = cmat_of(payload_of(origin, 1, body), origin, 1);
    if (m.rows() != scene.n || m.cols() != scene.n)
      fail(Err::ParseError, "direction matrix must be " + std::to_string(scene.n) + "x" +
                                std::to_string(scene.n));
    SkewHermitian s(m);
    double residual = 0.0;
    k_to_coords(scene, s, &residual);
    if (residual > 1e-8 * (1.0 + s.norm()))
      fail(Err::ValidationError, "direction lies outside the scene's symmetry algebra");
    return s;
  }
  fail(Err::ParseError, "direction must be coords:[...], axis:[...] or mat:[[...]]");
}

CMat parse_group_element(const Scene& scene, const std::string& spec, Rng& rng) {
  if (spec == "identity") return CMat::Identity(scene.n, scene.n);
  if (spec == "random") return random_group_element(rng, scene.n);
  auto [head, body] = split_spec(spec);
  if (head == "mat") {
    CMat g = cmat_of(payload_of("<group>", 1, body), "<group>", 1);
    if (g.rows() != scene.n || g.cols() != scene.n)
      fail(Err::ParseError, "group element must be " + std::to_string(scene.n) + "x" +
                                std::to_string(scene.n));
    Eigen::FullPivLU<CMat> lu(g);
    if (!lu.isInvertible()) fail(Err::ValidationError, "group element is singular");
    return g;
  }
  fail(Err::ParseError, "group element must be identity, random or mat:[[...]]");
}

}  // namespace knstab
