#include "knstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>

namespace knstab {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "Stable";
    case Verdict::Polystable: return "Polystable";
    case Verdict::NonnegativeNotPolystable: return "NonnegativeNotPolystable";
    case Verdict::Unstable: return "Unstable";
  }
  return "?";
}

std::string to_string(FlowOutcome o) {
  switch (o) {
    case FlowOutcome::ConvergedInOrbit: return "ConvergedInOrbit";
    case FlowOutcome::ConvergedDegenerate: return "ConvergedDegenerate";
    case FlowOutcome::Diverged: return "Diverged";
    case FlowOutcome::BudgetExhausted: return "BudgetExhausted";
  }
  return "?";
}

std::vector<int> state_support(const Scene& scene, const CVec& z, const Tolerances& tol) {
  if (scene.kind == SceneKind::SphereTuple)
    fail(Err::PreconditionUnmet, "state_support: sphere states have no weight support");
  std::vector<int> s;
  double nn = z.norm();
  for (Eigen::Index j = 0; j < z.size(); ++j)
    if (std::abs(z[j]) > tol.supp * nn) s.push_back(static_cast<int>(j));
  return s;
}

// ==========================================================================
// Exact torus classifier.

namespace {

// Next k-combination of {0..n-1} in lexicographic order; false when done.
bool next_combination(std::vector<int>& idx, int n) {
  int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

std::vector<int> rational_row_basis(const RatMatrix& a) {
  std::vector<int> rows;
  RatMatrix acc;
  for (size_t r = 0; r < a.size(); ++r) {
    acc.push_back(a[r]);
    if (rational_rank(acc) == static_cast<int>(acc.size())) {
      rows.push_back(static_cast<int>(r));
    } else {
      acc.pop_back();
    }
  }
  return rows;
}

// Basis of {sigma : <row, sigma> = 0 for all rows} over Q.
std::vector<std::vector<Rational>> rational_kernel(RatMatrix m, int cols) {
  // Gauss-Jordan to reduced row echelon form.
  int prow = 0;
  std::vector<int> pivot_col;
  for (int c = 0; c < cols && prow < static_cast<int>(m.size()); ++c) {
    int pr = prow;
    while (pr < static_cast<int>(m.size()) && m[pr][c].zero()) ++pr;
    if (pr == static_cast<int>(m.size())) continue;
    std::swap(m[prow], m[pr]);
    Rational piv = m[prow][c];
    for (int cc = 0; cc < cols; ++cc) m[prow][cc] = m[prow][cc] / piv;
    for (int r = 0; r < static_cast<int>(m.size()); ++r) {
      if (r == prow || m[r][c].zero()) continue;
      Rational f = m[r][c];
      for (int cc = 0; cc < cols; ++cc) m[r][cc] = m[r][cc] - f * m[prow][cc];
    }
    pivot_col.push_back(c);
    ++prow;
  }
  std::vector<std::vector<Rational>> basis;
  for (int c = 0; c < cols; ++c) {
    if (std::find(pivot_col.begin(), pivot_col.end(), c) != pivot_col.end()) continue;
    std::vector<Rational> v(cols, Rational(0));
    v[c] = Rational(1);
    for (int r = 0; r < static_cast<int>(pivot_col.size()); ++r)
      v[pivot_col[r]] = Rational(0) - m[r][c];
    basis.push_back(std::move(v));
  }
  return basis;
}

RVec to_double_vec(const std::vector<Rational>& v) {
  RVec d(v.size());
  for (size_t i = 0; i < v.size(); ++i) d[i] = v[i].to_double();
  return d;
}

Rational rat_dot(const std::vector<Rational>& a, const std::vector<Rational>& b) {
  Rational s(0);
  for (size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
  return s;
}

}  // namespace

StabilityResult classify_torus_projective(const std::vector<std::vector<long long>>& weights,
                                          const std::vector<int>& support) {
  if (weights.empty()) fail(Err::PreconditionUnmet, "classify: no weights");
  const int d = static_cast<int>(weights[0].size());
  if (support.empty()) fail(Err::PreconditionUnmet, "classify: empty support");
  for (int j : support)
    if (j < 0 || j >= static_cast<int>(weights.size()))
      fail(Err::PreconditionUnmet, "classify: support index out of range");
  const int ns = static_cast<int>(support.size());

  std::vector<std::vector<Rational>> w;  // supported rows
  for (int j : support) {
    std::vector<Rational> row;
    for (int c = 0; c < d; ++c) row.push_back(Rational(weights[j][c]));
    w.push_back(std::move(row));
  }

  StabilityResult out;
  out.exact = true;
  out.zero_band = 0.0;

  // Feasibility polytope {theta >= 0, sum theta = 1, sum theta w = 0}; its
  // vertices are basic solutions over rational row/column subsets.
  RatMatrix a(d + 1, std::vector<Rational>(ns, Rational(0)));
  for (int c = 0; c < ns; ++c) {
    for (int r = 0; r < d; ++r) a[r][c] = w[c][r];
    a[d][c] = Rational(1);
  }
  std::vector<Rational> b(d + 1, Rational(0));
  b[d] = Rational(1);

  std::vector<int> rows = rational_row_basis(a);
  const int rr = static_cast<int>(rows.size());
  std::set<int> support_union;
  bool feasible = false;
  if (rr <= ns) {
    std::vector<int> cols(rr);
    for (int i = 0; i < rr; ++i) cols[i] = i;
    do {
      RatMatrix m(rr, std::vector<Rational>(rr));
      std::vector<Rational> rhs(rr);
      for (int i = 0; i < rr; ++i) {
        rhs[i] = b[rows[i]];
        for (int j = 0; j < rr; ++j) m[i][j] = a[rows[i]][cols[j]];
      }
      std::vector<Rational> theta_b;
      if (!rational_solve(m, rhs, theta_b)) continue;
      bool nonneg = true;
      for (const Rational& t : theta_b) nonneg = nonneg && !t.negative();
      if (!nonneg) continue;
      std::vector<Rational> theta(ns, Rational(0));
      for (int j = 0; j < rr; ++j) theta[cols[j]] = theta_b[j];
      bool solves = true;
      for (int r = 0; r <= d && solves; ++r) {
        Rational acc(0);
        for (int c = 0; c < ns; ++c) acc = acc + a[r][c] * theta[c];
        solves = (acc == b[r]);
      }
      if (!solves) continue;
      feasible = true;
      for (int c = 0; c < ns; ++c)
        if (theta[c].positive()) support_union.insert(c);
    } while (next_combination(cols, ns));
  }

  // Independent subset spanning the supported weights; used for witness
  // searches carried out inside that span.
  RatMatrix wmat = w;
  std::vector<int> span_rows = rational_row_basis(wmat);
  const int k = static_cast<int>(span_rows.size());
  auto sigma_of_y = [&](const std::vector<Rational>& y) {
    std::vector<Rational> sigma(d, Rational(0));
    for (int a2 = 0; a2 < k; ++a2)
      for (int c = 0; c < d; ++c) sigma[c] = sigma[c] + y[a2] * w[span_rows[a2]][c];
    return sigma;
  };
  // Gram rows against the span basis.
  RatMatrix gram(ns, std::vector<Rational>(k));
  for (int j = 0; j < ns; ++j)
    for (int a2 = 0; a2 < k; ++a2) gram[j][a2] = rat_dot(w[j], w[span_rows[a2]]);

  if (!feasible) {
    // Separating functional with <w_j, sigma> <= -1 for every supported j,
    // found among basic solutions inside the span.
    out.verdict = Verdict::Unstable;
    std::vector<int> act(k);
    for (int i = 0; i < k; ++i) act[i] = i;
    bool found = false;
    do {
      RatMatrix m(k, std::vector<Rational>(k));
      std::vector<Rational> rhs(k, Rational(-1));
      for (int i = 0; i < k; ++i) m[i] = gram[act[i]];
      std::vector<Rational> y;
      if (!rational_solve(m, rhs, y)) continue;
      bool ok = true;
      for (int j = 0; j < ns && ok; ++j) {
        Rational slack = rat_dot(gram[j], y) + Rational(1);  // require <= -1
        ok = slack.negative() || slack.zero();
      }
      if (!ok) continue;
      RVec sigma = to_double_vec(sigma_of_y(y));
      double nn = sigma.norm();
      out.witness_coords = RVec(sigma / nn);
      double worst = -1e300;
      for (int j = 0; j < ns; ++j) worst = std::max(worst, to_double_vec(w[j]).dot(sigma) / nn);
      out.witness_weight = worst;
      found = true;
      break;
    } while (next_combination(act, ns));
    if (!found)
      fail(Err::PreconditionUnmet, "classify: hull infeasible but no separating witness found");
    out.diagnostics = "0 lies outside the supported weight hull";
    return out;
  }

  bool relint = static_cast<int>(support_union.size()) == ns;
  if (relint) {
    if (k == d) {
      out.verdict = Verdict::Stable;
      // Decorate with a sampled minimum of max_j <w_j, sigma>.
      double best = 1e300;
      auto probe = [&](RVec sigma) {
        double nn = sigma.norm();
        if (nn < 1e-12) return;
        sigma /= nn;
        double h = -1e300;
        for (int j = 0; j < ns; ++j) h = std::max(h, to_double_vec(w[j]).dot(sigma));
        best = std::min(best, h);
      };
      for (int j = 0; j < ns; ++j) probe(-to_double_vec(w[j]));
      for (uint64_t i = 0; i < 512; ++i) probe(halton_sphere(i + 1, d));
      out.min_weight = best;
      out.diagnostics = "0 interior to the supported weight hull; weights span";
      return out;
    }
    out.verdict = Verdict::Polystable;
    auto kernel = rational_kernel(wmat, d);
    for (const auto& kv : kernel) {
      RVec c = to_double_vec(kv);
      c /= c.norm();
      ZeroPair p;
      p.s_coords = c;
      p.u_coords = -c;
      out.pairs.push_back(std::move(p));
    }
    out.diagnostics = "0 in the relative interior; weights do not span";
    return out;
  }

  // 0 on the hull but outside the relative interior: exhibit a vanishing
  // direction whose opposite has positive weight.
  out.verdict = Verdict::NonnegativeNotPolystable;
  int jstar = -1;
  for (int c = 0; c < ns; ++c)
    if (!support_union.count(c)) {
      jstar = c;
      break;
    }
  if (jstar < 0) fail(Err::PreconditionUnmet, "classify: inconsistent relint decision");
  bool found = false;
  if (k >= 1) {
    std::vector<int> others(k - 1);
    for (int i = 0; i < k - 1; ++i) others[i] = i;
    auto try_subset = [&](const std::vector<int>& zero_rows) {
      RatMatrix m;
      std::vector<Rational> rhs;
      m.push_back(gram[jstar]);
      rhs.push_back(Rational(-1));
      for (int j : zero_rows) {
        if (j == jstar) return false;
        m.push_back(gram[j]);
        rhs.push_back(Rational(0));
      }
      std::vector<Rational> y;
      if (static_cast<int>(m.size()) != k || !rational_solve(m, rhs, y)) return false;
      for (int j = 0; j < ns; ++j) {
        Rational v = rat_dot(gram[j], y);
        if (v.positive()) return false;
      }
      RVec sigma = to_double_vec(sigma_of_y(y));
      out.unpaired_zero = RVec(sigma / sigma.norm());
      return true;
    };
    if (k == 1) {
      found = try_subset({});
    } else {
      do {
        std::vector<int> zr;
        for (int i : others) zr.push_back(i < jstar ? i : i + 1);
        if (static_cast<int>(zr.size()) == k - 1 && try_subset(zr)) {
          found = true;
          break;
        }
      } while (next_combination(others, ns - 1));
    }
  }
  if (!found)
    fail(Err::PreconditionUnmet, "classify: boundary case without an explicit zero direction");
  out.diagnostics = "0 on the boundary of the supported weight hull";
  return out;
}

StabilityResult classify_torus_point(const Scene& scene, const CVec& z, const Tolerances& tol) {
  if (!scene.torus) fail(Err::NotATorusScene, "classify_torus_point: scene is not a torus scene");
  if (scene.kind != SceneKind::Projective)
    fail(Err::PreconditionUnmet,
         "exact hull classification covers projective torus scenes; use the sampling "
         "classifier for flat ones");
  StabilityResult out =
      classify_torus_projective(scene.torus_weights, state_support(scene, z, tol));
  for (ZeroPair& p : out.pairs) {
    OpposednessResult r = opposed(coords_to_k(scene, p.s_coords), coords_to_k(scene, p.u_coords),
                                  true, tol);
    if (r.opposed) p.cert = r.cert;
  }
  return out;
}

// ==========================================================================
// Sampling classifier.

namespace {

// Minimum-norm point of the convex hull of the given points (rows), by
// enumeration over Caratheodory-sized subsets.
RVec min_norm_point(const std::vector<RVec>& pts, int dim) {
  RVec best = pts[0];
  double bestn = best.norm();
  const int np = static_cast<int>(pts.size());
  for (int sz = 1; sz <= std::min(np, dim + 1); ++sz) {
    std::vector<int> idx(sz);
    for (int i = 0; i < sz; ++i) idx[i] = i;
    do {
      // Affine minimization: minimize |sum theta_i p_i| with sum theta = 1.
      Eigen::MatrixXd g(sz + 1, sz + 1);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sz + 1);
      for (int i = 0; i < sz; ++i)
        for (int j = 0; j < sz; ++j) g(i, j) = 2.0 * pts[idx[i]].dot(pts[idx[j]]);
      for (int i = 0; i < sz; ++i) {
        g(i, sz) = 1.0;
        g(sz, i) = 1.0;
      }
      g(sz, sz) = 0.0;
      rhs[sz] = 1.0;
      Eigen::VectorXd sol = g.fullPivLu().solve(rhs);
      if (!sol.allFinite()) continue;
      bool admissible = true;
      for (int i = 0; i < sz; ++i) admissible = admissible && sol[i] > -1e-12;
      if (!admissible) continue;
      RVec p = RVec::Zero(dim);
      for (int i = 0; i < sz; ++i) p += sol[i] * pts[idx[i]];
      if (p.norm() < bestn) {
        bestn = p.norm();
        best = p;
      }
    } while (next_combination(idx, np));
  }
  return best;
}

struct WeightPool {
  const Scene& scene;
  const CVec& x;
  const Tolerances& tol;
  long budget;
  long evals = 0;
  double best = 1e300;
  RVec best_c;
  std::vector<std::pair<RVec, double>> table;

  double eval(RVec c) {
    double nn = c.norm();
    if (nn < 1e-12) return 1e300;
    c /= nn;
    if (++evals > budget) {
      std::ostringstream os;
      os << "classification budget exhausted after " << evals - 1
         << " weight evaluations (best so far " << best << ")";
      fail(Err::BudgetExhausted, os.str());
    }
    ExtendedReal w = max_weight(scene, x, coords_to_k(scene, c), tol);
    double v = w.finite ? w.value : 1e18;
    table.push_back({c, v});
    if (v < best) {
      best = v;
      best_c = c;
    }
    return v;
  }
};

// Subgradient of the supported-top-eigenvalue weight at unit coordinates c.
RVec lambda_subgradient(const Scene& scene, const CVec& x, const RVec& c, const Tolerances& tol) {
  CMat a = CMat::Zero(scene.rep_dim, scene.rep_dim);
  for (int i = 0; i < scene.kdim(); ++i) a += c[i] * (Complex(0, 1) * scene.rep[i]);
  SpectralData sd = herm_eig(a, -1.0, tol);
  const double nn = x.norm();
  for (int j = sd.clusters() - 1; j >= 0; --j) {
    CMat basis = sd.cluster_basis(j);
    CVec proj = basis.adjoint() * x;
    if (proj.norm() > tol.supp * nn) {
      CVec v = basis * proj;
      v /= v.norm();
      RVec g(scene.kdim());
      for (int i = 0; i < scene.kdim(); ++i)
        g[i] = (v.dot(Complex(0, 1) * (scene.rep[i] * v))).real();
      return g;
    }
  }
  return RVec::Zero(scene.kdim());
}

void descend(WeightPool& pool, RVec c, const Scene& scene, const CVec& x, const Tolerances& tol,
             int iters) {
  c /= c.norm();
  double f = pool.eval(c);
  double eta = 0.5;
  for (int it = 0; it < iters; ++it) {
    RVec g = lambda_subgradient(scene, x, c, tol);
    RVec dir = g - g.dot(c) * c;
    if (dir.norm() < 1e-11) break;
    bool moved = false;
    while (eta > 1e-9) {
      RVec cand = c - eta * dir;
      cand /= cand.norm();
      double fc = pool.eval(cand);
      if (fc < f - 1e-14) {
        c = cand;
        f = fc;
        eta *= 1.4;
        moved = true;
        break;
      }
      eta *= 0.5;
    }
    if (!moved) break;
  }
}

}  // namespace

StabilityResult classify_sampling(const Scene& scene, const CVec& x, long budget, Rng& rng,
                                  const Tolerances& tol) {
  validate_state(scene, x, tol);
  if (budget <= 0) fail(Err::PreconditionUnmet, "classification budget must be positive");
  WeightPool pool{scene, x, tol, budget, 0, 1e300, RVec(), {}};
  const int kd = scene.kdim();
  const double delta = tol.zero_band;

  auto eval_pm = [&](const RVec& c) {
    pool.eval(c);
    pool.eval(-c);
  };

  // Candidate directions: scene-specific axes and isotropy kernel vectors.
  std::vector<RVec> candidates;
  for (const SkewHermitian& s : special_directions(scene, x, tol))
    candidates.push_back(k_to_coords(scene, s, nullptr));

  std::vector<int> supp = scene.torus ? state_support(scene, x, tol) : std::vector<int>{};
  if (scene.torus && !supp.empty()) {
    // Supported weight rows drive a minimax search: the steepest direction is
    // opposite the minimum-norm point of their hull, vanishing directions lie
    // along face normals and the kernel of the weight matrix.
    std::vector<RVec> rows;
    for (int j : supp) {
      RVec r(kd);
      for (int c = 0; c < kd; ++c) r[c] = static_cast<double>(scene.torus_weights[j][c]);
      rows.push_back(r);
    }
    RVec mnp = min_norm_point(rows, kd);
    if (mnp.norm() > 1e-12) candidates.push_back(-mnp);
    Eigen::MatrixXd wm(rows.size(), kd);
    for (size_t r = 0; r < rows.size(); ++r) wm.row(r) = rows[r];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(wm, Eigen::ComputeFullV);
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] > 1e-9 * std::max(1.0, svd.singularValues()[0])) ++rank;
    for (int i = rank; i < kd; ++i) candidates.push_back(svd.matrixV().col(i));  // kernel
    // Face normals: null directions of (rank-1)-subsets inside the span.
    if (rank >= 1) {
      Eigen::MatrixXd span = svd.matrixV().leftCols(rank);
      std::vector<RVec> prows;
      for (const RVec& r : rows) prows.push_back(span.transpose() * r);
      if (rank == 1) {
        candidates.push_back(span.col(0));
      } else {
        std::vector<int> idx(rank - 1);
        for (int i = 0; i < rank - 1; ++i) idx[i] = i;
        do {
          Eigen::MatrixXd sub(rank - 1, rank);
          for (int i = 0; i < rank - 1; ++i) sub.row(i) = prows[idx[i]];
          Eigen::JacobiSVD<Eigen::MatrixXd> fsvd(sub, Eigen::ComputeFullV);
          candidates.push_back(span * fsvd.matrixV().col(rank - 1));
        } while (next_combination(idx, static_cast<int>(prows.size())));
      }
      for (uint64_t i = 0; i < 32; ++i)
        candidates.push_back(span * halton_sphere(i + 1, rank));
    }
  }

  for (uint64_t i = 0; i < 16; ++i) candidates.push_back(halton_sphere(i + 1, kd));
  for (const RVec& c : candidates) eval_pm(c);

  // Gradient refinement where the weight responds smoothly to the direction.
  if (scene.kind == SceneKind::Projective && !scene.torus) {
    std::vector<RVec> starts = candidates;
    for (uint64_t i = 16; i < 24; ++i) starts.push_back(halton_sphere(i + 1, kd));
    for (const RVec& c : starts) {
      descend(pool, c, scene, x, tol, 50);
      descend(pool, -c, scene, x, tol, 50);
    }
  }

  StabilityResult out;
  out.zero_band = delta;
  out.evaluations = pool.evals;
  if (pool.best < -delta) {
    out.verdict = Verdict::Unstable;
    out.witness_coords = pool.best_c;
    out.witness_weight = pool.best;
    return out;
  }
  if (pool.best > delta) {
    out.verdict = Verdict::Stable;
    out.min_weight = pool.best;
    return out;
  }

  // Vanishing directions, deduplicated.
  std::vector<RVec> zeros;
  for (const auto& [c, v] : pool.table) {
    if (std::abs(v) > delta) continue;
    bool dup = false;
    for (const RVec& z : zeros) dup = dup || (z - c).norm() < 1e-6;
    if (!dup) zeros.push_back(c);
  }

  auto weight_of = [&](const RVec& c) {
    ExtendedReal w = max_weight(scene, x, coords_to_k(scene, c), tol);
    return w.finite ? w.value : 1e18;
  };

  std::vector<ZeroPair> pairs;
  for (const RVec& z : zeros) {
    SkewHermitian sz = coords_to_k(scene, z);
    std::vector<RVec> partner_candidates;
    partner_candidates.push_back(-z);
    for (const RVec& other : zeros)
      if ((other - z).norm() > 1e-6) partner_candidates.push_back(other);
    for (int trial = 0; trial < 24; ++trial) {
      // Conjugates of -z by compact elements sweep the candidate orbit.
      CMat kmat = mat_exp(random_skew(rng, scene.n, 1.5).mat());
      CMat conj = kmat * (-sz.mat()) * kmat.adjoint();
      // Project back onto the symmetry algebra; keep only honest members.
      double res = 0.0;
      RVec c = k_to_coords(scene, SkewHermitian::project(conj), &res);
      if (res > 1e-8 * (1.0 + c.norm())) continue;
      partner_candidates.push_back(c / c.norm());
    }
    bool paired = false;
    for (RVec u : partner_candidates) {
      u /= u.norm();
      if (std::abs(weight_of(u)) > delta) continue;
      OpposednessResult r = opposed(sz, coords_to_k(scene, u), true, tol);
      if (!r.opposed) continue;
      ZeroPair p;
      p.s_coords = z;
      p.u_coords = u;
      p.cert = r.cert;
      pairs.push_back(std::move(p));
      paired = true;
      break;
    }
    if (!paired) {
      out.verdict = Verdict::NonnegativeNotPolystable;
      out.unpaired_zero = z;
      std::ostringstream os;
      os << "direction with vanishing weight admits no opposed vanishing partner ("
         << partner_candidates.size() << " candidates tried, " << pool.evals
         << " weight evaluations)";
      out.diagnostics = os.str();
      out.evaluations = pool.evals;
      return out;
    }
  }
  out.verdict = Verdict::Polystable;
  out.pairs = std::move(pairs);
  out.min_weight = pool.best;
  out.evaluations = pool.evals;
  return out;
}

// ==========================================================================
// Moment-map norm descent.

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kA[7][6] = {
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kB5[7] = {35.0 / 384,     0, 500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84,       0};
constexpr double kB4[7] = {5179.0 / 57600,    0,           7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

}  // namespace

FlowTrace kempf_ness_flow(const Scene& scene, const CVec& x, const FlowParams& params,
                          const Tolerances& tol) {
  validate_state(scene, x, tol);
  FlowTrace trace;
  std::vector<double> ts, mus, dists;
  int stride = 1;
  auto record = [&](double t, double mu, double dist) {
    if (ts.size() >= static_cast<size_t>(2 * params.trace_len)) {
      std::vector<double> t2, m2, d2;
      for (size_t i = 0; i < ts.size(); i += 2) {
        t2.push_back(ts[i]);
        m2.push_back(mus[i]);
        d2.push_back(dists[i]);
      }
      ts = t2;
      mus = m2;
      dists = d2;
      stride *= 2;
    }
    ts.push_back(t);
    mus.push_back(mu);
    dists.push_back(dist);
  };

  const Eigen::Index n = scene.n;
  CMat g = CMat::Identity(n, n);
  double t = 0.0, h = params.h0;
  CVec y = x;
  double mu = mu_norm(scene, y);
  record(0.0, mu, 0.0);

  // Sphere degeneracy monitor: watch initially separated pairs for collisions.
  std::vector<std::pair<int, int>> watched;
  if (scene.kind == SceneKind::SphereTuple) {
    for (int i = 0; i < scene.tuple_len; ++i)
      for (int j = i + 1; j < scene.tuple_len; ++j)
        if (sphere_angle(sphere_point(scene, x, i), sphere_point(scene, x, j)) >
            3.0 * params.merge_tol)
          watched.push_back({i, j});
  }
  auto monitor_fired = [&](const CVec& state) {
    for (auto [i, j] : watched)
      if (sphere_angle(sphere_point(scene, state, i), sphere_point(scene, state, j)) <
          params.merge_tol)
        return true;
    return false;
  };

  auto finish = [&](FlowOutcome o, const std::string& note) {
    trace.outcome = o;
    trace.note = note;
    trace.g_final = g;
    trace.x_final = y;
    trace.times = Eigen::Map<RVec>(ts.data(), ts.size());
    trace.mu_norms = Eigen::Map<RVec>(mus.data(), mus.size());
    trace.distances = Eigen::Map<RVec>(dists.data(), dists.size());
    return trace;
  };

  if (mu <= params.eps_zero) return finish(FlowOutcome::ConvergedInOrbit, "zero at start");

  auto deriv = [&](const CMat& gm) {
    CVec st = act(scene, gm, x, tol);
    return CMat(Complex(0, -1) * moment(scene, st).mat() * gm);
  };

  long steps = 0;
  bool fired_latch = false;
  while (steps < params.max_steps && t < params.t_max) {
    ++steps;
    bool stage_failed = false;
    CMat k[7];
    try {
      k[0] = deriv(g);
      for (int st = 1; st < 7; ++st) {
        CMat gs = g;
        for (int j = 0; j < st; ++j)
          if (kA[st][j] != 0.0) gs += h * kA[st][j] * k[j];
        k[st] = deriv(gs);
      }
    } catch (const Error&) {
      stage_failed = true;
    }
    CMat g5, g4;
    double mu5 = 0.0;
    CVec y5;
    if (!stage_failed) {
      g5 = g;
      g4 = g;
      for (int j = 0; j < 7; ++j) {
        if (kB5[j] != 0.0) g5 += h * kB5[j] * k[j];
        if (kB4[j] != 0.0) g4 += h * kB4[j] * k[j];
      }
      double err = (g5 - g4).norm() / (params.atol + params.rtol * g5.norm());
      if (err > 1.0) {
        h = std::max(params.h_min, h * std::max(0.2, 0.9 * std::pow(err, -0.2)));
        if (h <= params.h_min)
          fail(Err::StepFailure, "flow step controller stalled below the minimum step");
        continue;
      }
      try {
        y5 = act(scene, g5, x, tol);
        mu5 = mu_norm(scene, y5);
      } catch (const Error&) {
        stage_failed = true;
      }
      if (!stage_failed && mu5 > mu * (1.0 + 1e-9) + 1e-14) stage_failed = true;
      if (!stage_failed) {
        g = g5;
        y = y5;
        mu = mu5;
        t += h;
        double err_scaled = std::max(err, 1e-4);
        h = std::min(h * std::min(5.0, 0.9 * std::pow(err_scaled, -0.2)), params.t_max / 16.0);
      }
    }
    if (stage_failed) {
      h *= 0.5;
      if (h <= params.h_min)
        fail(Err::StepFailure, "flow step controller stalled below the minimum step");
      continue;
    }

    double dist = distance(CMat::Identity(n, n), g, tol);
    record(t, mu, dist);
    if (!fired_latch && monitor_fired(y)) fired_latch = true;

    if (mu <= params.eps_zero) {
      if (dist <= params.dist_cap && !fired_latch)
        return finish(FlowOutcome::ConvergedInOrbit, "moment map vanishes inside the orbit");
      return finish(FlowOutcome::ConvergedDegenerate,
                    fired_latch ? "moment map vanishes after a degeneracy event"
                                : "moment map vanishes beyond the distance cap");
    }
    if (fired_latch && mu <= params.eps_div)
      return finish(FlowOutcome::ConvergedDegenerate,
                    "degeneracy monitor fired while the moment map decays");
    if (dist > params.dist_cap) {
      if (mu <= params.eps_div)
        return finish(FlowOutcome::ConvergedDegenerate,
                      "distance cap reached while the moment map decays");
      return finish(FlowOutcome::Diverged, "distance cap reached with the moment map bounded away from zero");
    }
  }
  return finish(FlowOutcome::BudgetExhausted, "time or step budget exhausted");
}

void write_flow_csv(std::ostream& os, const FlowTrace& trace) {
  os << "t,mu_norm,distance\n";
  char buf[128];
  for (Eigen::Index i = 0; i < trace.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e\n", trace.times[i], trace.mu_norms[i],
                  trace.distances[i]);
    os << buf;
  }
}

// ==========================================================================
// K-orbit comparison.

namespace {

double nelder_mead_min(const std::function<double(const RVec&)>& f, RVec start, int iters) {
  const int d = static_cast<int>(start.size());
  std::vector<std::pair<double, RVec>> simplex;
  simplex.push_back({f(start), start});
  for (int i = 0; i < d; ++i) {
    RVec v = start;
    v[i] += 0.4;
    simplex.push_back({f(v), v});
  }
  auto order = [&] {
    std::sort(simplex.begin(), simplex.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  };
  order();
  for (int it = 0; it < iters; ++it) {
    if (std::abs(simplex.front().first - simplex.back().first) < 1e-13) break;
    RVec centroid = RVec::Zero(d);
    for (int i = 0; i < d; ++i) centroid += simplex[i].second;
    centroid /= d;
    const RVec& worst = simplex[d].second;
    RVec refl = centroid + (centroid - worst);
    double fr = f(refl);
    if (fr < simplex[0].first) {
      RVec exp2 = centroid + 2.0 * (centroid - worst);
      double fe = f(exp2);
      simplex[d] = fe < fr ? std::make_pair(fe, exp2) : std::make_pair(fr, refl);
    } else if (fr < simplex[d - 1].first) {
      simplex[d] = {fr, refl};
    } else {
      RVec con = centroid + 0.5 * (worst - centroid);
      double fc = f(con);
      if (fc < simplex[d].first) {
        simplex[d] = {fc, con};
      } else {
        for (int i = 1; i <= d; ++i) {
          simplex[i].second = simplex[0].second + 0.5 * (simplex[i].second - simplex[0].second);
          simplex[i].first = f(simplex[i].second);
        }
      }
    }
    order();
  }
  return simplex[0].first;
}

}  // namespace

bool korbit_equal(const Scene& scene, const CVec& x1, const CVec& x2, double tol_dist, Rng& rng,
                  const Tolerances& tol) {
  validate_state(scene, x1, tol);
  validate_state(scene, x2, tol);
  if (scene.kind == SceneKind::SphereTuple) {
    // Orthogonal Procrustes alignment is the exact minimizer over rotations.
    const int m = scene.tuple_len;
    Eigen::MatrixXd p(3, m), q(3, m);
    for (int i = 0; i < m; ++i) {
      p.col(i) = sphere_point(scene, x1, i);
      q.col(i) = sphere_point(scene, x2, i);
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(q * p.transpose(),
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
      Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
      flip(2, 2) = -1.0;
      r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    std::vector<Eigen::Vector3d> moved;
    for (int i = 0; i < m; ++i) moved.push_back(r * Eigen::Vector3d(p.col(i)));
    return scene_distance(scene, sphere_state(moved), x2) <= tol_dist;
  }
  auto fval = [&](const RVec& w) {
    return scene_distance(scene, act_k(scene, coords_to_k(scene, w), x1, tol), x2);
  };
  double best = fval(RVec::Zero(scene.kdim()));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < 8 && best > 0.3 * tol_dist; ++s) {
    RVec start(scene.kdim());
    for (int i = 0; i < scene.kdim(); ++i) start[i] = (s == 0) ? 0.0 : gauss(rng);
    best = std::min(best, nelder_mead_min(fval, start, 300));
  }
  return best <= tol_dist;
}

WitnessCheck polystable_witness_check(const Scene& scene, const CVec& x, const SkewHermitian& s,
                                      const SkewHermitian& u, const Tolerances& tol) {
  WitnessCheck out;
  auto vanishes = [&](const SkewHermitian& dir) {
    ExtendedReal w = max_weight(scene, x, dir, tol);
    return w.finite && std::abs(w.value) <= tol.zero_band;
  };
  if (!vanishes(s)) {
    out.failed = "weight of the first direction does not vanish";
    return out;
  }
  if (!vanishes(u)) {
    out.failed = "weight of the second direction does not vanish";
    return out;
  }
  BoundaryPoint es(s, tol), eu(u, tol);
  if (!geodesically_connected(es, eu, tol)) {
    out.failed = "directions are not joined by a geodesic";
    return out;
  }
  out.ok = true;
  try {
    out.connecting = connect_geodesic(es, eu, tol);
  } catch (const Error&) {
    // The certificate stands on the connectivity test; the explicit element
    // is decoration.
  }
  return out;
}

}  // namespace knstab
