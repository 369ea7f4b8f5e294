#include "pudwr/estimator.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace pudwr {

EstimatorPart parse_part(const std::string& s) {
  if (s == "primal") return EstimatorPart::primal;
  if (s == "adjoint") return EstimatorPart::adjoint;
  if (s == "full") return EstimatorPart::full;
  throw std::invalid_argument("unknown estimator '" + s + "'");
}

EstimatorVariant parse_variant(const std::string& s) {
  if (s == "joint") return EstimatorVariant::joint;
  if (s == "split") return EstimatorVariant::split;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

PUKind parse_pu(const std::string& s) {
  if (s == "dg0") return PUKind::dg0;
  if (s == "cg1") return PUKind::cg1;
  throw std::invalid_argument("unknown pu '" + s + "'");
}

std::string to_string(EstimatorPart p) {
  switch (p) {
    case EstimatorPart::primal: return "primal";
    case EstimatorPart::adjoint: return "adjoint";
    case EstimatorPart::full: return "full";
  }
  return "?";
}

std::string to_string(EstimatorVariant v) { return v == EstimatorVariant::joint ? "joint" : "split"; }
std::string to_string(PUKind p) { return p == PUKind::dg0 ? "dg0" : "cg1"; }

void validate(const ParabolicProblem& problem, const EstimatorConfig& cfg) {
  const bool orders_ok = (cfg.s == 1 && (cfg.s_tilde == 1 || cfg.s_tilde == 2)) || (cfg.s == 2 && cfg.s_tilde == 2);
  if (!orders_ok) throw std::invalid_argument("orders must be one of 1/1, 1/2, 2/2");
  if (cfg.pu == PUKind::cg1 &&
      (problem.ncomp != 1 || !problem.linear || cfg.variant != EstimatorVariant::split || cfg.part != EstimatorPart::primal))
    throw UnsupportedVariant("the cG(1) PU is only available for the heat equation with the split primal estimator");
}

SpacePairs make_space_pairs(const ParabolicProblem& problem, const SlabMeshSequence& meshes,
                            const SpaceTimeSolution& primal, const AdjointSolution* adjoint) {
  SpacePairs sp;
  auto pick = [&](int order) {
    if (primal.order == order) return primal.spaces;
    if (adjoint && adjoint->order == order) return adjoint->spaces;
    return build_spaces(problem, meshes, order);
  };
  sp.low = pick(1);
  sp.high = pick(2);
  return sp;
}

namespace {

Vector move_to(const Space& src, const Vector& v, const Space& dst) {
  if (&src == &dst) return v;
  return Transfer(src, dst).apply(v);
}

}  // namespace

SlabFields build_slab_fields(const SpaceTimeSolution& primal, const AdjointSolution* adjoint, const SpacePairs& sp,
                             int n, const EstimatorConfig& cfg) {
  const TemporalMesh& tm = primal.tm;
  const int M = tm.size();
  const std::size_t un = static_cast<std::size_t>(n);
  const Space& L = *sp.low[un];
  const Space& H = *sp.high[un];
  auto low = [&](int m) -> const Space& { return *sp.low[static_cast<std::size_t>(m)]; };
  auto high = [&](int m) -> const Space& { return *sp.high[static_cast<std::size_t>(m)]; };
  SlabFields f;

  // primal "K" (reconstructed / native high) and "KH" (low order in the high space) values
  auto uK_of = [&](int m) -> Vector {
    const Vector& u = primal.u[static_cast<std::size_t>(m)];
    if (primal.order == 2) return move_to(high(m), u, H);
    return reconstruct_up(L, move_to(low(m), u, L), H);
  };
  auto uKH_from = [&](const Space& src, const Vector& u) -> Vector {
    if (primal.order == 2) return embed_up(L, interpolate_down(H, move_to(src, u, H), L), H);
    return embed_up(L, move_to(src, u, L), H);
  };
  f.uK = uK_of(n);
  f.uKH = uKH_from(primal.order == 2 ? high(n) : low(n), primal.u[un]);
  f.ulin = primal.order == 2 ? primal.u[un] : f.uKH;
  if (n > 0)
    f.uKH_prev = uKH_from(primal.order == 2 ? high(n - 1) : low(n - 1), primal.u[un - 1]);
  else
    f.uKH_prev = uKH_from(primal.order == 2 ? high(0) : low(0), primal.u0);
  if (n + 1 < M) {
    f.uK_next = uK_of(n + 1);
  } else if (cfg.extrapolate_boundary && n > 0) {
    f.uK_next = f.uK + (tm.length(n) / tm.length(n - 1)) * (f.uK - uK_of(n - 1));
  } else {
    f.uK_next = f.uK;
  }

  if (!adjoint) return f;
  const std::vector<Vector>& z = adjoint->z;
  auto zK_of = [&](int m) -> Vector {
    const Vector& v = z[static_cast<std::size_t>(m)];
    if (adjoint->order == 2) return move_to(high(m), v, H);
    return reconstruct_up(L, move_to(low(m), v, L), H);
  };
  auto zKH_of = [&](int m) -> Vector {
    const Vector& v = z[static_cast<std::size_t>(m)];
    if (adjoint->order == 2) return embed_up(L, interpolate_down(H, move_to(high(m), v, H), L), H);
    return embed_up(L, move_to(low(m), v, L), H);
  };
  f.zK = zK_of(n);
  f.zKH = zKH_of(n);
  if (n > 0) {
    f.zK_prev = zK_of(n - 1);
  } else if (cfg.extrapolate_boundary && M > 1) {
    f.zK_prev = f.zK - (tm.length(0) / tm.length(1)) * (zK_of(1) - f.zK);
  } else {
    f.zK_prev = f.zK;
  }
  f.zKH_next = n + 1 < M ? zKH_of(n + 1) : Vector::Zero(H.n_dofs());
  return f;
}

namespace {

struct QVal {
  double v[2] = {0.0, 0.0};
  double gx[2] = {0.0, 0.0};
  double gy[2] = {0.0, 0.0};
};

inline QVal eval_q(const double* loc, const ShapeTable& t, int q, int nc, double hx, double hy) {
  QVal r;
  const std::size_t o = static_cast<std::size_t>(q * t.nb);
  for (int i = 0; i < t.nb; ++i) {
    const double p = t.phi[o + static_cast<std::size_t>(i)];
    const double dx = t.dx[o + static_cast<std::size_t>(i)] / hx;
    const double dy = t.dy[o + static_cast<std::size_t>(i)] / hy;
    for (int c = 0; c < nc; ++c) {
      const double a = loc[i * nc + c];
      r.v[c] += a * p;
      r.gx[c] += a * dx;
      r.gy[c] += a * dy;
    }
  }
  return r;
}

inline QVal lincomb(double a, const QVal& x, double b, const QVal& y) {
  QVal r;
  for (int c = 0; c < 2; ++c) {
    r.v[c] = a * x.v[c] + b * y.v[c];
    r.gx[c] = a * x.gx[c] + b * y.gx[c];
    r.gy[c] = a * x.gy[c] + b * y.gy[c];
  }
  return r;
}

// Scatter the four local vertex contributions onto PU nodes; hanging vertices go to their masters.
void scatter(const Space& pu, int cell, const double* local, Vector& out) {
  const int* nodes = pu.cell_nodes(cell);
  const Constraints& hc = pu.hanging_constraints();
  for (int a = 0; a < 4; ++a) {
    const int nd = nodes[a];
    if (pu.node_is_hanging(nd)) {
      for (auto [mst, w] : hc.entries(nd)) out[mst] += w * local[a];
    } else {
      out[nd] += local[a];
    }
  }
}

}  // namespace

SlabIndicators evaluate_slab(const ParabolicProblem& problem, const GoalFunctional& goal, const Space& H,
                             const Space& pu, const TemporalMesh& tm, int n, const SlabFields& f,
                             const EstimatorConfig& cfg) {
  const int nc = problem.ncomp;
  const int G = cfg.spatial_gauss;
  const ShapeTable th_main = make_shape_table(2, G);
  const ShapeTable tl_main = make_shape_table(1, G);
  const int GR = cfg.reaction_gauss > 0 ? cfg.reaction_gauss : cfg.s + 1;
  const bool split_reaction = problem.has_reaction() && GR != G;
  const ShapeTable th_react = make_shape_table(2, GR);
  const ShapeTable tl_react = make_shape_table(1, GR);
  const QuadRule1D tr = time_rule(cfg.f_rule);
  const std::size_t nt = tr.x.size();
  const double k = tm.length(n), t0 = tm.start(n);
  const bool want_primal = cfg.part != EstimatorPart::adjoint;
  const bool want_adjoint = cfg.part != EstimatorPart::primal;
  const bool cg = cfg.pu == PUKind::cg1;
  const int npu = pu.n_nodes();

  SlabIndicators out;
  auto zero = [&]() -> Vector { return Vector::Zero(npu); };
  if (want_primal) out.primal_k = zero(), out.primal_h = zero(), out.primal_kh = zero();
  if (want_adjoint) out.adjoint_k = zero(), out.adjoint_h = zero(), out.adjoint_kh = zero();
  if (cg)
    for (int j = 0; j < 2; ++j) out.cg_k[static_cast<std::size_t>(j)] = zero(), out.cg_h[static_cast<std::size_t>(j)] = zero();

  // temporal moments of the rule
  double c_tm1 = 0.0, c_t = 0.0;
  double cg_c1[2] = {0.0, 0.0}, cg_c0[2] = {0.0, 0.0};
  for (std::size_t r = 0; r < nt; ++r) {
    c_tm1 += tr.w[r] * (tr.x[r] - 1.0);
    c_t += tr.w[r] * tr.x[r];
    const double psi[2] = {1.0 - tr.x[r], tr.x[r]};
    for (int j = 0; j < 2; ++j) {
      cg_c1[j] += tr.w[r] * (tr.x[r] - 1.0) * psi[j];
      cg_c0[j] += tr.w[r] * psi[j];
    }
  }
  const double cg_psi0[2] = {1.0, 0.0};

  const std::vector<const Vector*> fields = {&f.uK, &f.uKH, &f.uKH_prev, &f.uK_next, &f.ulin,
                                             &f.zK, &f.zKH, &f.zK_prev, &f.zKH_next};
  constexpr int kUK = 0, kUKH = 1, kUKHp = 2, kUKn = 3, kUlin = 4, kZK = 5, kZKH = 6, kZKp = 7, kZKHn = 8;
  std::vector<std::array<double, 18>> loc(fields.size());
  std::vector<char> present(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) present[i] = fields[i]->size() == H.n_dofs();
  if (!present[kZK] || !present[kZKH] || !present[kZKp] || !present[kZKHn])
    throw std::invalid_argument("estimator needs the adjoint weights");

  const double D[2] = {problem.diffusion[0], problem.diffusion[1]};
  auto dot = [nc](const double* a, const double* b) {
    double s = 0.0;
    for (int c = 0; c < nc; ++c) s += a[c] * b[c];
    return s;
  };

  double lp_k[4], lp_h[4], lp_kh[4], la_k[4], la_h[4], la_kh[4], lc_k[2][4], lc_h[2][4];
  QVal fv[9];
  for (int cell = 0; cell < H.n_cells(); ++cell) {
    const CellGeometry g = H.mesh().geometry(cell);
    const double jac = g.hx * g.hy;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (present[i]) gather(H, *fields[i], cell, loc[i].data());
    for (int a = 0; a < 4; ++a) {
      lp_k[a] = lp_h[a] = lp_kh[a] = la_k[a] = la_h[a] = la_kh[a] = 0.0;
      lc_k[0][a] = lc_k[1][a] = lc_h[0][a] = lc_h[1][a] = 0.0;
    }
    // main = all terms except the reaction, react = reaction terms only
    auto pass = [&](const ShapeTable& th, const ShapeTable& tl, bool main, bool react) {
    const double Dm[2] = {main ? D[0] : 0.0, main ? D[1] : 0.0};
    for (int q = 0; q < th.nq(); ++q) {
      for (std::size_t i = 0; i < fields.size(); ++i)
        fv[i] = present[i] ? eval_q(loc[i].data(), th, q, nc, g.hx, g.hy) : QVal{};
      const double wq = th.w[static_cast<std::size_t>(q)] * jac;
      const Point ref = th.pts[static_cast<std::size_t>(q)];
      const Point x{g.x0 + ref.x * g.hx, g.y0 + ref.y * g.hy};
      const std::size_t o = static_cast<std::size_t>(q * 4);

      if (want_primal) {
        const QVal& u = fv[kUKH];
        const QVal dz = lincomb(1.0, fv[kZK], -1.0, fv[kZKp]);
        const QVal w = lincomb(1.0, fv[kZK], -1.0, fv[kZKH]);
        double jump[2] = {0.0, 0.0};
        if (main) jump[0] = u.v[0] - fv[kUKHp].v[0], jump[1] = u.v[1] - fv[kUKHp].v[1];
        double F[2] = {0.0, 0.0}, dF[4];
        if (react && problem.has_reaction()) problem.reaction(u.v, F, dF);
        double fq[3][2] = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
        if (main && problem.source)
          for (std::size_t r = 0; r < nt; ++r)
            for (int c = 0; c < nc; ++c) fq[r][c] = problem.source(c, t0 + tr.x[r] * k, x);
        for (int a = 0; a < 4; ++a) {
          const double chi = tl.phi[o + static_cast<std::size_t>(a)];
          const double cx = tl.dx[o + static_cast<std::size_t>(a)] / g.hx, cy = tl.dy[o + static_cast<std::size_t>(a)] / g.hy;
          // a-bar(u)(phi chi) for a test function phi
          auto A = [&](const QVal& p) {
            double s = 0.0;
            for (int c = 0; c < nc; ++c)
              s += F[c] * p.v[c] * chi +
                   Dm[c] * (u.gx[c] * (chi * p.gx[c] + p.v[c] * cx) + u.gy[c] * (chi * p.gy[c] + p.v[c] * cy));
            return s;
          };
          const double A_dz = A(dz), A_w = A(w);
          double f_dz_t = 0.0, f_w = 0.0, f_joint = 0.0, A_joint = 0.0;
          double f_cg_k[2] = {0.0, 0.0}, f_cg_h[2] = {0.0, 0.0};
          for (std::size_t r = 0; r < nt; ++r) {
            const double tau = tr.x[r];
            const double fdz = dot(fq[r], dz.v), fw = dot(fq[r], w.v);
            f_dz_t += tr.w[r] * (tau - 1.0) * fdz;
            f_w += tr.w[r] * fw;
            const QVal phi = lincomb(tau - 1.0, dz, 1.0, w);
            f_joint += tr.w[r] * dot(fq[r], phi.v);
            A_joint += tr.w[r] * A(phi);
            if (cg) {
              const double psi[2] = {1.0 - tau, tau};
              for (int j = 0; j < 2; ++j) {
                f_cg_k[j] += tr.w[r] * (tau - 1.0) * psi[j] * fdz;
                f_cg_h[j] += tr.w[r] * psi[j] * fw;
              }
            }
          }
          const double jdz = dot(jump, dz.v) * chi, jw = dot(jump, w.v) * chi;
          lp_k[a] += wq * (k * chi * f_dz_t - k * c_tm1 * A_dz + jdz);
          lp_h[a] += wq * (k * chi * f_w - k * A_w - jw);
          const QVal phi0 = lincomb(-1.0, dz, 1.0, w);
          lp_kh[a] += wq * (k * chi * f_joint - k * A_joint - dot(jump, phi0.v) * chi);
          if (cg)
            for (int j = 0; j < 2; ++j) {
              lc_k[j][a] += wq * (k * chi * f_cg_k[j] - k * cg_c1[j] * A_dz + cg_psi0[j] * jdz);
              lc_h[j][a] += wq * (k * chi * f_cg_h[j] - k * cg_c0[j] * A_w - cg_psi0[j] * jw);
            }
        }
      }

      if (want_adjoint) {
        const QVal& u = fv[kUKH];
        const QVal& z = fv[kZKH];
        const QVal du = lincomb(1.0, fv[kUKn], -1.0, fv[kUK]);
        const QVal ph = lincomb(1.0, fv[kUK], -1.0, fv[kUKH]);
        double zj[2] = {0.0, 0.0};
        if (main) zj[0] = fv[kZKHn].v[0] - z.v[0], zj[1] = fv[kZKHn].v[1] - z.v[1];
        double F[2], dF[4] = {0.0, 0.0, 0.0, 0.0};
        if (react && problem.has_reaction()) problem.reaction(u.v, F, dF);
        double dq[3][2] = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
        if (main && goal.has_volume_density())
          for (std::size_t r = 0; r < nt; ++r) {
            if (r == 0 || goal.time_dependent_density())
              goal.volume_density(t0 + tr.x[r] * k, x, fv[kUlin].v, dq[r]);
            else
              dq[r][0] = dq[0][0], dq[r][1] = dq[0][1];
          }
        for (int a = 0; a < 4; ++a) {
          const double chi = tl.phi[o + static_cast<std::size_t>(a)];
          const double cx = tl.dx[o + static_cast<std::size_t>(a)] / g.hx, cy = tl.dy[o + static_cast<std::size_t>(a)] / g.hy;
          // a-bar'(u)(phi chi, z)
          auto Ap = [&](const QVal& p) {
            double s = 0.0;
            for (int c = 0; c < nc; ++c) {
              double lin = 0.0;
              for (int d = 0; d < nc; ++d) lin += dF[c * nc + d] * p.v[d];
              s += lin * chi * z.v[c] +
                   Dm[c] * ((chi * p.gx[c] + p.v[c] * cx) * z.gx[c] + (chi * p.gy[c] + p.v[c] * cy) * z.gy[c]);
            }
            return s;
          };
          double j_du = 0.0, j_ph = 0.0, j_joint = 0.0, A_joint = 0.0;
          for (std::size_t r = 0; r < nt; ++r) {
            const double tau = tr.x[r];
            j_du += tr.w[r] * tau * dot(dq[r], du.v);
            j_ph += tr.w[r] * dot(dq[r], ph.v);
            const QVal phi = lincomb(tau, du, 1.0, ph);
            j_joint += tr.w[r] * dot(dq[r], phi.v);
            A_joint += tr.w[r] * Ap(phi);
          }
          const QVal phi1 = lincomb(1.0, du, 1.0, ph);
          la_k[a] += wq * (k * chi * j_du - k * c_t * Ap(du) + dot(du.v, zj) * chi);
          la_h[a] += wq * (k * chi * j_ph - k * Ap(ph) + dot(ph.v, zj) * chi);
          la_kh[a] += wq * (k * chi * j_joint - k * A_joint + dot(phi1.v, zj) * chi);
        }
      }
    }

    };
    if (split_reaction) {
      pass(th_main, tl_main, true, false);
      pass(th_react, tl_react, false, true);
    } else {
      pass(th_main, tl_main, true, true);
    }

    if (want_primal) {
      scatter(pu, cell, lp_k, out.primal_k);
      scatter(pu, cell, lp_h, out.primal_h);
      scatter(pu, cell, lp_kh, out.primal_kh);
      if (cg)
        for (int j = 0; j < 2; ++j) {
          scatter(pu, cell, lc_k[j], out.cg_k[static_cast<std::size_t>(j)]);
          scatter(pu, cell, lc_h[j], out.cg_h[static_cast<std::size_t>(j)]);
        }
    }
    if (want_adjoint) {
      scatter(pu, cell, la_k, out.adjoint_k);
      scatter(pu, cell, la_h, out.adjoint_h);
      scatter(pu, cell, la_kh, out.adjoint_kh);
    }
  }

  // Robin faces and boundary goal densities
  const bool robin = problem.robin[0] != 0.0 || problem.robin[1] != 0.0;
  if (robin || goal.has_boundary_density()) {
    for (const BoundaryFace& bf : H.boundary_faces()) {
      if (bf.kind != BoundaryKind::Robin) continue;
      const ShapeTable eh = make_edge_table(2, G, bf.dir);
      const ShapeTable el = make_edge_table(1, G, bf.dir);
      const CellGeometry g = H.mesh().geometry(bf.cell);
      const double len = bf.dir < 2 ? g.hy : g.hx;
      for (std::size_t i = 0; i < fields.size(); ++i)
        if (present[i]) gather(H, *fields[i], bf.cell, loc[i].data());
      for (int a = 0; a < 4; ++a) lp_k[a] = lp_h[a] = lp_kh[a] = la_k[a] = la_h[a] = la_kh[a] = 0.0;
      for (int q = 0; q < eh.nq(); ++q) {
        for (std::size_t i = 0; i < fields.size(); ++i)
          fv[i] = present[i] ? eval_q(loc[i].data(), eh, q, nc, g.hx, g.hy) : QVal{};
        const double wq = eh.w[static_cast<std::size_t>(q)] * len;
        const std::size_t o = static_cast<std::size_t>(q * 4);
        double bd[2] = {0.0, 0.0};
        if (goal.has_boundary_density()) goal.boundary_density(0.0, {}, nullptr, bd);
        for (int a = 0; a < 4; ++a) {
          const double chi = el.phi[o + static_cast<std::size_t>(a)];
          if (chi == 0.0) continue;
          if (want_primal) {
            const QVal dz = lincomb(1.0, fv[kZK], -1.0, fv[kZKp]);
            const QVal w = lincomb(1.0, fv[kZK], -1.0, fv[kZKH]);
            double r_dz = 0.0, r_w = 0.0, r_joint = 0.0;
            for (int c = 0; c < nc; ++c) {
              const double ku = problem.robin[static_cast<std::size_t>(c)] * fv[kUKH].v[c] * chi;
              r_dz += ku * dz.v[c];
              r_w += ku * w.v[c];
              for (std::size_t r = 0; r < nt; ++r) r_joint += tr.w[r] * ku * ((tr.x[r] - 1.0) * dz.v[c] + w.v[c]);
            }
            lp_k[a] += wq * (-k * c_tm1 * r_dz);
            lp_h[a] += wq * (-k * r_w);
            lp_kh[a] += wq * (-k * r_joint);
          }
          if (want_adjoint) {
            const QVal du = lincomb(1.0, fv[kUKn], -1.0, fv[kUK]);
            const QVal ph = lincomb(1.0, fv[kUK], -1.0, fv[kUKH]);
            double r_du = 0.0, r_ph = 0.0, r_joint = 0.0, j_du = 0.0, j_ph = 0.0, j_joint = 0.0;
            for (int c = 0; c < nc; ++c) {
              const double kz = problem.robin[static_cast<std::size_t>(c)] * fv[kZKH].v[c] * chi;
              r_du += kz * du.v[c];
              r_ph += kz * ph.v[c];
              j_du += bd[c] * du.v[c] * chi;
              j_ph += bd[c] * ph.v[c] * chi;
              for (std::size_t r = 0; r < nt; ++r) {
                const double phi = tr.x[r] * du.v[c] + ph.v[c];
                r_joint += tr.w[r] * kz * phi;
                j_joint += tr.w[r] * bd[c] * phi * chi;
              }
            }
            la_k[a] += wq * (k * c_t * j_du - k * c_t * r_du);
            la_h[a] += wq * (k * j_ph - k * r_ph);
            la_kh[a] += wq * (k * j_joint - k * r_joint);
          }
        }
      }
      if (want_primal) {
        scatter(pu, bf.cell, lp_k, out.primal_k);
        scatter(pu, bf.cell, lp_h, out.primal_h);
        scatter(pu, bf.cell, lp_kh, out.primal_kh);
      }
      if (want_adjoint) {
        scatter(pu, bf.cell, la_k, out.adjoint_k);
        scatter(pu, bf.cell, la_h, out.adjoint_h);
        scatter(pu, bf.cell, la_kh, out.adjoint_kh);
      }
    }
  }
  return out;
}

std::vector<double> element_indicators(const Space& pu, const Vector& v) {
  std::vector<double> out(static_cast<std::size_t>(pu.n_cells()));
  for (int c = 0; c < pu.n_cells(); ++c) {
    const int* nodes = pu.cell_nodes(c);
    double s = 0.0;
    for (int a = 0; a < 4; ++a) s += v[nodes[a]];
    out[static_cast<std::size_t>(c)] = s;
  }
  return out;
}

namespace {

Vector combine(const EstimatorConfig& cfg, const Vector& p, const Vector& a) {
  switch (cfg.part) {
    case EstimatorPart::primal: return p;
    case EstimatorPart::adjoint: return a;
    case EstimatorPart::full: return 0.5 * (p + a);
  }
  return p;
}

}  // namespace

EstimateReport estimate(const ParabolicProblem& problem, const GoalFunctional& goal, const SpaceTimeSolution& primal,
                        const AdjointSolution* adjoint, const SlabMeshSequence& meshes, const EstimatorConfig& cfg,
                        double J_value, std::optional<double> error) {
  validate(problem, cfg);
  if (cfg.s != primal.order || !adjoint || cfg.s_tilde != adjoint->order)
    throw std::invalid_argument("estimator orders do not match the solutions");
  const TemporalMesh& tm = primal.tm;
  const int M = tm.size();
  const SpacePairs sp = make_space_pairs(problem, meshes, primal, adjoint);
  std::vector<SpacePtr> pu(static_cast<std::size_t>(M));
  for (int n = 0; n < M; ++n) {
    const std::size_t un = static_cast<std::size_t>(n);
    if (n > 0 && sp.low[un] == sp.low[un - 1]) {
      pu[un] = pu[un - 1];
    } else if (problem.ncomp == 1) {
      pu[un] = sp.low[un];
    } else {
      pu[un] = std::make_shared<const Space>(meshes[un], 1, 1, problem.marker);
    }
  }

  EstimateReport rep;
  rep.J = J_value;
  rep.error = error;
  rep.slabs.resize(static_cast<std::size_t>(M));
  std::vector<std::array<Vector, 2>> cgk, cgh;
  if (cfg.pu == PUKind::cg1) cgk.resize(static_cast<std::size_t>(M)), cgh.resize(static_cast<std::size_t>(M));
  double abs_sum = 0.0;
  for (int n = 0; n < M; ++n) {
    const std::size_t un = static_cast<std::size_t>(n);
    const SlabFields f = build_slab_fields(primal, adjoint, sp, n, cfg);
    const SlabIndicators ind = evaluate_slab(problem, goal, *sp.high[un], *pu[un], tm, n, f, cfg);
    SlabEstimate& se = rep.slabs[un];
    se.dof_k = combine(cfg, ind.primal_k, ind.adjoint_k);
    se.dof_h = combine(cfg, ind.primal_h, ind.adjoint_h);
    se.dof_kh = combine(cfg, ind.primal_kh, ind.adjoint_kh);
    se.eta_k = se.dof_k.sum();
    se.eta_h = se.dof_h.sum();
    se.eta_kh = se.dof_kh.sum();
    if (cfg.variant == EstimatorVariant::split)
      abs_sum += se.dof_k.cwiseAbs().sum() + se.dof_h.cwiseAbs().sum();
    else
      abs_sum += se.dof_kh.cwiseAbs().sum();
    if (cfg.pu == PUKind::cg1) {
      cgk[un] = ind.cg_k;
      cgh[un] = ind.cg_h;
    } else {
      se.temporal_mark = se.eta_k;
      se.cells = element_indicators(*pu[un], cfg.variant == EstimatorVariant::split ? se.dof_h : se.dof_kh);
    }
    rep.eta_k += se.eta_k;
    rep.eta_h += se.eta_h;
    rep.eta += cfg.variant == EstimatorVariant::split ? se.eta_k + se.eta_h : se.eta_kh;
  }
  if (cfg.pu == PUKind::cg1) {
    for (int n = 0; n < M; ++n) {
      const std::size_t un = static_cast<std::size_t>(n);
      SlabEstimate& se = rep.slabs[un];
      double tk = cgk[un][0].sum() + cgk[un][1].sum();
      if (n > 0) tk += cgk[un - 1][1].sum();
      if (n + 1 < M) tk += cgk[un + 1][0].sum();
      se.temporal_mark = tk;
      Vector h = cgh[un][0] + cgh[un][1];
      auto add_from = [&](int m, int fam) {
        const std::size_t um = static_cast<std::size_t>(m);
        Vector v = pu[um] == pu[un] ? cgh[um][static_cast<std::size_t>(fam)]
                                    : Transfer(*pu[um], *pu[un]).apply(cgh[um][static_cast<std::size_t>(fam)]);
        for (const HangingNode& hn : pu[un]->hanging_nodes()) v[hn.node] = 0.0;
        h += v;
      };
      if (n > 0) add_from(n - 1, 1);
      if (n + 1 < M) add_from(n + 1, 0);
      se.cells = element_indicators(*pu[un], h);
    }
  }
  if (error) {
    if (*error != 0.0) rep.I_eff = rep.eta / *error;
    if (abs_sum > 0.0) rep.I_ind = std::abs(*error) / abs_sum;
  }
  return rep;
}

}  // namespace pudwr
