#include "pudwr/solver.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pudwr {

namespace {

const ShapeTable& cell_table(int order, int n) {
  static const ShapeTable t[2][5] = {
      {make_shape_table(1, 1), make_shape_table(1, 2), make_shape_table(1, 3), make_shape_table(1, 4), make_shape_table(1, 5)},
      {make_shape_table(2, 1), make_shape_table(2, 2), make_shape_table(2, 3), make_shape_table(2, 4), make_shape_table(2, 5)}};
  return t[order - 1][n - 1];
}

const ShapeTable& edge_table(int order, int dir) {
  static const ShapeTable t[2][4] = {
      {make_edge_table(1, 3, 0), make_edge_table(1, 3, 1), make_edge_table(1, 3, 2), make_edge_table(1, 3, 3)},
      {make_edge_table(2, 3, 0), make_edge_table(2, 3, 1), make_edge_table(2, 3, 2), make_edge_table(2, 3, 3)}};
  return t[order - 1][dir];
}

}  // namespace

Assembler::Assembler(const ParabolicProblem& problem, SpacePtr space) : problem_(&problem), space_(std::move(space)) {
  if (space_->n_components() != problem.ncomp) throw std::invalid_argument("space and problem component counts differ");
}

const SparseMatrix& Assembler::mass() const {
  if (have_mass_) return mass_;
  const Space& s = *space_;
  const ShapeTable& tab = cell_table(s.order(), s.order() + 1);
  const int nb = tab.nb, nc = s.n_components();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(s.n_cells() * nb * nb * nc));
  std::vector<double> loc(static_cast<std::size_t>(nb * nb));
  for (int c = 0; c < s.n_cells(); ++c) {
    const CellGeometry g = s.mesh().geometry(c);
    std::fill(loc.begin(), loc.end(), 0.0);
    for (int q = 0; q < tab.nq(); ++q) {
      const double w = tab.w[static_cast<std::size_t>(q)] * g.hx * g.hy;
      const double* phi = &tab.phi[static_cast<std::size_t>(q * nb)];
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) loc[static_cast<std::size_t>(i * nb + j)] += w * phi[i] * phi[j];
    }
    const int* nodes = s.cell_nodes(c);
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j)
        for (int cc = 0; cc < nc; ++cc)
          t.emplace_back(s.dof(nodes[i], cc), s.dof(nodes[j], cc), loc[static_cast<std::size_t>(i * nb + j)]);
  }
  mass_.resize(s.n_dofs(), s.n_dofs());
  mass_.setFromTriplets(t.begin(), t.end());
  have_mass_ = true;
  return mass_;
}

const SparseMatrix& Assembler::stiffness() const {
  if (have_stiff_) return stiff_;
  const Space& s = *space_;
  const ShapeTable& tab = cell_table(s.order(), s.order() + 1);
  const int nb = tab.nb, nc = s.n_components();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(s.n_cells() * nb * nb * nc));
  std::vector<double> loc(static_cast<std::size_t>(nb * nb));
  for (int c = 0; c < s.n_cells(); ++c) {
    const CellGeometry g = s.mesh().geometry(c);
    std::fill(loc.begin(), loc.end(), 0.0);
    const double ax = g.hy / g.hx, ay = g.hx / g.hy;
    for (int q = 0; q < tab.nq(); ++q) {
      const double w = tab.w[static_cast<std::size_t>(q)];
      const double* dx = &tab.dx[static_cast<std::size_t>(q * nb)];
      const double* dy = &tab.dy[static_cast<std::size_t>(q * nb)];
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) loc[static_cast<std::size_t>(i * nb + j)] += w * (ax * dx[i] * dx[j] + ay * dy[i] * dy[j]);
    }
    const int* nodes = s.cell_nodes(c);
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j)
        for (int cc = 0; cc < nc; ++cc)
          t.emplace_back(s.dof(nodes[i], cc), s.dof(nodes[j], cc),
                         problem_->diffusion[static_cast<std::size_t>(cc)] * loc[static_cast<std::size_t>(i * nb + j)]);
  }
  for (const BoundaryFace& f : s.boundary_faces()) {
    if (f.kind != BoundaryKind::Robin) continue;
    const ShapeTable& et = edge_table(s.order(), f.dir);
    const CellGeometry g = s.mesh().geometry(f.cell);
    const double len = f.dir < 2 ? g.hy : g.hx;
    const int* nodes = s.cell_nodes(f.cell);
    for (int q = 0; q < et.nq(); ++q) {
      const double* phi = &et.phi[static_cast<std::size_t>(q * nb)];
      const double w = et.w[static_cast<std::size_t>(q)] * len;
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
          for (int cc = 0; cc < nc; ++cc) {
            const double kap = problem_->robin[static_cast<std::size_t>(cc)];
            if (kap != 0.0 && phi[i] * phi[j] != 0.0)
              t.emplace_back(s.dof(nodes[i], cc), s.dof(nodes[j], cc), kap * w * phi[i] * phi[j]);
          }
    }
  }
  stiff_.resize(s.n_dofs(), s.n_dofs());
  stiff_.setFromTriplets(t.begin(), t.end());
  have_stiff_ = true;
  return stiff_;
}

Vector Assembler::load(double t) const {
  const Space& s = *space_;
  Vector b = Vector::Zero(s.n_dofs());
  if (!problem_->source) return b;
  const ShapeTable& tab = cell_table(s.order(), s.order() + 2);
  const int nb = tab.nb, nc = s.n_components();
  for (int c = 0; c < s.n_cells(); ++c) {
    const CellGeometry g = s.mesh().geometry(c);
    const int* nodes = s.cell_nodes(c);
    for (int q = 0; q < tab.nq(); ++q) {
      const Point r = tab.pts[static_cast<std::size_t>(q)];
      const Point x{g.x0 + r.x * g.hx, g.y0 + r.y * g.hy};
      const double w = tab.w[static_cast<std::size_t>(q)] * g.hx * g.hy;
      for (int cc = 0; cc < nc; ++cc) {
        const double f = w * problem_->source(cc, t, x);
        for (int i = 0; i < nb; ++i) b[s.dof(nodes[i], cc)] += f * tab.phi[static_cast<std::size_t>(q * nb + i)];
      }
    }
  }
  return b;
}

void Assembler::reaction(const Vector& u, Vector* F, SparseMatrix* J) const {
  const Space& s = *space_;
  if (F) *F = Vector::Zero(s.n_dofs());
  if (J) J->resize(s.n_dofs(), s.n_dofs());
  if (!problem_->has_reaction()) return;
  const ShapeTable& tab = cell_table(s.order(), s.order() + 1);
  const int nb = tab.nb, nc = s.n_components();
  std::vector<Triplet> t;
  if (J) t.reserve(static_cast<std::size_t>(s.n_cells() * nb * nb * nc * nc));
  double loc[18];
  std::vector<double> jl(static_cast<std::size_t>(nb * nb * nc * nc));
  for (int c = 0; c < s.n_cells(); ++c) {
    const CellGeometry g = s.mesh().geometry(c);
    const int* nodes = s.cell_nodes(c);
    gather(s, u, c, loc);
    std::fill(jl.begin(), jl.end(), 0.0);
    for (int q = 0; q < tab.nq(); ++q) {
      const double* phi = &tab.phi[static_cast<std::size_t>(q * nb)];
      double v[2] = {0.0, 0.0};
      for (int i = 0; i < nb; ++i)
        for (int cc = 0; cc < nc; ++cc) v[cc] += loc[i * nc + cc] * phi[i];
      double Fq[2] = {0.0, 0.0}, dF[4] = {0.0, 0.0, 0.0, 0.0};
      problem_->reaction(v, Fq, dF);
      const double w = tab.w[static_cast<std::size_t>(q)] * g.hx * g.hy;
      if (F)
        for (int i = 0; i < nb; ++i)
          for (int cc = 0; cc < nc; ++cc) (*F)[s.dof(nodes[i], cc)] += w * Fq[cc] * phi[i];
      if (J)
        for (int i = 0; i < nb; ++i)
          for (int j = 0; j < nb; ++j)
            for (int a = 0; a < nc; ++a)
              for (int b = 0; b < nc; ++b)
                jl[static_cast<std::size_t>(((i * nb + j) * nc + a) * nc + b)] += w * dF[a * nc + b] * phi[i] * phi[j];
    }
    if (J)
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
          for (int a = 0; a < nc; ++a)
            for (int b = 0; b < nc; ++b)
              t.emplace_back(s.dof(nodes[i], a), s.dof(nodes[j], b), jl[static_cast<std::size_t>(((i * nb + j) * nc + a) * nc + b)]);
  }
  if (J) J->setFromTriplets(t.begin(), t.end());
}

Vector Assembler::abar(const Vector& u) const {
  Vector r = stiffness() * u;
  if (problem_->has_reaction()) {
    Vector F;
    reaction(u, &F, nullptr);
    r += F;
  }
  return r;
}

SparseMatrix Assembler::abar_jacobian(const Vector& u) const {
  if (!problem_->has_reaction()) return stiffness();
  SparseMatrix J;
  reaction(u, nullptr, &J);
  return SparseMatrix(stiffness() + J);
}

std::vector<SpacePtr> build_spaces(const ParabolicProblem& problem, const SlabMeshSequence& meshes, int order) {
  std::vector<SpacePtr> out;
  out.reserve(meshes.size());
  for (std::size_t m = 0; m < meshes.size(); ++m) {
    if (m > 0 && (meshes[m] == meshes[m - 1] || meshes[m]->same_cells(*meshes[m - 1]))) {
      out.push_back(out.back());
      continue;
    }
    out.push_back(std::make_shared<const Space>(meshes[m], order, problem.ncomp, problem.marker));
  }
  return out;
}

Vector primal_slab_rhs(const ParabolicProblem& problem, const Assembler& as, const TemporalMesh& tm, int m,
                       const Vector& u_prev, TimeQuad f_rule) {
  Vector b = as.mass() * u_prev;
  if (problem.source) {
    const QuadRule1D tr = time_rule(f_rule);
    const double k = tm.length(m);
    for (std::size_t q = 0; q < tr.x.size(); ++q) b += k * tr.w[q] * as.load(tm.start(m) + tr.x[q] * k);
  }
  return b;
}

Vector primal_slab_residual(const ParabolicProblem& problem, const Assembler& as, const TemporalMesh& tm, int m,
                            const Vector& u_prev, const Vector& u, TimeQuad f_rule) {
  return primal_slab_rhs(problem, as, tm, m, u_prev, f_rule) - as.mass() * u - tm.length(m) * as.abar(u);
}

namespace {

struct LinearCache {
  const Space* space = nullptr;
  double k = -1.0;
  SparseMatrix K;
  DirectSolver solver;
  bool valid(const Space* s, double kk) const { return space == s && k == kk && solver.factored(); }
};

Vector newton_slab(const ParabolicProblem& problem, const Assembler& as, const TemporalMesh& tm, int m,
                   const Vector& up, const Constraints& C, const PrimalOptions& opt) {
  const Space& s = as.space();
  const double k = tm.length(m);
  const NewtonConfig& nc = opt.newton;
  const Constraints Ch = s.constraints(nullptr);
  Vector fbar = Vector::Zero(s.n_dofs());
  if (problem.source) fbar = primal_slab_rhs(problem, as, tm, m, Vector::Zero(s.n_dofs()), opt.f_rule);
  const Vector Mup = as.mass() * up;
  auto residual = [&](const Vector& v) {
    Vector r = as.mass() * v - Mup + k * as.abar(v) - fbar;
    Ch.condense_vector(r);
    return r;
  };
  Vector u = up;
  C.distribute(u);
  Vector r = residual(u);
  double rn = r.norm();
  NewtonStep log{m, {rn}, {}, 0};
  DirectSolver solver;
  auto assemble = [&](const Vector& at) {
    SparseMatrix J = as.mass() + k * as.abar_jacobian(at);
    solver.factor(condense_matrix(J, Ch));
    ++log.assemblies;
  };
  assemble(u);
  bool fresh = true;
  int it = 0;
  while (rn > nc.tol) {
    if (it >= nc.max_iter) {
      std::ostringstream os;
      os << "Newton did not converge on slab " << m << " after " << it << " iterations, residual " << rn;
      throw SolverError(os.str());
    }
    Vector d = solver.solve(-r);
    Ch.distribute_homogeneous(d);
    double alpha = 1.0;
    Vector v, rv;
    double rvn = 0.0;
    bool ok = false;
    while (alpha >= nc.min_alpha) {
      v = u + alpha * d;
      bool finite = true;
      try {
        rv = residual(v);
        rvn = rv.norm();
        finite = std::isfinite(rvn);
      } catch (const std::domain_error&) {
        finite = false;
      }
      if (finite && rvn < (1.0 - 1e-4 * alpha) * rn) {
        ok = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!ok) {
      if (!fresh) {
        assemble(u);
        fresh = true;
        continue;
      }
      std::ostringstream os;
      os << "Newton line search failed on slab " << m << ", residual " << rn;
      throw SolverError(os.str());
    }
    const double ratio = rvn / rn;
    u = std::move(v);
    r = std::move(rv);
    rn = rvn;
    ++it;
    log.residuals.push_back(rn);
    log.alphas.push_back(alpha);
    if (rn > nc.tol && ratio >= nc.rho_skip) {
      assemble(u);
      fresh = true;
    } else {
      fresh = false;
    }
  }
  if (opt.newton_log) opt.newton_log->push_back(std::move(log));
  return u;
}

}  // namespace

SpaceTimeSolution solve_primal(const ParabolicProblem& problem, const SlabMeshSequence& meshes, const TemporalMesh& tm,
                               int order, const PrimalOptions& opt) {
  if (static_cast<int>(meshes.size()) != tm.size()) throw std::invalid_argument("one mesh per interval expected");
  SpaceTimeSolution sol;
  sol.order = order;
  sol.tm = tm;
  sol.spaces = build_spaces(problem, meshes, order);
  const std::function<double(int, Point)> init = [&](int c, Point x) { return problem.initial_value(c, x); };
  sol.u0 = interpolate_function(*sol.spaces[0], init);
  Vector prev = sol.u0;
  SpacePtr prev_space = sol.spaces[0];
  std::unique_ptr<Assembler> as;
  LinearCache cache;
  for (int m = 0; m < tm.size(); ++m) {
    const SpacePtr& S = sol.spaces[static_cast<std::size_t>(m)];
    if (!as || as->space_ptr() != S) as = std::make_unique<Assembler>(problem, S);
    Vector up = prev_space == S ? prev : Transfer(*prev_space, *S).apply(prev);
    const double tm_end = tm.end(m);
    const std::function<double(int, Point)> g = [&](int c, Point x) { return problem.dirichlet_value(c, tm_end, x); };
    const Constraints C = S->constraints(&g);
    Vector u;
    if (problem.linear) {
      const double k = tm.length(m);
      if (!cache.valid(S.get(), k)) {
        cache.space = S.get();
        cache.k = k;
        cache.K = as->mass() + k * as->stiffness();
        cache.solver.factor(condense_matrix(cache.K, C));
      }
      const Vector b = primal_slab_rhs(problem, *as, tm, m, up, opt.f_rule);
      u = cache.solver.solve(condense_rhs(cache.K, b, C));
      C.distribute(u);
    } else {
      u = newton_slab(problem, *as, tm, m, up, C, opt);
    }
    if (opt.on_slab) opt.on_slab(m, *S, u);
    if (opt.store) sol.u.push_back(u);
    prev = std::move(u);
    prev_space = S;
  }
  return sol;
}

namespace {
Vector primal_in_space_of(const Space& src, const Vector& u, const Space& target) {
  if (src.order() == target.order()) return u;
  if (src.order() == 1) return embed_up(src, u, target);
  return interpolate_down(src, u, target);
}
}  // namespace

Vector primal_in_space(const SpaceTimeSolution& primal, int m, const Space& target) {
  const Space& src = *primal.spaces[static_cast<std::size_t>(m)];
  const Vector& u = primal.u.at(static_cast<std::size_t>(m));
  if (src.order() == target.order()) return u;
  if (src.order() == 1) return embed_up(src, u, target);
  return interpolate_down(src, u, target);
}

AdjointSolution solve_adjoint(const ParabolicProblem& problem, const GoalFunctional& goal,
                              const SpaceTimeSolution& primal, const SlabMeshSequence& meshes, int order) {
  const TemporalMesh& tm = primal.tm;
  if (primal.u.size() != static_cast<std::size_t>(tm.size())) throw std::invalid_argument("adjoint needs the stored primal");
  AdjointSolution adj;
  adj.order = order;
  adj.spaces = order == primal.order ? primal.spaces : build_spaces(problem, meshes, order);
  const int M = tm.size();
  adj.z.assign(static_cast<std::size_t>(M), Vector());
  LinearCache cache;
  std::unique_ptr<Assembler> as;
  std::unique_ptr<Assembler> as_next;
  for (int m = M - 1; m >= 0; --m) {
    const SpacePtr& S = adj.spaces[static_cast<std::size_t>(m)];
    if (!as || as->space_ptr() != S) as = std::make_unique<Assembler>(problem, S);
    const double k = tm.length(m);
    const Vector ulin = primal_in_space(primal, m, *S);
    Vector rhs;
    if (goal.kind() == GoalKind::l2err && primal.order == 2) {
      // the error is measured on the vertex interpolant, so the derivative is taken there too
      const Space& P = *primal.spaces[static_cast<std::size_t>(m)];
      const Space low(P.mesh_ptr(), 1, P.n_components(), problem.marker);
      const Vector ih = embed_up(low, interpolate_down(P, primal.u[static_cast<std::size_t>(m)], low), P);
      rhs = goal.slab_derivative(*S, primal_in_space_of(P, ih, *S), tm.start(m), tm.end(m));
    } else {
      rhs = goal.slab_derivative(*S, ulin, tm.start(m), tm.end(m));
    }
    if (m + 1 < M) {
      const SpacePtr& Sn = adj.spaces[static_cast<std::size_t>(m + 1)];
      if (!as_next || as_next->space_ptr() != Sn) as_next = std::make_unique<Assembler>(problem, Sn);
      const Vector Mz = as_next->mass() * adj.z[static_cast<std::size_t>(m + 1)];
      rhs += Sn == S ? Mz : Transfer(*S, *Sn).apply_transpose(Mz);
    }
    const Constraints Ch = S->constraints(nullptr);
    Vector z;
    if (problem.linear) {
      if (!cache.valid(S.get(), k)) {
        cache.space = S.get();
        cache.k = k;
        cache.K = as->mass() + k * as->stiffness();
        cache.solver.factor(condense_matrix(cache.K, Ch));
      }
      Ch.condense_vector(rhs);
      z = cache.solver.solve(rhs);
    } else {
      const SparseMatrix K = as->mass() + k * as->abar_jacobian(ulin);
      Ch.condense_vector(rhs);
      z = factor_solve(condense_matrix(SparseMatrix(K.transpose()), Ch), rhs);
    }
    Ch.distribute_homogeneous(z);
    adj.z[static_cast<std::size_t>(m)] = std::move(z);
  }
  return adj;
}

}  // namespace pudwr
