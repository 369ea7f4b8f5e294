#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pudwr/estimator.hpp"

#include <cmath>

using namespace pudwr;

namespace {

struct Run {
  SpaceTimeSolution primal;
  AdjointSolution adjoint;
  EstimateReport report;
  double J = 0.0;
};

double goal_of(const GoalFunctional& g, const SpaceTimeSolution& sol) {
  double sum = 0.0;
  for (int m = 0; m < sol.tm.size(); ++m)
    sum += g.slab_value(*sol.spaces[static_cast<std::size_t>(m)], sol.u[static_cast<std::size_t>(m)], sol.tm.start(m),
                        sol.tm.end(m));
  return g.value(sum);
}

Run run(const ParabolicProblem& p, GoalFunctional& g, int M, const EstimatorConfig& cfg, TimeQuad f_rule) {
  const TemporalMesh tm = TemporalMesh::uniform(p.T, M);
  const SlabMeshSequence meshes(static_cast<std::size_t>(M), p.base_mesh());
  PrimalOptions po;
  po.f_rule = f_rule;
  Run r{solve_primal(p, meshes, tm, cfg.s, po), {}, {}, 0.0};
  std::optional<double> error;
  if (g.kind() == GoalKind::l2err) {
    double sum = 0.0;
    for (int m = 0; m < M; ++m)
      sum += g.slab_value(*r.primal.spaces[static_cast<std::size_t>(m)], r.primal.u[static_cast<std::size_t>(m)],
                          tm.start(m), tm.end(m));
    g.set_error_norm(std::sqrt(sum));
    error = g.value(sum);
    r.J = -*error;
  } else {
    r.J = goal_of(g, r.primal);
    if (g.exact_value()) error = *g.exact_value() - r.J;
  }
  r.adjoint = solve_adjoint(p, g, r.primal, meshes, cfg.s_tilde);
  r.report = estimate(p, g, r.primal, &r.adjoint, meshes, cfg, r.J, error);
  return r;
}

}  // namespace

TEST_CASE("joint and split variants agree slab by slab") {
  SUBCASE("heat") {
    ParabolicProblem p = config1_problem();
    p.base_refinement = 2;
    GoalFunctional g(GoalKind::avg, p);
    EstimatorConfig split, joint;
    joint.variant = EstimatorVariant::joint;
    for (EstimatorPart part : {EstimatorPart::primal, EstimatorPart::adjoint, EstimatorPart::full}) {
      split.part = joint.part = part;
      const Run a = run(p, g, 12, split, TimeQuad::midpoint), b = run(p, g, 12, joint, TimeQuad::midpoint);
      for (std::size_t n = 0; n < a.report.slabs.size(); ++n) {
        const SlabEstimate& s = a.report.slabs[n];
        const double scale = std::abs(s.eta_k) + std::abs(s.eta_h) + 1e-300;
        CHECK(std::abs(b.report.slabs[n].eta_kh - s.eta_k - s.eta_h) <= 1e-12 * scale);
      }
      CHECK(std::abs(a.report.eta - b.report.eta) <= 1e-12 * (std::abs(a.report.eta_k) + std::abs(a.report.eta_h)));
    }
  }
  SUBCASE("combustion") {
    ParabolicProblem p = config3_problem();
    p.base_refinement = 2;
    p.T = 6.0 * 60.0 / 256.0;
    GoalFunctional g(GoalKind::j1, p);
    EstimatorConfig split, joint;
    split.part = joint.part = EstimatorPart::full;
    joint.variant = EstimatorVariant::joint;
    split.s_tilde = joint.s_tilde = 1;
    const Run a = run(p, g, 6, split, TimeQuad::midpoint), b = run(p, g, 6, joint, TimeQuad::midpoint);
    for (std::size_t n = 0; n < a.report.slabs.size(); ++n) {
      const SlabEstimate& s = a.report.slabs[n];
      CHECK(std::abs(b.report.slabs[n].eta_kh - s.eta_k - s.eta_h) <= 1e-12 * (std::abs(s.eta_k) + std::abs(s.eta_h)));
    }
  }
}

TEST_CASE("primal indicators vanish when the discrete solution is exact") {
  // bilinear and steady: dG(0)-Q1 reproduces it exactly
  const ManufacturedCase mc{[](double, Point x) { return 1.0 + x.x + 2.0 * x.y + 3.0 * x.x * x.y; },
                            [](double, Point) { return 0.0; }};
  const ParabolicProblem p = heat_problem(mc, 1.0, 2);
  GoalFunctional g(GoalKind::avg, p);
  EstimatorConfig cfg;
  const Run r = run(p, g, 5, cfg, TimeQuad::midpoint);
  CHECK(std::abs(r.report.eta) < 1e-13);
  for (const SlabEstimate& s : r.report.slabs) {
    for (double c : s.cells) CHECK(std::abs(c) < 1e-13);
    CHECK(std::abs(s.temporal_mark) < 1e-13);
  }
}

TEST_CASE("element indicators sum the vertex values") {
  const auto one = std::make_shared<const SpatialMesh>(
      std::make_shared<const CoarseGrid>(CoarseGrid::rectangle(0.0, 0.0, 1.0, 1.0, 1, 1)));
  const Space pu1(one, 1, 1, {});
  Vector v(4);
  v << 1.0, 2.0, 3.0, 4.0;
  REQUIRE(element_indicators(pu1, v).size() == 1);
  CHECK(element_indicators(pu1, v)[0] == 10.0);

  const auto four = std::make_shared<const SpatialMesh>(one->refine_global());
  const Space pu4(four, 1, 1, {});
  for (double e : element_indicators(pu4, Vector::Ones(pu4.n_dofs()))) CHECK(e == 4.0);
}

TEST_CASE("efficiency index of an exact estimate is one") {
  ParabolicProblem p = config1_problem();
  p.base_refinement = 2;
  GoalFunctional g(GoalKind::avg, p);
  EstimatorConfig cfg;
  const Run r = run(p, g, 8, cfg, TimeQuad::midpoint);
  const TemporalMesh tm = TemporalMesh::uniform(1.0, 8);
  const SlabMeshSequence meshes(8, p.base_mesh());
  const EstimateReport rep = estimate(p, g, r.primal, &r.adjoint, meshes, cfg, r.J, r.report.eta);
  REQUIRE(rep.I_eff);
  CHECK(*rep.I_eff == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("goal scaling scales the estimate and keeps the efficiency index") {
  ParabolicProblem p = config1_problem();
  p.base_refinement = 2;
  for (GoalKind kind : {GoalKind::avg, GoalKind::l2err}) {
    if (kind == GoalKind::l2err) p = config2_problem(), p.base_refinement = 2;
    GoalFunctional g1(kind, p, 1.0), g3(kind, p, 3.0);
    EstimatorConfig cfg;
    cfg.part = EstimatorPart::full;
    const TimeQuad fr = kind == GoalKind::l2err ? TimeQuad::rightbox : TimeQuad::midpoint;
    const Run a = run(p, g1, 10, cfg, fr), b = run(p, g3, 10, cfg, fr);
    CHECK(b.report.eta == doctest::Approx(3.0 * a.report.eta).epsilon(1e-11));
    CHECK(b.report.eta_k == doctest::Approx(3.0 * a.report.eta_k).epsilon(1e-11));
    CHECK(b.report.eta_h == doctest::Approx(3.0 * a.report.eta_h).epsilon(1e-11));
    REQUIRE(a.report.I_eff);
    REQUIRE(b.report.I_eff);
    CHECK(*b.report.I_eff == doctest::Approx(*a.report.I_eff).epsilon(1e-11));
    for (std::size_t n = 0; n < a.report.slabs.size(); ++n) {
      const auto& ca = a.report.slabs[n].cells;
      const auto& cb = b.report.slabs[n].cells;
      double amax = 0.0;
      for (double c : ca) amax = std::max(amax, std::abs(c));
      for (std::size_t i = 0; i < ca.size(); ++i) CHECK(std::abs(cb[i] - 3.0 * ca[i]) <= 1e-11 * amax);
    }
  }
}

TEST_CASE("enriched weights recover the discretisation error") {
  // eta_l = sum_j rho_j(u_kh)(z_l) with z_l the adjoint on a space-time mesh refined l times.
  // For the linear problem this equals J(u_l) - J(u_kh) exactly, and tends to J(u) - J(u_kh).
  ParabolicProblem p = config1_problem();
  p.base_refinement = 2;
  const int M = 10;
  const GoalFunctional g(GoalKind::avg, p);
  const TemporalMesh tm = TemporalMesh::uniform(1.0, M);
  const SpaceTimeSolution coarse = solve_primal(p, SlabMeshSequence(M, p.base_mesh()), tm, 1);
  const double Jc = goal_of(g, coarse);
  const double err = *g.exact_value() - Jc;
  double prev_gap = 1e300;
  for (int l = 1; l <= 3; ++l) {
    const int r = 1 << l;
    const auto fine_mesh = std::make_shared<const SpatialMesh>(p.base_mesh()->refine_global(l));
    const SlabMeshSequence fine_meshes(static_cast<std::size_t>(M * r), fine_mesh);
    const TemporalMesh ftm = TemporalMesh::uniform(1.0, M * r);
    const SpaceTimeSolution fine = solve_primal(p, fine_meshes, ftm, 1);
    const AdjointSolution z = solve_adjoint(p, g, fine, fine_meshes, 1);
    const auto fspace = fine.spaces[0];
    const Assembler as(p, fspace);
    double eta = 0.0;
    for (int j = 0; j < M * r; ++j) {
      const int m = j / r;
      const Vector u = transfer(*coarse.spaces[0], coarse.u[static_cast<std::size_t>(m)], *fspace);
      const Vector prev = j % r != 0 ? u
                          : m == 0   ? transfer(*coarse.spaces[0], coarse.u0, *fspace)
                                     : transfer(*coarse.spaces[0], coarse.u[static_cast<std::size_t>(m - 1)], *fspace);
      eta += primal_slab_residual(p, as, ftm, j, prev, u, TimeQuad::midpoint).dot(z.z[static_cast<std::size_t>(j)]);
    }
    const double Jf = goal_of(g, fine);
    CHECK(std::abs(eta - (Jf - Jc)) <= 1e-10 * std::abs(Jf - Jc));
    const double gap = std::abs(eta / err - 1.0);
    MESSAGE("level " << l << ": I_eff " << eta / err);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 0.1);
}

TEST_CASE("unsupported combinations") {
  EstimatorConfig cfg;
  cfg.pu = PUKind::cg1;
  CHECK_THROWS_AS(validate(config3_problem(), cfg), UnsupportedVariant);
  CHECK_NOTHROW(validate(config1_problem(), cfg));
  EstimatorConfig full;
  full.part = EstimatorPart::full;
  full.s = full.s_tilde = 2;
  CHECK_NOTHROW(validate(config3_problem(), full));
}
