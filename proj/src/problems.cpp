#include "pudwr/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace pudwr {

namespace {

double arrhenius_exponent(double theta, const CombustionParams& p) {
  const double den = 1.0 + p.alpha * (theta - 1.0);
  if (std::abs(den) < 1e-12) throw std::domain_error("Arrhenius denominator vanishes at theta = " + std::to_string(theta));
  return p.beta * (theta - 1.0) / den;
}

}  // namespace

double omega(double theta, double Y, const CombustionParams& p) {
  return p.beta * p.beta / (2.0 * p.Le) * Y * std::exp(arrhenius_exponent(theta, p));
}

OmegaDerivs omega_derivatives(double theta, double Y, const CombustionParams& p) {
  const double e = p.beta * p.beta / (2.0 * p.Le) * std::exp(arrhenius_exponent(theta, p));
  const double den = 1.0 + p.alpha * (theta - 1.0);
  return {e * Y * p.beta / (den * den), e};
}

ManufacturedCase config1_case() {
  ManufacturedCase mc;
  mc.u = [](double t, Point x) { return -(x.x * x.x - x.x) * (x.y * x.y - x.y) * t / 4.0; };
  mc.f = [](double t, Point x) {
    const double a = x.x * x.x - x.x, b = x.y * x.y - x.y;
    return -a * b / 4.0 + a * t / 2.0 + b * t / 2.0;
  };
  return mc;
}

ManufacturedCase config2_case() {
  ManufacturedCase mc;
  mc.u = [](double t, Point x) {
    const double x0 = 0.5 + 0.25 * std::cos(2.0 * M_PI * t), y0 = 0.5 + 0.25 * std::sin(2.0 * M_PI * t);
    const double dx = x.x - x0, dy = x.y - y0;
    return 1.0 / (1.0 + 50.0 * (dx * dx + dy * dy));
  };
  mc.f = [](double t, Point x) {
    const double x0 = 0.5 + 0.25 * std::cos(2.0 * M_PI * t), y0 = 0.5 + 0.25 * std::sin(2.0 * M_PI * t);
    const double dx0 = -0.5 * M_PI * std::sin(2.0 * M_PI * t), dy0 = 0.5 * M_PI * std::cos(2.0 * M_PI * t);
    const double dx = x.x - x0, dy = x.y - y0;
    const double r2 = dx * dx + dy * dy;
    const double q = 1.0 + 50.0 * r2;
    const double dr2 = -2.0 * dx * dx0 - 2.0 * dy * dy0;
    const double ut = -50.0 * dr2 / (q * q);
    const double lap = -200.0 / (q * q) + 20000.0 * r2 / (q * q * q);
    return ut - lap;
  };
  return mc;
}

MeshPtr ParabolicProblem::base_mesh() const {
  return std::make_shared<const SpatialMesh>(SpatialMesh(grid).refine_global(base_refinement));
}

ParabolicProblem heat_problem(const ManufacturedCase& mc, double T, int base_refinement) {
  ParabolicProblem p;
  p.name = "heat";
  p.ncomp = 1;
  p.linear = true;
  p.grid = std::make_shared<const CoarseGrid>(CoarseGrid::rectangle(0.0, 0.0, 1.0, 1.0, 1, 1));
  p.base_refinement = base_refinement;
  p.T = T;
  auto f = mc.f;
  auto u = mc.u;
  p.source = [f](int, double t, Point x) { return f(t, x); };
  p.dirichlet = [u](int, double t, Point x) { return u(t, x); };
  p.initial = [u](int, Point x) { return u(0.0, x); };
  p.exact = u;
  p.marker = [](Point, Point) { return BoundaryKind::Dirichlet; };
  return p;
}

ParabolicProblem config1_problem() {
  ParabolicProblem p = heat_problem(config1_case(), 1.0, 3);
  p.name = "config1";
  return p;
}

ParabolicProblem config2_problem() {
  ParabolicProblem p = heat_problem(config2_case(), 1.0, 3);
  p.name = "config2";
  return p;
}

ParabolicProblem config3_problem(const CombustionParams& prm) {
  ParabolicProblem p;
  p.name = "config3";
  p.ncomp = 2;
  p.linear = false;
  p.params = prm;
  p.diffusion = {1.0, 1.0 / prm.Le};
  p.robin = {prm.kappa, 0.0};
  p.T = 60.0;
  // channel 60 x 16 on a 4 x 4 array of 15 x 4 cells, rods at x in [15,30] on both walls
  CoarseGrid g;
  g.x0 = 0.0;
  g.y0 = 0.0;
  g.hx = 15.0;
  g.hy = 4.0;
  g.nx = 4;
  g.ny = 4;
  g.present.assign(16, 1);
  g.remove(1, 0);
  g.remove(1, 3);
  p.grid = std::make_shared<const CoarseGrid>(g);
  p.base_refinement = 3;
  p.reaction = [prm](const double* u, double* F, double* dF) {
    const double w = omega(u[0], u[1], prm);
    const OmegaDerivs d = omega_derivatives(u[0], u[1], prm);
    F[0] = -w;
    F[1] = w;
    dF[0] = -d.d_theta;
    dF[1] = -d.d_Y;
    dF[2] = d.d_theta;
    dF[3] = d.d_Y;
  };
  p.dirichlet = [](int c, double, Point) { return c == 0 ? 1.0 : 0.0; };
  p.initial = [prm](int c, Point x) {
    if (x.x <= 9.0) return c == 0 ? 1.0 : 0.0;
    return c == 0 ? std::exp(9.0 - x.x) : 1.0 - std::exp(prm.Le * (9.0 - x.x));
  };
  p.marker = [](Point mid, Point n) {
    constexpr double eps = 1e-9;
    if (std::abs(mid.x) < eps) return BoundaryKind::Dirichlet;
    const bool in_rod_rows = mid.y < 4.0 + eps || mid.y > 12.0 - eps;
    if (n.x != 0.0 && (std::abs(mid.x - 15.0) < eps || std::abs(mid.x - 30.0) < eps) && in_rod_rows)
      return BoundaryKind::Robin;
    if (n.y != 0.0 && (std::abs(mid.y - 4.0) < eps || std::abs(mid.y - 12.0) < eps) && mid.x > 15.0 && mid.x < 30.0)
      return BoundaryKind::Robin;
    return BoundaryKind::Neumann;
  };
  return p;
}

double robin_length(const ParabolicProblem& p, const SpatialMesh& mesh) {
  const Space s(std::make_shared<const SpatialMesh>(mesh), 1, 1, p.marker);
  double len = 0.0;
  for (const BoundaryFace& f : s.boundary_faces()) {
    if (f.kind != BoundaryKind::Robin) continue;
    const CellGeometry g = mesh.geometry(f.cell);
    len += f.dir < 2 ? g.hy : g.hx;
  }
  return len;
}

}  // namespace pudwr
