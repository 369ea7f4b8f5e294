#pragma once

#include "pudwr/fespace.hpp"
#include "pudwr/mesh.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>

namespace pudwr {

struct CombustionParams {
  double Le = 1.0;
  double alpha = 0.8;
  double beta = 10.0;
  double kappa = 0.1;
};

// Arrhenius reaction rate; throws std::domain_error when 1 + alpha (theta - 1) vanishes.
double omega(double theta, double Y, const CombustionParams& p);
struct OmegaDerivs {
  double d_theta;
  double d_Y;
};
OmegaDerivs omega_derivatives(double theta, double Y, const CombustionParams& p);

struct ManufacturedCase {
  std::function<double(double t, Point x)> u;
  std::function<double(double t, Point x)> f;
};
ManufacturedCase config1_case();
ManufacturedCase config2_case();

// Elliptic part a(u)(v) = sum_c (F_c(u), v_c) + D_c (grad u_c, grad v_c) + kappa_c <u_c, v_c>_{Robin},
// time derivative and the volume source f are handled by the solver.
struct ParabolicProblem {
  std::string name;
  int ncomp = 1;
  bool linear = true;
  std::array<double, 2> diffusion{1.0, 1.0};
  std::array<double, 2> robin{0.0, 0.0};
  // F[c] and dF[c * ncomp + d] = dF_c / du_d; empty for problems without reaction.
  std::function<void(const double* u, double* F, double* dF)> reaction;
  std::function<double(int c, double t, Point x)> source;     // empty means zero
  std::function<double(int c, double t, Point x)> dirichlet;  // empty means zero
  std::function<double(int c, Point x)> initial;              // empty means zero
  BoundaryMarker marker;
  std::shared_ptr<const CoarseGrid> grid;
  int base_refinement = 0;  // global refinements of the coarse grid giving the starting mesh
  double T = 1.0;
  std::function<double(double t, Point x)> exact;  // scalar problems with a closed form only
  CombustionParams params{};

  double area() const { return grid->area(); }
  MeshPtr base_mesh() const;
  double source_value(int c, double t, Point x) const { return source ? source(c, t, x) : 0.0; }
  double dirichlet_value(int c, double t, Point x) const { return dirichlet ? dirichlet(c, t, x) : 0.0; }
  double initial_value(int c, Point x) const { return initial ? initial(c, x) : 0.0; }
  bool has_reaction() const { return static_cast<bool>(reaction); }
};

ParabolicProblem heat_problem(const ManufacturedCase& mc, double T, int base_refinement);
ParabolicProblem config1_problem();
ParabolicProblem config2_problem();
ParabolicProblem config3_problem(const CombustionParams& p = {});

// Total length of the Robin boundary as tagged on the faces of a mesh.
double robin_length(const ParabolicProblem& p, const SpatialMesh& mesh);

}  // namespace pudwr
