#pragma once

#include "pudwr/fespace.hpp"
#include "pudwr/goals.hpp"
#include "pudwr/linalg.hpp"
#include "pudwr/mesh.hpp"
#include "pudwr/problems.hpp"

#include <functional>
#include <map>
#include <memory>
#include <vector>

namespace pudwr {

// Element assembly of the slab-independent operators of a problem on one space.
// Mass, stiffness and reaction use s + 1 Gauss points per direction, loads s + 2.
class Assembler {
 public:
  Assembler(const ParabolicProblem& problem, SpacePtr space);

  const Space& space() const { return *space_; }
  SpacePtr space_ptr() const { return space_; }
  const SparseMatrix& mass() const;
  // Diffusion plus Robin terms (the linear part of a-bar).
  const SparseMatrix& stiffness() const;
  // (f(t), phi_i)
  Vector load(double t) const;
  // Reaction part of a-bar: F[i] = (F(u), phi_i) and optionally its Jacobian.
  void reaction(const Vector& u, Vector* F, SparseMatrix* J) const;
  // a-bar(u)(phi_i)
  Vector abar(const Vector& u) const;
  // Matrix of a-bar'(u)(phi_j, phi_i).
  SparseMatrix abar_jacobian(const Vector& u) const;

 private:
  const ParabolicProblem* problem_;
  SpacePtr space_;
  mutable SparseMatrix mass_, stiff_;
  mutable bool have_mass_ = false, have_stiff_ = false;
};

// One space per slab; consecutive slabs with equal meshes share the space object.
std::vector<SpacePtr> build_spaces(const ParabolicProblem& problem, const SlabMeshSequence& meshes, int order);

struct NewtonConfig {
  double tol = 1e-10;
  int max_iter = 20;
  double rho_skip = 0.1;
  double min_alpha = 1.0 / 1024.0;
};

struct NewtonStep {
  int slab;
  std::vector<double> residuals;  // residual norm before every iteration and at the end
  std::vector<double> alphas;
  int assemblies = 0;
};

struct SpaceTimeSolution {
  int order = 1;
  TemporalMesh tm;
  std::vector<SpacePtr> spaces;
  std::vector<Vector> u;  // per slab; empty when not stored
  Vector u0;              // initial interpolant on the first slab's space
};

struct PrimalOptions {
  TimeQuad f_rule = TimeQuad::midpoint;
  NewtonConfig newton;
  bool store = true;
  std::function<void(int m, const Space& space, const Vector& u)> on_slab;
  std::vector<NewtonStep>* newton_log = nullptr;
};

SpaceTimeSolution solve_primal(const ParabolicProblem& problem, const SlabMeshSequence& meshes, const TemporalMesh& tm,
                               int order, const PrimalOptions& opt = {});

// Right-hand side of slab m: M Pi u_{m-1} + k sum_q w_q (f(t_q), phi).
Vector primal_slab_rhs(const ParabolicProblem& problem, const Assembler& as, const TemporalMesh& tm, int m,
                       const Vector& u_prev_on_slab, TimeQuad f_rule);
// Residual b - M u - k a-bar(u) of slab m for a given previous value (already on the slab space).
Vector primal_slab_residual(const ParabolicProblem& problem, const Assembler& as, const TemporalMesh& tm, int m,
                            const Vector& u_prev_on_slab, const Vector& u, TimeQuad f_rule);

struct AdjointSolution {
  int order = 1;
  std::vector<SpacePtr> spaces;
  std::vector<Vector> z;
};

// Primal state of slab m represented in the given space (same mesh, equal or higher order).
Vector primal_in_space(const SpaceTimeSolution& primal, int m, const Space& target);

AdjointSolution solve_adjoint(const ParabolicProblem& problem, const GoalFunctional& goal,
                              const SpaceTimeSolution& primal, const SlabMeshSequence& meshes, int order);

}  // namespace pudwr
