#pragma once

#include "pudwr/fespace.hpp"
#include "pudwr/problems.hpp"

#include <optional>
#include <string>

namespace pudwr {

enum class GoalKind { avg, l2err, j1, j2 };
GoalKind parse_goal(const std::string& s);
std::string to_string(GoalKind g);

// Space-time goal J(u) = int_0^T j(t, u) dt, with no end-time term (z^M = 0) for every shipped goal.
// The L2-error goal is used as J(u) = -||u_exact - u||, so that J(u_exact) - J(u_kh) = ||e|| > 0;
// its value() reports ||e||.
class GoalFunctional {
 public:
  GoalFunctional(GoalKind kind, const ParabolicProblem& problem, double scale = 1.0);

  GoalKind kind() const { return kind_; }
  double scale() const { return scale_; }
  bool linear() const { return kind_ == GoalKind::avg || kind_ == GoalKind::j2; }

  // Contribution of a dG(0) slab u on (t0, t1); value() combines the contributions.
  double slab_value(const Space& space, const Vector& u, double t0, double t1) const;
  double value(double sum_of_slab_values) const;
  // Q2 states are replaced by their Q1 vertex interpolant (embedded back into Q2) before evaluation.
  double slab_value_via_low_order(const Space& space, const Vector& u, double t0, double t1) const;

  // Unscaled ||e|| used to normalise the L2-error derivative; recomputed once per loop.
  void set_error_norm(double e) { enorm_ = e; }
  double error_norm() const { return enorm_; }

  // J'(u)(psi) = int int sum_c d_c psi_c dx dt (+ the boundary part on Robin faces).
  bool has_volume_density() const { return kind_ != GoalKind::j2; }
  bool has_boundary_density() const { return kind_ == GoalKind::j2; }
  bool time_dependent_density() const { return kind_ == GoalKind::l2err; }
  void volume_density(double t, Point x, const double* u, double* d) const;
  void boundary_density(double t, Point x, const double* u, double* d) const;

  // Vector of J'_m(phi_i) over a slab for a dG(0) primal state u.
  Vector slab_derivative(const Space& space, const Vector& u, double t0, double t1) const;

  // J(u) from the closed-form solution (0 for the L2-error goal); empty without one.
  std::optional<double> exact_value() const;

  TimeQuad value_rule = TimeQuad::rightbox;
  TimeQuad derivative_rule = TimeQuad::rightbox;
  // 0 selects s + 1 points, the rule the solver uses for its nonlinear terms
  int spatial_gauss = 0;

 private:
  int gauss_points(int order) const;

  GoalKind kind_;
  const ParabolicProblem* problem_;
  double scale_;
  double norm_;  // 1 / (T |Omega|) or 1 / (T |Gamma_R|)
  double enorm_ = 0.0;
};

}  // namespace pudwr
