#pragma once

#include "pudwr/fespace.hpp"
#include "pudwr/goals.hpp"
#include "pudwr/problems.hpp"
#include "pudwr/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pudwr {

enum class EstimatorPart { primal, adjoint, full };
enum class EstimatorVariant { joint, split };
enum class PUKind { dg0, cg1 };
EstimatorPart parse_part(const std::string& s);
EstimatorVariant parse_variant(const std::string& s);
PUKind parse_pu(const std::string& s);
std::string to_string(EstimatorPart p);
std::string to_string(EstimatorVariant v);
std::string to_string(PUKind p);

class UnsupportedVariant : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EstimatorConfig {
  EstimatorPart part = EstimatorPart::primal;
  EstimatorVariant variant = EstimatorVariant::split;
  PUKind pu = PUKind::dg0;
  int s = 1;        // primal order
  int s_tilde = 2;  // adjoint order
  TimeQuad f_rule = TimeQuad::simpson;
  int spatial_gauss = 4;
  // Gauss points for the reaction terms; 0 uses s + 1 like the primal solve
  int reaction_gauss = 0;
  // Boundary intervals: false copies the neighbouring value (zero temporal weight on the first
  // interval, zero adjoint temporal weight on the last); true extends the line of the neighbour interval.
  bool extrapolate_boundary = false;
};

// All weights of slab n represented in the Q2 space on that slab's mesh.
struct SlabFields {
  Vector uK, uKH, uKH_prev, uK_next, ulin;
  Vector zK, zKH, zK_prev, zKH_next;
};

// Per-PU-vertex indicators of one slab; hanging vertices carry zero.
struct SlabIndicators {
  Vector primal_k, primal_h, primal_kh;
  Vector adjoint_k, adjoint_h, adjoint_kh;
  // cG(1) PU families: index 0 belongs to the tent at t_n, index 1 to the tent at t_{n+1}
  std::array<Vector, 2> cg_k, cg_h;
};

struct SlabEstimate {
  double eta_k = 0.0;
  double eta_h = 0.0;
  double eta_kh = 0.0;
  Vector dof_k, dof_h, dof_kh;  // per PU vertex, part-combined
  std::vector<double> cells;    // element indicators used for spatial marking
  double temporal_mark = 0.0;   // temporal indicator used for marking
};

struct EstimateReport {
  double eta_k = 0.0, eta_h = 0.0, eta = 0.0;
  double J = 0.0;
  std::optional<double> error, I_eff, I_ind;
  std::vector<SlabEstimate> slabs;
};

// Low- and high-order spaces of every slab (sharing objects with the solutions where orders match).
struct SpacePairs {
  std::vector<SpacePtr> low, high;
};
SpacePairs make_space_pairs(const ParabolicProblem& problem, const SlabMeshSequence& meshes,
                            const SpaceTimeSolution& primal, const AdjointSolution* adjoint);

SlabFields build_slab_fields(const SpaceTimeSolution& primal, const AdjointSolution* adjoint, const SpacePairs& sp,
                             int n, const EstimatorConfig& cfg);

SlabIndicators evaluate_slab(const ParabolicProblem& problem, const GoalFunctional& goal, const Space& high,
                             const Space& pu, const TemporalMesh& tm, int n, const SlabFields& f,
                             const EstimatorConfig& cfg);

// Runs the slab estimates over all intervals and aggregates them. error_reference gives J(u) when known;
// for the L2-error goal the error is J itself.
EstimateReport estimate(const ParabolicProblem& problem, const GoalFunctional& goal, const SpaceTimeSolution& primal,
                        const AdjointSolution* adjoint, const SlabMeshSequence& meshes, const EstimatorConfig& cfg,
                        double J_value, std::optional<double> error);

// Element indicators: sum of the vertex values of every active cell.
std::vector<double> element_indicators(const Space& pu, const Vector& dof_values);

void validate(const ParabolicProblem& problem, const EstimatorConfig& cfg);

}  // namespace pudwr
