#pragma once

#include "pudwr/estimator.hpp"
#include "pudwr/goals.hpp"
#include "pudwr/mesh.hpp"
#include "pudwr/problems.hpp"
#include "pudwr/solver.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pudwr {

struct MarkingConfig {
  double c = 5.0;         // equilibration factor
  double theta_t = 0.95;  // fraction of intervals bisected
  double theta_x = 0.40;  // fraction of cells refined on every slab
  int max_loops = 5;
  long long dof_budget = 0;  // space-time primal DoFs; 0 disables the check
  // true: theta_x counts cells refined after sibling completion; false: it counts marked cells
  bool count_promoted = true;
};
void validate(const MarkingConfig& cfg);

struct Marks {
  bool temporal = false;
  bool spatial = false;
  std::vector<int> intervals;           // ascending
  std::vector<std::vector<int>> cells;  // per slab, ascending
};

// Decides the branches from the global split and picks the largest |indicators|; ties go to the lower id.
// Spatial fractions count the cells that end up refined once sibling patches are completed.
Marks mark(const EstimateReport& report, const SlabMeshSequence& meshes, const MarkingConfig& cfg);
// Indices of the ceil(fraction * n) largest |values|, returned in ascending order.
std::vector<int> top_fraction(const std::vector<double>& values, double fraction);
// Cells taken by decreasing |value| until their sibling patches cover ceil(fraction * n) cells.
std::vector<int> top_fraction_patches(const SpatialMesh& mesh, const std::vector<double>& values, double fraction);

struct RefinedMeshes {
  TemporalMesh tm;
  SlabMeshSequence meshes;
};
// Spatial marks act on the old slabs; bisected intervals hand their (refined) mesh to both halves.
RefinedMeshes refine(const TemporalMesh& tm, const SlabMeshSequence& meshes, const Marks& marks);
RefinedMeshes refine_uniform(const TemporalMesh& tm, const SlabMeshSequence& meshes);

RefinedMeshes mark_and_refine(const EstimateReport& report, const TemporalMesh& tm, const SlabMeshSequence& meshes,
                              const MarkingConfig& cfg);

struct HistoryRow {
  int loop = 0;
  int M = 0;
  int N_max = 0;
  long long st_cells = 0;
  long long st_dofs_primal = 0;
  long long st_dofs_total = 0;
  double J_value = 0.0;
  std::optional<double> error;
  double eta_k = 0.0, eta_h = 0.0, eta = 0.0;
  std::optional<double> I_eff, I_ind;
  double wall_seconds = 0.0;
};

struct LoopOptions {
  GoalKind goal = GoalKind::avg;
  double goal_scale = 1.0;
  TimeQuad goal_value_rule = TimeQuad::rightbox;
  TimeQuad goal_derivative_rule = TimeQuad::rightbox;
  int goal_spatial_gauss = 0;
  EstimatorConfig estimator;
  MarkingConfig marking;
  bool uniform = false;
  PrimalOptions primal;
  // J(u); when empty the closed form of the problem is used if there is one
  std::optional<double> reference_J;
  // s = 2 runs measure the error of a separate native Q1 solve (goals other than the L2 error)
  bool q1_reference = true;
};

struct LoopState {
  int loop;
  const TemporalMesh& tm;
  const SlabMeshSequence& meshes;
  const SpaceTimeSolution& primal;
  const AdjointSolution& adjoint;
  const EstimateReport& report;
  const HistoryRow& row;
};

struct RunHistory {
  std::vector<HistoryRow> rows;
  std::optional<std::string> failure;  // set when a solver error stopped the loop
};

// Solve, estimate, mark and refine until the loop count or the DoF budget is exhausted.
RunHistory adaptive_loop(const ParabolicProblem& problem, const TemporalMesh& tm0, const SlabMeshSequence& meshes0,
                         const LoopOptions& opt, const std::function<void(const LoopState&)>& observer = {});

}  // namespace pudwr
