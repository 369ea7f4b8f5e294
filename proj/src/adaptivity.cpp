#include "pudwr/adaptivity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pudwr {

void validate(const MarkingConfig& cfg) {
  if (!(cfg.c > 0.0)) throw std::invalid_argument("equilibration factor c must be positive");
  if (!(cfg.theta_t >= 0.0 && cfg.theta_t <= 1.0)) throw std::invalid_argument("theta_t must lie in [0, 1]");
  if (!(cfg.theta_x >= 0.0 && cfg.theta_x <= 1.0)) throw std::invalid_argument("theta_x must lie in [0, 1]");
  if (cfg.max_loops < 1) throw std::invalid_argument("loops must be at least 1");
  if (cfg.dof_budget < 0) throw std::invalid_argument("dof_budget must be non-negative");
}

namespace {

int target_count(int n, double fraction) {
  // the small epsilon keeps e.g. 0.95 * 100 from rounding up to 96
  return std::min(n, std::max(0, static_cast<int>(std::ceil(fraction * n - 1e-9))));
}

std::vector<int> ranked(const std::vector<double>& values) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(values[static_cast<std::size_t>(a)]) > std::abs(values[static_cast<std::size_t>(b)]);
  });
  return idx;
}

}  // namespace

std::vector<int> top_fraction(const std::vector<double>& values, double fraction) {
  std::vector<int> idx = ranked(values);
  idx.resize(static_cast<std::size_t>(target_count(static_cast<int>(values.size()), fraction)));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> top_fraction_patches(const SpatialMesh& mesh, const std::vector<double>& values, double fraction) {
  if (static_cast<int>(values.size()) != mesh.n_active())
    throw std::invalid_argument("indicator count does not match the mesh");
  const int target = target_count(mesh.n_active(), fraction);
  std::vector<int> out;
  std::vector<char> covered(values.size(), 0);
  int count = 0;
  for (int c : ranked(values)) {
    if (count >= target) break;
    if (covered[static_cast<std::size_t>(c)]) continue;
    out.push_back(c);
    const CellKey k = mesh.key(c);
    if (key_level(k) == 0) {
      covered[static_cast<std::size_t>(c)] = 1;
      ++count;
      continue;
    }
    const CellKey p = key_parent(k);
    for (int j = 0; j < 4; ++j) {
      const int s = mesh.active_index(key_child(p, j));
      if (s >= 0 && !covered[static_cast<std::size_t>(s)]) {
        covered[static_cast<std::size_t>(s)] = 1;
        ++count;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Marks mark(const EstimateReport& report, const SlabMeshSequence& meshes, const MarkingConfig& cfg) {
  Marks mk;
  const double ak = std::abs(report.eta_k), ah = std::abs(report.eta_h);
  mk.temporal = ak * cfg.c >= ah;
  mk.spatial = ah * cfg.c >= ak;
  const std::size_t M = report.slabs.size();
  if (mk.temporal) {
    std::vector<double> t(M);
    for (std::size_t m = 0; m < M; ++m) t[m] = report.slabs[m].temporal_mark;
    mk.intervals = top_fraction(t, cfg.theta_t);
  }
  mk.cells.resize(M);
  if (mk.spatial)
    for (std::size_t m = 0; m < M; ++m)
      mk.cells[m] = cfg.count_promoted ? top_fraction_patches(*meshes[m], report.slabs[m].cells, cfg.theta_x)
                                       : top_fraction(report.slabs[m].cells, cfg.theta_x);
  return mk;
}

RefinedMeshes refine(const TemporalMesh& tm, const SlabMeshSequence& meshes, const Marks& marks) {
  const std::size_t M = meshes.size();
  if (static_cast<int>(M) != tm.size()) throw std::invalid_argument("mesh sequence does not match the temporal mesh");
  SlabMeshSequence spatial(M);
  for (std::size_t m = 0; m < M; ++m) {
    const std::vector<int>* cm = m < marks.cells.size() ? &marks.cells[m] : nullptr;
    if (!cm || cm->empty()) {
      // keep sharing with the previous slab when both stay untouched
      const bool prev_same = m > 0 && meshes[m] == meshes[m - 1] &&
                             (m - 1 >= marks.cells.size() || marks.cells[m - 1].empty());
      spatial[m] = prev_same ? spatial[m - 1] : meshes[m];
      continue;
    }
    auto fresh = std::make_shared<const SpatialMesh>(meshes[m]->refine(*cm));
    if (m > 0 && spatial[m - 1]->same_cells(*fresh))
      spatial[m] = spatial[m - 1];
    else
      spatial[m] = std::move(fresh);
  }
  RefinedMeshes out;
  out.tm = tm.refine(marks.intervals);
  std::vector<char> split(M, 0);
  for (int i : marks.intervals) split[static_cast<std::size_t>(i)] = 1;
  for (std::size_t m = 0; m < M; ++m) {
    out.meshes.push_back(spatial[m]);
    if (split[m]) out.meshes.push_back(spatial[m]);
  }
  return out;
}

RefinedMeshes refine_uniform(const TemporalMesh& tm, const SlabMeshSequence& meshes) {
  RefinedMeshes out;
  std::vector<int> all(static_cast<std::size_t>(tm.size()));
  std::iota(all.begin(), all.end(), 0);
  out.tm = tm.refine(all);
  MeshPtr prev_old, prev_new;
  for (const MeshPtr& mp : meshes) {
    if (mp != prev_old) {
      prev_new = std::make_shared<const SpatialMesh>(mp->refine_global());
      prev_old = mp;
    }
    out.meshes.push_back(prev_new);
    out.meshes.push_back(prev_new);
  }
  return out;
}

RefinedMeshes mark_and_refine(const EstimateReport& report, const TemporalMesh& tm, const SlabMeshSequence& meshes,
                              const MarkingConfig& cfg) {
  return refine(tm, meshes, mark(report, meshes, cfg));
}

namespace {

// Sum of the slab contributions, before GoalFunctional::value is applied.
double primal_goal_sum(const GoalFunctional& g, const SpaceTimeSolution& sol, bool via_low) {
  double s = 0.0;
  for (int m = 0; m < sol.tm.size(); ++m) {
    const Space& sp = *sol.spaces[static_cast<std::size_t>(m)];
    const Vector& u = sol.u[static_cast<std::size_t>(m)];
    s += via_low ? g.slab_value_via_low_order(sp, u, sol.tm.start(m), sol.tm.end(m))
                 : g.slab_value(sp, u, sol.tm.start(m), sol.tm.end(m));
  }
  return s;
}

long long count_dofs(const std::vector<SpacePtr>& spaces) {
  long long n = 0;
  for (const SpacePtr& s : spaces) n += s->n_dofs();
  return n;
}

bool all_zero(const EstimateReport& r) {
  if (r.eta_k != 0.0 || r.eta_h != 0.0) return false;
  for (const SlabEstimate& s : r.slabs) {
    if (s.temporal_mark != 0.0) return false;
    for (double c : s.cells)
      if (c != 0.0) return false;
  }
  return true;
}

}  // namespace

RunHistory adaptive_loop(const ParabolicProblem& problem, const TemporalMesh& tm0, const SlabMeshSequence& meshes0,
                         const LoopOptions& opt, const std::function<void(const LoopState&)>& observer) {
  validate(opt.marking);
  validate(problem, opt.estimator);
  GoalFunctional goal(opt.goal, problem, opt.goal_scale);
  goal.value_rule = opt.goal_value_rule;
  goal.derivative_rule = opt.goal_derivative_rule;
  goal.spatial_gauss = opt.goal_spatial_gauss;
  const std::optional<double> J_ref = opt.reference_J ? opt.reference_J : goal.exact_value();
  const bool l2 = opt.goal == GoalKind::l2err;

  RunHistory hist;
  TemporalMesh tm = tm0;
  SlabMeshSequence meshes = meshes0;
  for (int loop = 0; loop < opt.marking.max_loops; ++loop) {
    const auto t_start = std::chrono::steady_clock::now();
    try {
      PrimalOptions po = opt.primal;
      po.store = true;
      SpaceTimeSolution primal = solve_primal(problem, meshes, tm, opt.estimator.s, po);
      HistoryRow row;
      row.loop = loop;
      row.M = tm.size();
      for (const MeshPtr& mp : meshes) {
        row.N_max = std::max(row.N_max, mp->n_active());
        row.st_cells += mp->n_active();
      }
      row.st_dofs_primal = count_dofs(primal.spaces);
      if (loop > 0 && opt.marking.dof_budget > 0 && row.st_dofs_primal > opt.marking.dof_budget) break;

      std::optional<double> error;
      double J_value;
      if (l2) {
        const double sum = primal_goal_sum(goal, primal, primal.order == 2);
        const double e = goal.value(sum);
        goal.set_error_norm(std::sqrt(sum));
        J_value = -e;
        error = e;
      } else {
        J_value = goal.value(primal_goal_sum(goal, primal, false));
        if (primal.order == 2 && opt.q1_reference && J_ref) {
          SpaceTimeSolution q1 = solve_primal(problem, meshes, tm, 1, po);
          J_value = goal.value(primal_goal_sum(goal, q1, false));
        }
        if (J_ref) error = *J_ref - J_value;
      }
      AdjointSolution adjoint = solve_adjoint(problem, goal, primal, meshes, opt.estimator.s_tilde);
      row.st_dofs_total = row.st_dofs_primal + (adjoint.spaces == primal.spaces ? row.st_dofs_primal
                                                                                 : count_dofs(adjoint.spaces));
      EstimateReport rep = estimate(problem, goal, primal, &adjoint, meshes, opt.estimator, J_value, error);
      row.J_value = J_value;
      row.error = error;
      row.eta_k = rep.eta_k;
      row.eta_h = rep.eta_h;
      row.eta = rep.eta;
      row.I_eff = rep.I_eff;
      row.I_ind = rep.I_ind;
      row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      hist.rows.push_back(row);
      if (observer) observer(LoopState{loop, tm, meshes, primal, adjoint, rep, hist.rows.back()});
      if (loop + 1 == opt.marking.max_loops) break;
      if (opt.uniform) {
        RefinedMeshes r = refine_uniform(tm, meshes);
        tm = std::move(r.tm);
        meshes = std::move(r.meshes);
      } else {
        if (all_zero(rep)) break;
        RefinedMeshes r = mark_and_refine(rep, tm, meshes, opt.marking);
        tm = std::move(r.tm);
        meshes = std::move(r.meshes);
      }
    } catch (const SolverError& e) {
      hist.failure = e.what();
      break;
    }
  }
  return hist;
}

}  // namespace pudwr
