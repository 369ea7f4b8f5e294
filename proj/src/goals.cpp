#include "pudwr/goals.hpp"

#include <cmath>
#include <stdexcept>

namespace pudwr {

GoalKind parse_goal(const std::string& s) {
  if (s == "avg") return GoalKind::avg;
  if (s == "l2err") return GoalKind::l2err;
  if (s == "j1") return GoalKind::j1;
  if (s == "j2") return GoalKind::j2;
  throw std::invalid_argument("unknown goal '" + s + "'");
}

std::string to_string(GoalKind g) {
  switch (g) {
    case GoalKind::avg: return "avg";
    case GoalKind::l2err: return "l2err";
    case GoalKind::j1: return "j1";
    case GoalKind::j2: return "j2";
  }
  return "?";
}

GoalFunctional::GoalFunctional(GoalKind kind, const ParabolicProblem& problem, double scale)
    : kind_(kind), problem_(&problem), scale_(scale) {
  if ((kind == GoalKind::j1 || kind == GoalKind::j2) && problem.ncomp != 2)
    throw std::invalid_argument("goal " + to_string(kind) + " needs the two-component combustion problem");
  if (kind == GoalKind::l2err && !problem.exact) throw std::invalid_argument("l2err goal needs a closed-form solution");
  if (kind == GoalKind::j2) {
    norm_ = 1.0 / (problem.T * robin_length(problem, SpatialMesh(problem.grid)));
  } else {
    norm_ = 1.0 / (problem.T * problem.area());
  }
}

int GoalFunctional::gauss_points(int order) const {
  if (spatial_gauss > 0) return spatial_gauss;
  return order + 1;
}

double GoalFunctional::slab_value(const Space& s, const Vector& u, double t0, double t1) const {
  const double k = t1 - t0;
  const ShapeTable tab = make_shape_table(s.order(), gauss_points(s.order()));
  const int nb = tab.nb, nc = s.n_components();
  double loc[18];
  double sum = 0.0;
  if (kind_ == GoalKind::j2) {
    for (const BoundaryFace& f : s.boundary_faces()) {
      if (f.kind != BoundaryKind::Robin) continue;
      const ShapeTable et = make_edge_table(s.order(), gauss_points(s.order()), f.dir);
      const CellGeometry g = s.mesh().geometry(f.cell);
      const double len = f.dir < 2 ? g.hy : g.hx;
      gather(s, u, f.cell, loc);
      for (int q = 0; q < et.nq(); ++q) {
        double y = 0.0;
        for (int i = 0; i < nb; ++i) y += loc[i * nc + 1] * et.phi[static_cast<std::size_t>(q * nb + i)];
        sum += et.w[static_cast<std::size_t>(q)] * len * y;
      }
    }
    return scale_ * norm_ * k * sum;
  }
  const QuadRule1D tr = time_rule(value_rule);
  for (int c = 0; c < s.n_cells(); ++c) {
    const CellGeometry g = s.mesh().geometry(c);
    const double jac = g.hx * g.hy;
    gather(s, u, c, loc);
    for (int q = 0; q < tab.nq(); ++q) {
      double v[2] = {0.0, 0.0};
      for (int i = 0; i < nb; ++i)
        for (int cc = 0; cc < nc; ++cc) v[cc] += loc[i * nc + cc] * tab.phi[static_cast<std::size_t>(q * nb + i)];
      const double w = tab.w[static_cast<std::size_t>(q)] * jac;
      switch (kind_) {
        case GoalKind::avg: sum += w * v[0]; break;
        case GoalKind::j1: sum += w * omega(v[0], v[1], problem_->params); break;
        case GoalKind::l2err: {
          const Point x = s.mesh().map_to_physical(c, tab.pts[static_cast<std::size_t>(q)]);
          for (std::size_t r = 0; r < tr.x.size(); ++r) {
            const double e = problem_->exact(t0 + tr.x[r] * k, x) - v[0];
            sum += w * tr.w[r] * e * e;
          }
          break;
        }
        default: break;
      }
    }
  }
  if (kind_ == GoalKind::l2err) return k * sum;
  return scale_ * norm_ * k * sum;
}

double GoalFunctional::slab_value_via_low_order(const Space& s, const Vector& u, double t0, double t1) const {
  if (s.order() == 1) return slab_value(s, u, t0, t1);
  const Space low(s.mesh_ptr(), 1, s.n_components(), problem_->marker);
  return slab_value(s, embed_up(low, interpolate_down(s, u, low), s), t0, t1);
}

double GoalFunctional::value(double s) const {
  if (kind_ == GoalKind::l2err) return scale_ * std::sqrt(s);
  return s;
}

void GoalFunctional::volume_density(double t, Point x, const double* u, double* d) const {
  switch (kind_) {
    case GoalKind::avg: d[0] = scale_ * norm_; break;
    case GoalKind::j1: {
      const OmegaDerivs od = omega_derivatives(u[0], u[1], problem_->params);
      d[0] = scale_ * norm_ * od.d_theta;
      d[1] = scale_ * norm_ * od.d_Y;
      break;
    }
    case GoalKind::l2err:
      if (!(enorm_ > 0.0)) throw std::domain_error("L2-error goal derivative undefined for zero error");
      d[0] = scale_ * (problem_->exact(t, x) - u[0]) / enorm_;
      break;
    default: d[0] = d[1] = 0.0; break;
  }
}

void GoalFunctional::boundary_density(double, Point, const double*, double* d) const {
  d[0] = 0.0;
  d[1] = scale_ * norm_;
}

Vector GoalFunctional::slab_derivative(const Space& s, const Vector& u, double t0, double t1) const {
  const double k = t1 - t0;
  const int nc = s.n_components();
  Vector out = Vector::Zero(s.n_dofs());
  const ShapeTable tab = make_shape_table(s.order(), gauss_points(s.order()));
  const int nb = tab.nb;
  double loc[18];
  if (has_boundary_density()) {
    for (const BoundaryFace& f : s.boundary_faces()) {
      if (f.kind != BoundaryKind::Robin) continue;
      const ShapeTable et = make_edge_table(s.order(), gauss_points(s.order()), f.dir);
      const CellGeometry g = s.mesh().geometry(f.cell);
      const double len = f.dir < 2 ? g.hy : g.hx;
      const int* nodes = s.cell_nodes(f.cell);
      for (int q = 0; q < et.nq(); ++q) {
        double d[2];
        boundary_density(0.0, {}, nullptr, d);
        for (int i = 0; i < nb; ++i)
          for (int c = 0; c < nc; ++c)
            out[s.dof(nodes[i], c)] += k * et.w[static_cast<std::size_t>(q)] * len * d[c] * et.phi[static_cast<std::size_t>(q * nb + i)];
      }
    }
  }
  if (has_volume_density()) {
    const QuadRule1D tr = time_dependent_density() ? time_rule(derivative_rule) : QuadRule1D{{1.0}, {1.0}};
    for (int c = 0; c < s.n_cells(); ++c) {
      const CellGeometry g = s.mesh().geometry(c);
      const double jac = g.hx * g.hy;
      gather(s, u, c, loc);
      const int* nodes = s.cell_nodes(c);
      for (int q = 0; q < tab.nq(); ++q) {
        double v[2] = {0.0, 0.0};
        for (int i = 0; i < nb; ++i)
          for (int cc = 0; cc < nc; ++cc) v[cc] += loc[i * nc + cc] * tab.phi[static_cast<std::size_t>(q * nb + i)];
        const Point x = s.mesh().map_to_physical(c, tab.pts[static_cast<std::size_t>(q)]);
        double dsum[2] = {0.0, 0.0};
        for (std::size_t r = 0; r < tr.x.size(); ++r) {
          double d[2] = {0.0, 0.0};
          volume_density(t0 + tr.x[r] * k, x, v, d);
          dsum[0] += tr.w[r] * d[0];
          dsum[1] += tr.w[r] * d[1];
        }
        const double w = k * tab.w[static_cast<std::size_t>(q)] * jac;
        for (int i = 0; i < nb; ++i)
          for (int cc = 0; cc < nc; ++cc)
            out[s.dof(nodes[i], cc)] += w * dsum[cc] * tab.phi[static_cast<std::size_t>(q * nb + i)];
      }
    }
  }
  return out;
}

std::optional<double> GoalFunctional::exact_value() const {
  if (kind_ == GoalKind::l2err) return 0.0;
  if (kind_ != GoalKind::avg || !problem_->exact) return std::nullopt;
  const SpatialMesh mesh(problem_->grid);
  const QuadRule1D g = gauss_legendre(8);
  constexpr int kPieces = 64;
  const double k = problem_->T / kPieces;
  double sum = 0.0;
  for (int c = 0; c < mesh.n_active(); ++c) {
    const CellGeometry cg = mesh.geometry(c);
    for (std::size_t i = 0; i < g.x.size(); ++i)
      for (std::size_t j = 0; j < g.x.size(); ++j) {
        const Point x = mesh.map_to_physical(c, {g.x[i], g.x[j]});
        const double w = g.w[i] * g.w[j] * cg.hx * cg.hy;
        for (int m = 0; m < kPieces; ++m)
          for (std::size_t r = 0; r < g.x.size(); ++r) sum += w * k * g.w[r] * problem_->exact((m + g.x[r]) * k, x);
      }
  }
  return scale_ * norm_ * sum;
}

}  // namespace pudwr
