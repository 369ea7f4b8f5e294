#pragma once

#include "pudwr/linalg.hpp"
#include "pudwr/mesh.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace pudwr {

struct QuadRule1D {
  std::vector<double> x;  // points on [0,1]
  std::vector<double> w;  // weights summing to 1
};
QuadRule1D gauss_legendre(int n);

enum class TimeQuad { midpoint, rightbox, simpson, gauss2 };
QuadRule1D time_rule(TimeQuad q);
TimeQuad parse_time_quad(const std::string& s);
std::string to_string(TimeQuad q);

// Tensor-product Lagrange shape functions on [0,1]^2; node index i + (s+1) j.
double shape_value(int order, int node, Point ref);
Point shape_grad(int order, int node, Point ref);
double lagrange_1d(int order, int i, double x);
double lagrange_1d_deriv(int order, int i, double x);

// Shape values and reference gradients at the points of an n x n Gauss rule.
struct ShapeTable {
  int order = 1;
  int nb = 4;
  std::vector<Point> pts;
  std::vector<double> w;
  std::vector<double> phi;  // [q * nb + i]
  std::vector<double> dx;   // reference derivatives
  std::vector<double> dy;
  int nq() const { return static_cast<int>(pts.size()); }
};
ShapeTable make_shape_table(int order, int n_gauss);
ShapeTable make_shape_table(int order, const std::vector<Point>& pts, const std::vector<double>& w);
// Points of an n-point Gauss rule along edge dir of the reference square (weights on [0,1]).
ShapeTable make_edge_table(int order, int n_gauss, int dir);

enum class BoundaryKind { Neumann, Dirichlet, Robin };
using BoundaryMarker = std::function<BoundaryKind(Point mid, Point normal)>;

struct BoundaryFace {
  int cell;
  int dir;
  BoundaryKind kind;
};

struct HangingNode {
  int node;
  std::vector<std::pair<int, double>> masters;
};

// Continuous Q_s Lagrange space (s = 1, 2) with ncomp components; dof = node * ncomp + comp.
class Space {
 public:
  Space(MeshPtr mesh, int order, int ncomp, const BoundaryMarker& marker);

  const SpatialMesh& mesh() const { return *mesh_; }
  MeshPtr mesh_ptr() const { return mesh_; }
  int order() const { return order_; }
  int n_components() const { return ncomp_; }
  int n_nodes() const { return static_cast<int>(points_.size()); }
  int n_dofs() const { return n_nodes() * ncomp_; }
  int nodes_per_cell() const { return (order_ + 1) * (order_ + 1); }
  int n_cells() const { return mesh_->n_active(); }
  const int* cell_nodes(int cell) const { return &cell_nodes_[static_cast<std::size_t>(cell * nodes_per_cell())]; }
  int dof(int node, int comp) const { return node * ncomp_ + comp; }
  Point node_point(int n) const { return points_[static_cast<std::size_t>(n)]; }
  NodeKey node_key(int n) const { return keys_[static_cast<std::size_t>(n)]; }
  int find_node(NodeKey k) const;
  bool node_is_hanging(int n) const { return hanging_flag_[static_cast<std::size_t>(n)] != 0; }

  const std::vector<BoundaryFace>& boundary_faces() const { return faces_; }
  const std::vector<int>& dirichlet_nodes() const { return dirichlet_nodes_; }
  const std::vector<HangingNode>& hanging_nodes() const { return hanging_; }
  const Constraints& hanging_constraints() const { return hanging_constraints_; }
  // Hanging plus Dirichlet constraints; dirichlet == nullptr gives homogeneous boundary values.
  Constraints constraints(const std::function<double(int comp, Point x)>* dirichlet) const;

 private:
  MeshPtr mesh_;
  int order_, ncomp_;
  std::vector<int> cell_nodes_;
  std::vector<Point> points_;
  std::vector<NodeKey> keys_;
  std::unordered_map<NodeKey, int> node_index_;
  std::vector<BoundaryFace> faces_;
  std::vector<int> dirichlet_nodes_;
  std::vector<HangingNode> hanging_;
  std::vector<char> hanging_flag_;
  Constraints hanging_constraints_;
};

using SpacePtr = std::shared_ptr<const Space>;

// Values and physical gradients of a field at one point, up to two components.
struct FieldPoint {
  std::array<double, 2> v{0.0, 0.0};
  std::array<Point, 2> g{};
};

void gather(const Space& space, const Vector& u, int cell, double* local);
FieldPoint evaluate(const Space& space, const Vector& u, int cell, Point ref);
double evaluate_at(const Space& space, const Vector& u, Point x, int comp = 0);

// Nodal interpolation of a function; hanging nodes then follow their constraints.
Vector interpolate_function(const Space& space, const std::function<double(int comp, Point x)>& f);

// i_h^2: Q2 -> Q1 by vertex values.
Vector interpolate_down(const Space& high, const Vector& u, const Space& low);
// Natural embedding Q1 -> Q2 (same function).
Vector embed_up(const Space& low, const Vector& u, const Space& high);
// i_{2h}^2: biquadratic interpolation of the nine Q1 values of every 2x2 sibling patch.
Vector reconstruct_up(const Space& low, const Vector& u, const Space& high);

// Point-evaluation transfer between spaces on (possibly different) meshes of the same coarse grid.
class Transfer {
 public:
  Transfer() = default;
  Transfer(const Space& src, const Space& dst);
  bool identity() const { return identity_; }
  Vector apply(const Vector& u) const { return identity_ ? u : Vector(P_ * u); }
  Vector apply_transpose(const Vector& v) const { return identity_ ? v : Vector(P_.transpose() * v); }
  const SparseMatrix& matrix() const { return P_; }

 private:
  bool identity_ = true;
  SparseMatrix P_;
};
Vector transfer(const Space& src, const Vector& u, const Space& dst);

// i_k^1: right endpoint value of the interval.
inline const Vector& temporal_interp_down(const Vector& /*left*/, const Vector& right) { return right; }
// i_{2k}^1 on interval m evaluated at tau in [0,1]; z holds the dG(0) values of all intervals.
// On the first interval the line of the second interval is extended backwards.
Vector temporal_reconstruct_up(const TemporalMesh& tm, const std::vector<Vector>& z, int m, double tau);

}  // namespace pudwr
