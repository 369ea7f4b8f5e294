#include "pudwr/fespace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pudwr {

QuadRule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("Gauss rule needs n >= 1");
  QuadRule1D r;
  r.x.resize(static_cast<std::size_t>(n));
  r.w.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1,1] -> [0,1], ascending order
    r.x[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
    r.x[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (1.0 + x);
    r.w[static_cast<std::size_t>(i)] = 0.5 * w;
    r.w[static_cast<std::size_t>(n - 1 - i)] = 0.5 * w;
  }
  if (n % 2 == 1) r.x[static_cast<std::size_t>(n / 2)] = 0.5;
  return r;
}

QuadRule1D time_rule(TimeQuad q) {
  switch (q) {
    case TimeQuad::midpoint: return {{0.5}, {1.0}};
    case TimeQuad::rightbox: return {{1.0}, {1.0}};
    case TimeQuad::simpson: return {{0.0, 0.5, 1.0}, {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0}};
    case TimeQuad::gauss2: return gauss_legendre(2);
  }
  throw std::logic_error("unknown time rule");
}

TimeQuad parse_time_quad(const std::string& s) {
  if (s == "midpoint") return TimeQuad::midpoint;
  if (s == "rightbox") return TimeQuad::rightbox;
  if (s == "simpson") return TimeQuad::simpson;
  if (s == "gauss2") return TimeQuad::gauss2;
  throw std::invalid_argument("unknown temporal quadrature '" + s + "'");
}

std::string to_string(TimeQuad q) {
  switch (q) {
    case TimeQuad::midpoint: return "midpoint";
    case TimeQuad::rightbox: return "rightbox";
    case TimeQuad::simpson: return "simpson";
    case TimeQuad::gauss2: return "gauss2";
  }
  return "?";
}

double lagrange_1d(int order, int i, double x) {
  if (order == 1) return i == 0 ? 1.0 - x : x;
  switch (i) {
    case 0: return 2.0 * (x - 0.5) * (x - 1.0);
    case 1: return 4.0 * x * (1.0 - x);
    default: return 2.0 * x * (x - 0.5);
  }
}

double lagrange_1d_deriv(int order, int i, double x) {
  if (order == 1) return i == 0 ? -1.0 : 1.0;
  switch (i) {
    case 0: return 4.0 * x - 3.0;
    case 1: return 4.0 - 8.0 * x;
    default: return 4.0 * x - 1.0;
  }
}

double shape_value(int order, int node, Point r) {
  const int n1 = order + 1;
  return lagrange_1d(order, node % n1, r.x) * lagrange_1d(order, node / n1, r.y);
}

Point shape_grad(int order, int node, Point r) {
  const int n1 = order + 1;
  const int i = node % n1, j = node / n1;
  return {lagrange_1d_deriv(order, i, r.x) * lagrange_1d(order, j, r.y),
          lagrange_1d(order, i, r.x) * lagrange_1d_deriv(order, j, r.y)};
}

ShapeTable make_shape_table(int order, const std::vector<Point>& pts, const std::vector<double>& w) {
  ShapeTable t;
  t.order = order;
  t.nb = (order + 1) * (order + 1);
  t.pts = pts;
  t.w = w;
  const std::size_t nq = pts.size(), nb = static_cast<std::size_t>(t.nb);
  t.phi.resize(nq * nb);
  t.dx.resize(nq * nb);
  t.dy.resize(nq * nb);
  for (std::size_t q = 0; q < nq; ++q)
    for (std::size_t i = 0; i < nb; ++i) {
      t.phi[q * nb + i] = shape_value(order, static_cast<int>(i), pts[q]);
      const Point g = shape_grad(order, static_cast<int>(i), pts[q]);
      t.dx[q * nb + i] = g.x;
      t.dy[q * nb + i] = g.y;
    }
  return t;
}

ShapeTable make_shape_table(int order, int n_gauss) {
  const QuadRule1D g = gauss_legendre(n_gauss);
  std::vector<Point> pts;
  std::vector<double> w;
  for (std::size_t j = 0; j < g.x.size(); ++j)
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      pts.push_back({g.x[i], g.x[j]});
      w.push_back(g.w[i] * g.w[j]);
    }
  return make_shape_table(order, pts, w);
}

ShapeTable make_edge_table(int order, int n_gauss, int dir) {
  const QuadRule1D g = gauss_legendre(n_gauss);
  std::vector<Point> pts;
  for (double s : g.x) {
    switch (dir) {
      case 0: pts.push_back({0.0, s}); break;
      case 1: pts.push_back({1.0, s}); break;
      case 2: pts.push_back({s, 0.0}); break;
      default: pts.push_back({s, 1.0}); break;
    }
  }
  return make_shape_table(order, pts, g.w);
}

namespace {

// Lattice position of the point at parameter p/den along edge dir of a cell.
NodeKey edge_point(const CellGeometry& g, int dir, std::uint64_t p, std::uint64_t den) {
  const std::uint64_t off = g.W * p / den;
  switch (dir) {
    case 0: return make_node_key(g.X0, g.Y0 + off);
    case 1: return make_node_key(g.X0 + g.W, g.Y0 + off);
    case 2: return make_node_key(g.X0 + off, g.Y0);
    default: return make_node_key(g.X0 + off, g.Y0 + g.W);
  }
}

}  // namespace

Space::Space(MeshPtr mesh, int order, int ncomp, const BoundaryMarker& marker)
    : mesh_(std::move(mesh)), order_(order), ncomp_(ncomp) {
  if (order != 1 && order != 2) throw std::invalid_argument("only Q1 and Q2 are supported");
  if (ncomp < 1 || ncomp > 2) throw std::invalid_argument("one or two components supported");
  const SpatialMesh& m = *mesh_;
  const int npc = nodes_per_cell();
  const double lat = std::ldexp(1.0, -kLatticeShift);
  cell_nodes_.resize(static_cast<std::size_t>(m.n_active() * npc));
  for (int c = 0; c < m.n_active(); ++c) {
    const CellGeometry g = m.geometry(c);
    const std::uint64_t step = g.W / static_cast<std::uint64_t>(order);
    for (int j = 0; j <= order; ++j)
      for (int i = 0; i <= order; ++i) {
        const std::uint64_t X = g.X0 + static_cast<std::uint64_t>(i) * step;
        const std::uint64_t Y = g.Y0 + static_cast<std::uint64_t>(j) * step;
        const NodeKey nk = make_node_key(X, Y);
        auto [it, fresh] = node_index_.emplace(nk, static_cast<int>(points_.size()));
        if (fresh) {
          keys_.push_back(nk);
          points_.push_back({m.grid().x0 + m.grid().hx * (static_cast<double>(X) * lat),
                             m.grid().y0 + m.grid().hy * (static_cast<double>(Y) * lat)});
        }
        cell_nodes_[static_cast<std::size_t>(c * npc + i + (order + 1) * j)] = it->second;
      }
  }

  hanging_flag_.assign(points_.size(), 0);
  std::vector<char> dir_flag(points_.size(), 0);
  for (int c = 0; c < m.n_active(); ++c) {
    const CellKey k = m.key(c);
    const CellGeometry g = m.geometry(c);
    for (int dir = 0; dir < 4; ++dir) {
      CellKey nb;
      if (!m.neighbor_key(k, dir, nb)) {
        Point mid{g.x0 + 0.5 * g.hx, g.y0 + 0.5 * g.hy};
        Point normal{0.0, 0.0};
        switch (dir) {
          case 0: mid.x = g.x0; normal.x = -1.0; break;
          case 1: mid.x = g.x0 + g.hx; normal.x = 1.0; break;
          case 2: mid.y = g.y0; normal.y = -1.0; break;
          default: mid.y = g.y0 + g.hy; normal.y = 1.0; break;
        }
        const BoundaryKind kind = marker ? marker(mid, normal) : BoundaryKind::Dirichlet;
        faces_.push_back({c, dir, kind});
        if (kind == BoundaryKind::Dirichlet)
          for (int p = 0; p <= order; ++p) {
            const int n = node_index_.at(edge_point(g, dir, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(order)));
            if (!dir_flag[static_cast<std::size_t>(n)]) {
              dir_flag[static_cast<std::size_t>(n)] = 1;
              dirichlet_nodes_.push_back(n);
            }
          }
        continue;
      }
      if (!m.is_refined(nb)) continue;
      // finer neighbour: its extra edge nodes hang on this cell's edge trace
      if (order == 1) {
        const int a = node_index_.at(edge_point(g, dir, 0, 1));
        const int b = node_index_.at(edge_point(g, dir, 1, 1));
        const int h = node_index_.at(edge_point(g, dir, 1, 2));
        hanging_.push_back({h, {{a, 0.5}, {b, 0.5}}});
        hanging_flag_[static_cast<std::size_t>(h)] = 1;
      } else {
        const int a = node_index_.at(edge_point(g, dir, 0, 2));
        const int mid = node_index_.at(edge_point(g, dir, 1, 2));
        const int b = node_index_.at(edge_point(g, dir, 2, 2));
        const int h1 = node_index_.at(edge_point(g, dir, 1, 4));
        const int h3 = node_index_.at(edge_point(g, dir, 3, 4));
        hanging_.push_back({h1, {{a, 0.375}, {mid, 0.75}, {b, -0.125}}});
        hanging_.push_back({h3, {{a, -0.125}, {mid, 0.75}, {b, 0.375}}});
        hanging_flag_[static_cast<std::size_t>(h1)] = 1;
        hanging_flag_[static_cast<std::size_t>(h3)] = 1;
      }
    }
  }

  hanging_constraints_ = Constraints(n_dofs());
  for (const HangingNode& h : hanging_)
    for (int comp = 0; comp < ncomp_; ++comp) {
      hanging_constraints_.add_line(dof(h.node, comp));
      for (auto [mn, w] : h.masters) hanging_constraints_.add_entry(dof(h.node, comp), dof(mn, comp), w);
    }
  hanging_constraints_.close();
}

int Space::find_node(NodeKey k) const {
  auto it = node_index_.find(k);
  return it == node_index_.end() ? -1 : it->second;
}

Constraints Space::constraints(const std::function<double(int, Point)>* dirichlet) const {
  Constraints c(n_dofs());
  for (const HangingNode& h : hanging_)
    for (int comp = 0; comp < ncomp_; ++comp) {
      c.add_line(dof(h.node, comp));
      for (auto [mn, w] : h.masters) c.add_entry(dof(h.node, comp), dof(mn, comp), w);
    }
  for (int n : dirichlet_nodes_)
    for (int comp = 0; comp < ncomp_; ++comp) {
      c.add_line(dof(n, comp));
      if (dirichlet) c.set_inhomogeneity(dof(n, comp), (*dirichlet)(comp, points_[static_cast<std::size_t>(n)]));
    }
  c.close();
  return c;
}

void gather(const Space& s, const Vector& u, int cell, double* local) {
  const int* nodes = s.cell_nodes(cell);
  const int nc = s.n_components();
  for (int i = 0; i < s.nodes_per_cell(); ++i)
    for (int c = 0; c < nc; ++c) local[i * nc + c] = u[s.dof(nodes[i], c)];
}

FieldPoint evaluate(const Space& s, const Vector& u, int cell, Point ref) {
  FieldPoint fp;
  const CellGeometry g = s.mesh().geometry(cell);
  const int* nodes = s.cell_nodes(cell);
  for (int i = 0; i < s.nodes_per_cell(); ++i) {
    const double phi = shape_value(s.order(), i, ref);
    const Point gr = shape_grad(s.order(), i, ref);
    for (int c = 0; c < s.n_components(); ++c) {
      const double ui = u[s.dof(nodes[i], c)];
      fp.v[static_cast<std::size_t>(c)] += ui * phi;
      fp.g[static_cast<std::size_t>(c)].x += ui * gr.x / g.hx;
      fp.g[static_cast<std::size_t>(c)].y += ui * gr.y / g.hy;
    }
  }
  return fp;
}

double evaluate_at(const Space& s, const Vector& u, Point x, int comp) {
  const Located loc = s.mesh().locate(x);
  return evaluate(s, u, loc.cell, loc.ref).v[static_cast<std::size_t>(comp)];
}

Vector interpolate_function(const Space& s, const std::function<double(int, Point)>& f) {
  Vector u(s.n_dofs());
  for (int n = 0; n < s.n_nodes(); ++n)
    for (int c = 0; c < s.n_components(); ++c) u[s.dof(n, c)] = f(c, s.node_point(n));
  s.hanging_constraints().distribute(u);
  return u;
}

namespace {

void require_same_mesh(const Space& a, const Space& b) {
  if (a.mesh_ptr() != b.mesh_ptr() && !a.mesh().same_cells(b.mesh()))
    throw std::invalid_argument("spaces live on different meshes");
  if (a.n_components() != b.n_components()) throw std::invalid_argument("component count mismatch");
}

}  // namespace

Vector interpolate_down(const Space& high, const Vector& u, const Space& low) {
  require_same_mesh(high, low);
  if (high.order() != 2 || low.order() != 1) throw std::invalid_argument("interpolate_down maps Q2 to Q1");
  Vector out(low.n_dofs());
  const int nc = low.n_components();
  for (int n = 0; n < low.n_nodes(); ++n) {
    const int hn = high.find_node(low.node_key(n));
    for (int c = 0; c < nc; ++c) out[low.dof(n, c)] = u[high.dof(hn, c)];
  }
  low.hanging_constraints().distribute(out);
  return out;
}

Vector embed_up(const Space& low, const Vector& u, const Space& high) {
  require_same_mesh(high, low);
  if (high.order() != 2 || low.order() != 1) throw std::invalid_argument("embed_up maps Q1 to Q2");
  Vector out = Vector::Zero(high.n_dofs());
  std::vector<char> done(static_cast<std::size_t>(high.n_nodes()), 0);
  const int nc = low.n_components();
  double loc[8];
  for (int cell = 0; cell < high.n_cells(); ++cell) {
    gather(low, u, cell, loc);
    const int* hn = high.cell_nodes(cell);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) {
        const int n = hn[i + 3 * j];
        if (done[static_cast<std::size_t>(n)]) continue;
        done[static_cast<std::size_t>(n)] = 1;
        const Point r{0.5 * i, 0.5 * j};
        for (int c = 0; c < nc; ++c) {
          double v = 0.0;
          for (int a = 0; a < 4; ++a) v += loc[a * nc + c] * shape_value(1, a, r);
          out[high.dof(n, c)] = v;
        }
      }
  }
  high.hanging_constraints().distribute(out);
  return out;
}

Vector reconstruct_up(const Space& low, const Vector& u, const Space& high) {
  require_same_mesh(high, low);
  if (high.order() != 2 || low.order() != 1) throw std::invalid_argument("reconstruct_up maps Q1 to Q2");
  const SpatialMesh& m = high.mesh();
  if (!m.is_patch_structured()) throw std::invalid_argument("mesh is not patch structured");
  std::vector<CellKey> parents;
  parents.reserve(static_cast<std::size_t>(m.n_active() / 4 + 1));
  for (int c = 0; c < m.n_active(); ++c) {
    const CellKey k = m.key(c);
    if ((key_ix(k) & 1u) == 0 && (key_iy(k) & 1u) == 0) parents.push_back(key_parent(k));
  }
  std::stable_sort(parents.begin(), parents.end(),
                   [](CellKey a, CellKey b) { return key_level(a) < key_level(b); });
  const int nc = low.n_components();
  Vector out = Vector::Zero(high.n_dofs());
  std::vector<char> done(static_cast<std::size_t>(high.n_nodes()), 0);
  for (CellKey p : parents) {
    const CellGeometry g = m.geometry_of(p);
    double vals[9][2];
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) {
        const int n = low.find_node(make_node_key(g.X0 + g.W * i / 2, g.Y0 + g.W * j / 2));
        for (int c = 0; c < nc; ++c) vals[i + 3 * j][c] = u[low.dof(n, c)];
      }
    for (int ch = 0; ch < 4; ++ch) {
      const int cell = m.active_index(key_child(p, ch));
      const int* hn = high.cell_nodes(cell);
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) {
          const int n = hn[i + 3 * j];
          if (done[static_cast<std::size_t>(n)]) continue;
          done[static_cast<std::size_t>(n)] = 1;
          const Point r{0.5 * ((ch & 1) + 0.5 * i), 0.5 * ((ch >> 1) + 0.5 * j)};
          for (int c = 0; c < nc; ++c) {
            double v = 0.0;
            for (int a = 0; a < 9; ++a) v += vals[a][c] * shape_value(2, a, r);
            out[high.dof(n, c)] = v;
          }
        }
    }
  }
  high.hanging_constraints().distribute(out);
  return out;
}

Transfer::Transfer(const Space& src, const Space& dst) {
  if (src.n_components() != dst.n_components()) throw std::invalid_argument("component count mismatch");
  if (src.order() == dst.order() &&
      (src.mesh_ptr() == dst.mesh_ptr() || src.mesh().same_cells(dst.mesh()))) {
    identity_ = true;
    return;
  }
  identity_ = false;
  const int nc = dst.n_components();
  // node-level rows first, hanging rows expanded afterwards
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(dst.n_nodes()));
  for (int n = 0; n < dst.n_nodes(); ++n) {
    if (dst.node_is_hanging(n)) continue;
    const Located loc = src.mesh().locate(dst.node_point(n));
    const int* sn = src.cell_nodes(loc.cell);
    auto& row = rows[static_cast<std::size_t>(n)];
    for (int a = 0; a < src.nodes_per_cell(); ++a) {
      const double w = shape_value(src.order(), a, loc.ref);
      if (std::abs(w) > 1e-15) row.emplace_back(sn[a], w);
    }
  }
  for (const HangingNode& h : dst.hanging_nodes()) {
    auto& row = rows[static_cast<std::size_t>(h.node)];
    for (auto [mn, w] : h.masters)
      for (auto [sn, ws] : rows[static_cast<std::size_t>(mn)]) row.emplace_back(sn, w * ws);
  }
  std::vector<Triplet> t;
  for (int n = 0; n < dst.n_nodes(); ++n)
    for (auto [sn, w] : rows[static_cast<std::size_t>(n)])
      for (int c = 0; c < nc; ++c) t.emplace_back(dst.dof(n, c), src.dof(sn, c), w);
  P_.resize(dst.n_dofs(), src.n_dofs());
  P_.setFromTriplets(t.begin(), t.end());
}

Vector transfer(const Space& src, const Vector& u, const Space& dst) { return Transfer(src, dst).apply(u); }

Vector temporal_reconstruct_up(const TemporalMesh& tm, const std::vector<Vector>& z, int m, double tau) {
  const int M = tm.size();
  if (static_cast<int>(z.size()) != M) throw std::invalid_argument("one value per interval expected");
  if (M < 2) throw std::invalid_argument("temporal reconstruction needs at least two intervals");
  const double t = tm.start(m) + tau * tm.length(m);
  if (m == 0) {
    // line through (t_1, z_0) and (t_2, z_1)
    const double s = (t - tm.end(0)) / tm.length(1);
    return z[0] + s * (z[1] - z[0]);
  }
  return z[static_cast<std::size_t>(m - 1)] + tau * (z[static_cast<std::size_t>(m)] - z[static_cast<std::size_t>(m - 1)]);
}

}  // namespace pudwr
