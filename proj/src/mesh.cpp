#include "pudwr/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>

namespace pudwr {

TemporalMesh::TemporalMesh(std::vector<double> nodes) : t_(std::move(nodes)) {
  if (t_.size() < 2) throw std::invalid_argument("temporal mesh needs at least one interval");
  for (std::size_t i = 1; i < t_.size(); ++i)
    if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("temporal mesh nodes must increase strictly");
}

TemporalMesh TemporalMesh::uniform(double T, int M) {
  if (M < 1 || !(T > 0)) throw std::invalid_argument("uniform temporal mesh needs M >= 1 and T > 0");
  std::vector<double> t(static_cast<std::size_t>(M) + 1);
  for (int m = 0; m <= M; ++m) t[static_cast<std::size_t>(m)] = T * m / M;
  t.back() = T;
  return TemporalMesh(std::move(t));
}

TemporalMesh TemporalMesh::refine(const std::vector<int>& marks) const {
  std::vector<char> flag(static_cast<std::size_t>(size()), 0);
  for (int m : marks) {
    if (m < 0 || m >= size()) throw std::out_of_range("temporal mark out of range");
    flag[static_cast<std::size_t>(m)] = 1;
  }
  std::vector<double> t;
  t.reserve(t_.size() + marks.size());
  for (int m = 0; m < size(); ++m) {
    t.push_back(t_[static_cast<std::size_t>(m)]);
    if (flag[static_cast<std::size_t>(m)]) t.push_back(0.5 * (start(m) + end(m)));
  }
  t.push_back(t_.back());
  return TemporalMesh(std::move(t));
}

CoarseGrid CoarseGrid::rectangle(double x0, double y0, double x1, double y1, int nx, int ny) {
  CoarseGrid g;
  g.x0 = x0;
  g.y0 = y0;
  g.nx = nx;
  g.ny = ny;
  g.hx = (x1 - x0) / nx;
  g.hy = (y1 - y0) / ny;
  g.present.assign(static_cast<std::size_t>(nx * ny), 1);
  return g;
}

double CoarseGrid::area() const {
  int n = 0;
  for (char c : present) n += c ? 1 : 0;
  return n * hx * hy;
}

SpatialMesh::SpatialMesh(std::shared_ptr<const CoarseGrid> grid) : grid_(std::move(grid)) {
  for (int j = 0; j < grid_->ny; ++j)
    for (int i = 0; i < grid_->nx; ++i)
      if (grid_->has(i, j)) state_[make_key(0, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j))] = 0;
  rebuild_active();
}

void SpatialMesh::rebuild_active() {
  active_.clear();
  std::function<void(CellKey)> visit = [&](CellKey k) {
    auto it = state_.find(k);
    if (it->second == -1) {
      for (int c = 0; c < 4; ++c) visit(key_child(k, c));
    } else {
      it->second = static_cast<int>(active_.size());
      active_.push_back(k);
    }
  };
  for (int j = 0; j < grid_->ny; ++j)
    for (int i = 0; i < grid_->nx; ++i)
      if (grid_->has(i, j)) visit(make_key(0, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)));
}

CellGeometry SpatialMesh::geometry_of(CellKey k) const {
  const int l = key_level(k);
  const double s = std::ldexp(1.0, -l);
  CellGeometry g;
  g.level = l;
  g.hx = grid_->hx * s;
  g.hy = grid_->hy * s;
  g.x0 = grid_->x0 + key_ix(k) * g.hx;
  g.y0 = grid_->y0 + key_iy(k) * g.hy;
  g.W = std::uint64_t{1} << (kLatticeShift - l);
  g.X0 = key_ix(k) * g.W;
  g.Y0 = key_iy(k) * g.W;
  return g;
}

int SpatialMesh::active_index(CellKey k) const {
  auto it = state_.find(k);
  return it == state_.end() ? -1 : it->second;
}

bool SpatialMesh::is_refined(CellKey k) const {
  auto it = state_.find(k);
  return it != state_.end() && it->second == -1;
}

bool SpatialMesh::key_in_domain(CellKey k) const {
  const int l = key_level(k);
  return grid_->has(static_cast<int>(key_ix(k) >> l), static_cast<int>(key_iy(k) >> l));
}

bool SpatialMesh::neighbor_key(CellKey k, int dir, CellKey& out) const {
  const int l = key_level(k);
  long ix = key_ix(k), iy = key_iy(k);
  switch (dir) {
    case 0: --ix; break;
    case 1: ++ix; break;
    case 2: --iy; break;
    default: ++iy; break;
  }
  const long nxl = static_cast<long>(grid_->nx) << l, nyl = static_cast<long>(grid_->ny) << l;
  if (ix < 0 || iy < 0 || ix >= nxl || iy >= nyl) return false;
  out = make_key(l, static_cast<std::uint32_t>(ix), static_cast<std::uint32_t>(iy));
  return key_in_domain(out);
}

int SpatialMesh::covering_active(CellKey k) const {
  while (true) {
    auto it = state_.find(k);
    if (it != state_.end()) return it->second;
    if (key_level(k) == 0) throw std::logic_error("cell key outside the mesh");
    k = key_parent(k);
  }
}

namespace {

struct Refiner {
  const SpatialMesh& mesh;
  std::unordered_map<CellKey, int>& st;

  bool active(CellKey k) const {
    auto it = st.find(k);
    return it != st.end() && it->second >= 0;
  }

  void refine_cell(CellKey k) {
    if (!active(k)) return;
    for (int dir = 0; dir < 4; ++dir) {
      CellKey n;
      if (!mesh.neighbor_key(k, dir, n)) continue;
      if (st.count(n) == 0) {
        const CellKey a = key_parent(n);
        if (!active(a)) throw std::logic_error("mesh lost one-irregularity during refinement");
        refine_unit(a);
      }
    }
    st[k] = -1;
    for (int c = 0; c < 4; ++c) st[key_child(k, c)] = 0;
  }

  // Refines k together with its siblings so that every leaf keeps a complete 2x2 patch.
  void refine_unit(CellKey k) {
    if (key_level(k) == 0) {
      refine_cell(k);
      return;
    }
    const CellKey p = key_parent(k);
    for (int c = 0; c < 4; ++c) refine_cell(key_child(p, c));
  }
};

}  // namespace

SpatialMesh SpatialMesh::refine(const std::vector<int>& marks) const {
  SpatialMesh out;
  out.grid_ = grid_;
  out.state_ = state_;
  Refiner r{out, out.state_};
  for (int m : marks) {
    if (m < 0 || m >= n_active()) throw std::out_of_range("cell mark out of range");
    const CellKey k = active_[static_cast<std::size_t>(m)];
    if (key_level(k) >= kMaxLevel) throw std::runtime_error("maximum refinement level reached");
    r.refine_unit(k);
  }
  out.rebuild_active();
  return out;
}

SpatialMesh SpatialMesh::refine_global(int times) const {
  SpatialMesh m = *this;
  for (int i = 0; i < times; ++i) {
    std::vector<int> all(static_cast<std::size_t>(m.n_active()));
    for (int c = 0; c < m.n_active(); ++c) all[static_cast<std::size_t>(c)] = c;
    m = m.refine(all);
  }
  return m;
}

Located SpatialMesh::locate(Point p) const {
  const CoarseGrid& g = *grid_;
  const double fx = (p.x - g.x0) / g.hx, fy = (p.y - g.y0) / g.hy;
  const double tol = 1e-12;
  auto candidates = [tol](double f, int n) {
    std::vector<int> c;
    int i = static_cast<int>(std::floor(f));
    if (i >= n && f <= n + tol) i = n - 1;
    if (i < 0 && f >= -tol) i = 0;
    c.push_back(i);
    if (std::abs(f - std::round(f)) < tol) {
      const int r = static_cast<int>(std::round(f));
      if (r - 1 != i && r - 1 >= 0) c.push_back(r - 1);
      if (r != i && r < n) c.push_back(r);
    }
    return c;
  };
  for (int i : candidates(fx, g.nx)) {
    for (int j : candidates(fy, g.ny)) {
      if (!g.has(i, j)) continue;
      CellKey k = make_key(0, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
      while (true) {
        auto it = state_.find(k);
        const CellGeometry cg = geometry_of(k);
        const double rx = (p.x - cg.x0) / cg.hx, ry = (p.y - cg.y0) / cg.hy;
        if (it->second >= 0) {
          return {it->second, {std::clamp(rx, 0.0, 1.0), std::clamp(ry, 0.0, 1.0)}};
        }
        const int c = (rx >= 0.5 ? 1 : 0) | (ry >= 0.5 ? 2 : 0);
        k = key_child(k, c);
      }
    }
  }
  throw std::domain_error("point outside the spatial domain");
}

Point SpatialMesh::map_to_physical(int cell, Point ref) const {
  const CellGeometry g = geometry(cell);
  return {g.x0 + ref.x * g.hx, g.y0 + ref.y * g.hy};
}

double SpatialMesh::area() const {
  double a = 0.0;
  for (CellKey k : active_) {
    const CellGeometry g = geometry_of(k);
    a += g.hx * g.hy;
  }
  return a;
}

int SpatialMesh::max_level() const {
  int l = 0;
  for (CellKey k : active_) l = std::max(l, key_level(k));
  return l;
}

bool SpatialMesh::is_one_irregular() const {
  for (CellKey k : active_) {
    for (int dir = 0; dir < 4; ++dir) {
      CellKey n;
      if (!neighbor_key(k, dir, n)) continue;
      auto it = state_.find(n);
      if (it == state_.end()) {
        if (active_index(key_parent(n)) < 0) return false;
      } else if (it->second == -1) {
        // the two children of n facing k must be leaves
        const int opp = dir ^ 1;
        for (int c = 0; c < 4; ++c) {
          const bool faces = (opp == 0 && (c & 1) == 0) || (opp == 1 && (c & 1) == 1) ||
                             (opp == 2 && (c >> 1) == 0) || (opp == 3 && (c >> 1) == 1);
          if (faces && active_index(key_child(n, c)) < 0) return false;
        }
      }
    }
  }
  return true;
}

bool SpatialMesh::is_patch_structured() const {
  for (CellKey k : active_) {
    if (key_level(k) == 0) return false;
    const CellKey p = key_parent(k);
    for (int c = 0; c < 4; ++c)
      if (active_index(key_child(p, c)) < 0) return false;
  }
  return true;
}

void SpatialMesh::write_vtk(const std::string& path, const std::vector<double>* vertex_data,
                           const std::string& data_name) const {
  std::unordered_map<NodeKey, int> vid;
  std::vector<Point> pts;
  std::vector<int> conn;
  for (int c = 0; c < n_active(); ++c) {
    const CellGeometry g = geometry(c);
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        const NodeKey nk = make_node_key(g.X0 + i * g.W, g.Y0 + j * g.W);
        auto [it, fresh] = vid.emplace(nk, static_cast<int>(pts.size()));
        if (fresh) pts.push_back({g.x0 + i * g.hx, g.y0 + j * g.hy});
        conn.push_back(it->second);
      }
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.precision(17);
  os << "# vtk DataFile Version 3.0\nslab mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << pts.size() << " double\n";
  for (const Point& p : pts) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << n_active() << ' ' << 5 * n_active() << '\n';
  for (int c = 0; c < n_active(); ++c) {
    const int* v = &conn[static_cast<std::size_t>(4 * c)];
    // VTK_QUAD expects counter-clockwise ordering
    os << "4 " << v[0] << ' ' << v[1] << ' ' << v[3] << ' ' << v[2] << '\n';
  }
  os << "CELL_TYPES " << n_active() << '\n';
  for (int c = 0; c < n_active(); ++c) os << "9\n";
  os << "CELL_DATA " << n_active() << "\nSCALARS level int 1\nLOOKUP_TABLE default\n";
  for (CellKey k : active_) os << key_level(k) << '\n';
  if (vertex_data) {
    if (vertex_data->size() != pts.size()) throw std::invalid_argument("vertex data size mismatch");
    os << "POINT_DATA " << pts.size() << "\nSCALARS " << data_name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : *vertex_data) os << v << '\n';
  }
}

}  // namespace pudwr
