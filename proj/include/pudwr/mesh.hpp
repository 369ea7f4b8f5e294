#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace pudwr {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Partition 0 = t_0 < t_1 < ... < t_M = T. Intervals are 0-based: I_m = (t_m, t_{m+1}).
class TemporalMesh {
 public:
  TemporalMesh() = default;
  explicit TemporalMesh(std::vector<double> nodes);
  static TemporalMesh uniform(double T, int M);

  int size() const { return static_cast<int>(t_.size()) - 1; }
  double start(int m) const { return t_[m]; }
  double end(int m) const { return t_[m + 1]; }
  double length(int m) const { return t_[m + 1] - t_[m]; }
  double end_time() const { return t_.back(); }
  const std::vector<double>& nodes() const { return t_; }

  // Bisects every interval listed in marks (0-based, duplicates ignored).
  TemporalMesh refine(const std::vector<int>& marks) const;

 private:
  std::vector<double> t_;
};

// Structured array of nx * ny equal rectangles, some of which may be absent.
struct CoarseGrid {
  double x0 = 0.0, y0 = 0.0, hx = 1.0, hy = 1.0;
  int nx = 1, ny = 1;
  std::vector<char> present;

  static CoarseGrid rectangle(double x0, double y0, double x1, double y1, int nx, int ny);
  bool has(int i, int j) const {
    return i >= 0 && j >= 0 && i < nx && j < ny && present[static_cast<std::size_t>(j * nx + i)];
  }
  void remove(int i, int j) { present[static_cast<std::size_t>(j * nx + i)] = 0; }
  double area() const;
};

// Cell keys pack (level, ix, iy) where ix, iy index the cell within the level's global lattice.
using CellKey = std::uint64_t;
constexpr int kMaxLevel = 24;

inline CellKey make_key(int level, std::uint32_t ix, std::uint32_t iy) {
  return (static_cast<std::uint64_t>(level) << 58) | (static_cast<std::uint64_t>(ix) << 29) |
         static_cast<std::uint64_t>(iy);
}
inline int key_level(CellKey k) { return static_cast<int>(k >> 58); }
inline std::uint32_t key_ix(CellKey k) { return static_cast<std::uint32_t>((k >> 29) & 0x1FFFFFFFu); }
inline std::uint32_t key_iy(CellKey k) { return static_cast<std::uint32_t>(k & 0x1FFFFFFFu); }
inline CellKey key_parent(CellKey k) { return make_key(key_level(k) - 1, key_ix(k) >> 1, key_iy(k) >> 1); }
// Children in lexicographic order: (0,0), (1,0), (0,1), (1,1).
inline CellKey key_child(CellKey k, int c) {
  return make_key(key_level(k) + 1, (key_ix(k) << 1) | static_cast<std::uint32_t>(c & 1),
                  (key_iy(k) << 1) | static_cast<std::uint32_t>(c >> 1));
}

// Node positions live on an integer lattice fine enough to hold Q2 nodes of the deepest level.
using NodeKey = std::uint64_t;
constexpr int kLatticeShift = kMaxLevel + 1;
inline NodeKey make_node_key(std::uint64_t X, std::uint64_t Y) { return (X << 32) | Y; }

struct CellGeometry {
  double x0, y0, hx, hy;
  int level;
  std::uint64_t X0, Y0, W;  // lattice origin and lattice width of the cell
};

struct Located {
  int cell;
  Point ref;
};

// Edge directions: 0 = left (x-), 1 = right (x+), 2 = bottom (y-), 3 = top (y+).
class SpatialMesh {
 public:
  explicit SpatialMesh(std::shared_ptr<const CoarseGrid> grid);

  const CoarseGrid& grid() const { return *grid_; }
  std::shared_ptr<const CoarseGrid> grid_ptr() const { return grid_; }
  int n_active() const { return static_cast<int>(active_.size()); }
  CellKey key(int cell) const { return active_[static_cast<std::size_t>(cell)]; }
  const std::vector<CellKey>& active_keys() const { return active_; }
  CellGeometry geometry(int cell) const { return geometry_of(key(cell)); }
  CellGeometry geometry_of(CellKey k) const;

  // -1 if the key is not an active cell of this mesh.
  int active_index(CellKey k) const;
  bool in_tree(CellKey k) const { return state_.count(k) != 0; }
  bool is_refined(CellKey k) const;
  bool key_in_domain(CellKey k) const;
  // Same-level neighbour across edge dir; returns false if it lies outside the domain.
  bool neighbor_key(CellKey k, int dir, CellKey& out) const;
  // Active cell covering the region of k (k itself or an ancestor); -1 if k is refined here.
  int covering_active(CellKey k) const;

  // Marked cells are refined together with their sibling patch; closure restores one-irregularity.
  SpatialMesh refine(const std::vector<int>& marks) const;
  SpatialMesh refine_global(int times = 1) const;

  Located locate(Point p) const;
  Point map_to_physical(int cell, Point ref) const;

  double area() const;
  int max_level() const;
  bool is_one_irregular() const;
  bool is_patch_structured() const;
  bool same_cells(const SpatialMesh& other) const { return active_ == other.active_; }

  void write_vtk(const std::string& path, const std::vector<double>* vertex_data = nullptr,
                 const std::string& data_name = "u") const;

 private:
  SpatialMesh() = default;
  void rebuild_active();

  std::shared_ptr<const CoarseGrid> grid_;
  std::vector<CellKey> active_;
  // key -> active index, or -1 for refined (interior) tree nodes
  std::unordered_map<CellKey, int> state_;
};

using MeshPtr = std::shared_ptr<const SpatialMesh>;

// One spatial mesh per temporal interval; equal meshes may share the pointer.
using SlabMeshSequence = std::vector<MeshPtr>;

}  // namespace pudwr
