#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pudwr/mesh.hpp"
#include "pudwr/problems.hpp"

#include <cmath>
#include <random>

using namespace pudwr;

namespace {

std::shared_ptr<const CoarseGrid> square(int n) {
  return std::make_shared<const CoarseGrid>(CoarseGrid::rectangle(0.0, 0.0, 1.0, 1.0, n, n));
}

// Levels across every edge, found by probing just outside each edge at several points.
int max_level_jump(const SpatialMesh& m) {
  int worst = 0;
  for (int c = 0; c < m.n_active(); ++c) {
    const CellGeometry g = m.geometry(c);
    for (int dir = 0; dir < 4; ++dir)
      for (double s : {0.1, 0.37, 0.5, 0.63, 0.9}) {
        Point p;
        const double eps = 1e-9;
        if (dir < 2) {
          p = {dir == 0 ? g.x0 - eps : g.x0 + g.hx + eps, g.y0 + s * g.hy};
        } else {
          p = {g.x0 + s * g.hx, dir == 2 ? g.y0 - eps : g.y0 + g.hy + eps};
        }
        const auto& grid = m.grid();
        if (p.x < grid.x0 || p.y < grid.y0 || p.x > grid.x0 + grid.nx * grid.hx || p.y > grid.y0 + grid.ny * grid.hy)
          continue;
        const int ix = static_cast<int>(std::floor((p.x - grid.x0) / grid.hx));
        const int iy = static_cast<int>(std::floor((p.y - grid.y0) / grid.hy));
        if (!grid.has(ix, iy)) continue;
        const int other = m.locate(p).cell;
        worst = std::max(worst, std::abs(m.geometry(other).level - g.level));
      }
  }
  return worst;
}

double cell_area_sum(const SpatialMesh& m) {
  double a = 0.0;
  for (int c = 0; c < m.n_active(); ++c) a += m.geometry(c).hx * m.geometry(c).hy;
  return a;
}

}  // namespace

TEST_CASE("temporal mesh refinement") {
  const TemporalMesh tm = TemporalMesh::uniform(1.0, 16);
  CHECK(tm.refine({}).nodes() == tm.nodes());

  std::vector<int> all(16);
  for (int i = 0; i < 16; ++i) all[static_cast<std::size_t>(i)] = i;
  const TemporalMesh r = tm.refine(all);
  REQUIRE(r.size() == 32);
  for (int m = 0; m < 32; ++m) CHECK(r.length(m) == doctest::Approx(1.0 / 32).epsilon(1e-14));

  const TemporalMesh two = TemporalMesh::uniform(1.0, 2);
  const TemporalMesh three = two.refine({1, 1});
  REQUIRE(three.size() == 3);
  CHECK(three.nodes() == std::vector<double>{0.0, 0.5, 0.75, 1.0});
  CHECK_THROWS(two.refine({2}));
}

TEST_CASE("temporal refinement keeps the total length") {
  std::mt19937 rng(7);
  TemporalMesh tm = TemporalMesh::uniform(60.0, 7);
  for (int pass = 0; pass < 6; ++pass) {
    std::vector<int> marks;
    for (int m = 0; m < tm.size(); ++m)
      if (rng() % 3 == 0) marks.push_back(m);
    tm = tm.refine(marks);
    double sum = 0.0;
    for (int m = 0; m < tm.size(); ++m) sum += tm.length(m);
    CHECK(sum == doctest::Approx(60.0).epsilon(1e-14));
    for (int m = 0; m < tm.size(); ++m) CHECK(tm.start(m) < tm.end(m));
  }
}

TEST_CASE("spatial refinement basics") {
  const SpatialMesh m(square(2));
  CHECK(m.n_active() == 4);
  CHECK(m.refine({}).same_cells(m));
  const SpatialMesh one = m.refine({1});
  CHECK(one.n_active() == 7);
  CHECK(one.is_one_irregular());
  CHECK(max_level_jump(one) <= 1);
  CHECK(SpatialMesh(square(1)).refine_global(3).n_active() == 64);
}

TEST_CASE("refining a marked cell refines its sibling patch") {
  const SpatialMesh m = SpatialMesh(square(1)).refine_global(2);
  const SpatialMesh r = m.refine({0});
  CHECK(r.n_active() == 16 - 4 + 16);
  CHECK(r.is_patch_structured());
}

TEST_CASE("repeated corner refinement keeps level jumps at most one") {
  SpatialMesh m = SpatialMesh(square(1)).refine_global(2);
  for (int pass = 0; pass < 4; ++pass) {
    const Located l = m.locate({1e-6, 1e-6});
    m = m.refine({l.cell});
    CHECK(m.is_one_irregular());
    CHECK(max_level_jump(m) <= 1);
    CHECK(m.is_patch_structured());
    CHECK(cell_area_sum(m) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(m.max_level() == 6);
}

TEST_CASE("random refinement keeps the mesh invariants") {
  std::mt19937 rng(3);
  const auto p = config3_problem();
  SpatialMesh m(p.grid);
  for (int pass = 0; pass < 5; ++pass) {
    std::vector<int> marks;
    for (int c = 0; c < m.n_active(); ++c)
      if (rng() % 5 == 0) marks.push_back(c);
    m = m.refine(marks);
    CHECK(max_level_jump(m) <= 1);
    CHECK(m.is_one_irregular());
    CHECK(cell_area_sum(m) == doctest::Approx(p.grid->area()).epsilon(1e-12));
    CHECK(m.area() == doctest::Approx(p.grid->area()).epsilon(1e-12));
  }
}

TEST_CASE("locate and map") {
  const SpatialMesh unit(square(1));
  const Located a = unit.locate({0.5, 0.5});
  CHECK(a.cell == 0);
  CHECK(a.ref.x == doctest::Approx(0.5));
  CHECK(a.ref.y == doctest::Approx(0.5));

  const SpatialMesh two(square(2));
  const Located b = two.locate({0.75, 0.25});
  const CellGeometry g = two.geometry(b.cell);
  CHECK(g.x0 == doctest::Approx(0.5));
  CHECK(g.y0 == doctest::Approx(0.0));
  CHECK(b.ref.x == doctest::Approx(0.5));
  CHECK(b.ref.y == doctest::Approx(0.5));

  const SpatialMesh m = SpatialMesh(square(3)).refine({0, 4}).refine({1, 2, 3});
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Point x{u(rng), u(rng)};
    const Located l = m.locate(x);
    const Point y = m.map_to_physical(l.cell, l.ref);
    worst = std::max(worst, std::hypot(x.x - y.x, x.y - y.y));
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("combustion channel mesh") {
  const auto p = config3_problem();
  const MeshPtr m = p.base_mesh();
  CHECK(m->n_active() == 896);
  CHECK(m->area() == doctest::Approx(60.0 * 16.0 - 2.0 * 15.0 * 4.0));
}
