#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pudwr/fespace.hpp"

#include <cmath>
#include <random>

using namespace pudwr;

namespace {

BoundaryMarker neumann() {
  return [](Point, Point) { return BoundaryKind::Neumann; };
}
BoundaryMarker dirichlet() {
  return [](Point, Point) { return BoundaryKind::Dirichlet; };
}

MeshPtr square_mesh(int n, int global = 0) {
  auto g = std::make_shared<const CoarseGrid>(CoarseGrid::rectangle(0.0, 0.0, 1.0, 1.0, n, n));
  return std::make_shared<const SpatialMesh>(SpatialMesh(g).refine_global(global));
}

// A patch-structured mesh with hanging nodes on several levels.
MeshPtr graded_mesh() {
  SpatialMesh m = square_mesh(1, 2)->refine({0});
  m = m.refine({m.locate({0.01, 0.01}).cell});
  m = m.refine({m.locate({0.9, 0.6}).cell});
  return std::make_shared<const SpatialMesh>(m);
}

Vector random_vector(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

Point ref_in(const SpatialMesh& m, int cell, Point x) {
  const CellGeometry g = m.geometry(cell);
  return {(x.x - g.x0) / g.hx, (x.y - g.y0) / g.hy};
}

// Largest jump of u across any interior edge, sampled at 10 points per edge.
double max_edge_jump(const Space& s, const Vector& u) {
  const SpatialMesh& m = s.mesh();
  double worst = 0.0;
  for (int c = 0; c < m.n_active(); ++c) {
    const CellGeometry g = m.geometry(c);
    for (int dir = 0; dir < 4; ++dir)
      for (int i = 0; i < 10; ++i) {
        const double t = (i + 0.5) / 10.0;
        Point ref = dir < 2 ? Point{dir == 0 ? 0.0 : 1.0, t} : Point{t, dir == 2 ? 0.0 : 1.0};
        const Point x = m.map_to_physical(c, ref);
        const double eps = 1e-9;
        const Point out = dir == 0 ? Point{x.x - eps, x.y}
                          : dir == 1 ? Point{x.x + eps, x.y}
                          : dir == 2 ? Point{x.x, x.y - eps}
                                     : Point{x.x, x.y + eps};
        if (out.x < 0.0 || out.x > 1.0 || out.y < 0.0 || out.y > 1.0) continue;
        const int other = m.locate(out).cell;
        for (int comp = 0; comp < s.n_components(); ++comp) {
          const double a = evaluate(s, u, c, ref).v[static_cast<std::size_t>(comp)];
          const double b = evaluate(s, u, other, ref_in(m, other, x)).v[static_cast<std::size_t>(comp)];
          worst = std::max(worst, std::abs(a - b));
        }
      }
  }
  return worst;
}

}  // namespace

TEST_CASE("gauss rules") {
  for (int n = 1; n <= 6; ++n) {
    const QuadRule1D q = gauss_legendre(n);
    for (int p = 0; p < 2 * n; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * std::pow(q.x[i], p);
      CHECK(s == doctest::Approx(1.0 / (p + 1)).epsilon(1e-14));
    }
  }
  // x^3 y^3 over a cell with two points per direction
  const QuadRule1D q = gauss_legendre(2);
  const double x0 = 0.3, h = 0.7;
  double s = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      s += q.w[i] * q.w[j] * h * h * std::pow(x0 + h * q.x[i], 3) * std::pow(x0 + h * q.x[j], 3);
  const double exact = std::pow((std::pow(x0 + h, 4) - std::pow(x0, 4)) / 4.0, 2);
  CHECK(std::abs(s - exact) / exact < 1e-14);

  for (TimeQuad t : {TimeQuad::midpoint, TimeQuad::rightbox, TimeQuad::simpson, TimeQuad::gauss2}) {
    const QuadRule1D r = time_rule(t);
    double w = 0.0;
    for (double x : r.w) w += x;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(parse_time_quad(to_string(t)) == t);
  }
  CHECK_THROWS(parse_time_quad("trapezoid"));
}

TEST_CASE("shape functions") {
  CHECK(shape_value(1, 0, {0.0, 0.0}) == 1.0);
  CHECK(shape_value(1, 0, {1.0, 1.0}) == 0.0);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += shape_value(1, i, {0.3, 0.7});
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));

  // Q2 node 1 sits at the midpoint of the bottom edge
  const Point nodes2[9] = {{0, 0}, {0.5, 0}, {1, 0}, {0, 0.5}, {0.5, 0.5}, {1, 0.5}, {0, 1}, {0.5, 1}, {1, 1}};
  for (int j = 0; j < 9; ++j) CHECK(shape_value(2, 1, nodes2[j]) == doctest::Approx(j == 1 ? 1.0 : 0.0));

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int order : {1, 2}) {
    double worst = 0.0, worst_grad = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Point r{u(rng), u(rng)};
      double s = 0.0;
      Point g{0.0, 0.0};
      for (int i = 0; i < (order + 1) * (order + 1); ++i) {
        s += shape_value(order, i, r);
        g.x += shape_grad(order, i, r).x;
        g.y += shape_grad(order, i, r).y;
      }
      worst = std::max(worst, std::abs(s - 1.0));
      worst_grad = std::max(worst_grad, std::abs(g.x) + std::abs(g.y));
    }
    CHECK(worst < 1e-14);
    CHECK(worst_grad < 1e-12);
  }
}

TEST_CASE("dof counts and constraints") {
  const Space one(square_mesh(1), 1, 1, neumann());
  CHECK(one.n_dofs() == 4);
  CHECK(one.constraints(nullptr).n_constrained() == 0);
  CHECK(Space(square_mesh(2), 1, 1, neumann()).n_dofs() == 9);
  CHECK(Space(square_mesh(2), 2, 1, neumann()).n_dofs() == 25);
  CHECK(Space(square_mesh(2), 1, 2, neumann()).n_dofs() == 18);
  CHECK(Space(square_mesh(2), 1, 1, dirichlet()).constraints(nullptr).n_constrained() == 8);

  // one refined coarse cell on a 2x2 grid: two hanging vertices
  const auto m = std::make_shared<const SpatialMesh>(SpatialMesh(square_mesh(2)->grid_ptr()).refine({0}));
  const Space s(m, 1, 1, neumann());
  REQUIRE(s.hanging_nodes().size() == 2);
  for (const HangingNode& h : s.hanging_nodes()) {
    REQUIRE(h.masters.size() == 2);
    const Point p = s.node_point(h.node);
    for (const auto& [master, w] : h.masters) {
      CHECK(w == doctest::Approx(0.5));
      const Point q = s.node_point(master);
      // masters are the endpoints of the coarse edge through the hanging vertex
      CHECK((std::abs(q.x - p.x) < 1e-12 || std::abs(q.y - p.y) < 1e-12));
    }
  }
}

TEST_CASE("partition of unity at quadrature points") {
  for (const MeshPtr& m : {square_mesh(1, 2), graded_mesh()}) {
    const Space pu(m, 1, 1, neumann());
    const Vector ones = Vector::Ones(pu.n_dofs());
    const QuadRule1D q = gauss_legendre(4);
    double worst = 0.0;
    for (int c = 0; c < pu.n_cells(); ++c)
      for (double x : q.x)
        for (double y : q.x) worst = std::max(worst, std::abs(evaluate(pu, ones, c, {x, y}).v[0] - 1.0));
    CHECK(worst < 1e-14);
  }
}

TEST_CASE("hanging node continuity") {
  const MeshPtr m = graded_mesh();
  for (int order : {1, 2})
    for (int ncomp : {1, 2}) {
      const Space s(m, order, ncomp, neumann());
      CHECK(!s.hanging_nodes().empty());
      Vector u = random_vector(s.n_dofs(), 17u + static_cast<unsigned>(order));
      s.hanging_constraints().distribute(u);
      CHECK(max_edge_jump(s, u) < 1e-13);
    }
}

TEST_CASE("spatial interpolation operators") {
  const MeshPtr m = square_mesh(1, 1);
  const Space low(m, 1, 1, neumann()), high(m, 2, 1, neumann());

  // bilinear data survives the Q2 -> Q1 step
  auto bilinear = [](int, Point x) { return 1.0 + 2.0 * x.x - x.y + 3.0 * x.x * x.y; };
  const Vector bl_low = interpolate_down(high, interpolate_function(high, bilinear), low);
  CHECK((bl_low - interpolate_function(low, bilinear)).norm() < 1e-14);

  // x^2 at the vertices of a 2x2 mesh
  const Vector sq = interpolate_down(high, interpolate_function(high, [](int, Point x) { return x.x * x.x; }), low);
  for (int n = 0; n < low.n_nodes(); ++n) {
    const double x = low.node_point(n).x;
    CHECK(sq[n] == doctest::Approx(x * x));
    CHECK((x == 0.0 || x == 0.5 || x == 1.0));
  }

  const Vector c_low = Vector::Constant(low.n_dofs(), 2.5);
  CHECK((interpolate_down(high, Vector::Constant(high.n_dofs(), 2.5), low) - c_low).norm() == 0.0);
  CHECK((reconstruct_up(low, c_low, high) - Vector::Constant(high.n_dofs(), 2.5)).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("patch reconstruction") {
  for (const MeshPtr& m : {square_mesh(1, 2), square_mesh(3, 1), graded_mesh()}) {
    const Space low(m, 1, 1, neumann()), high(m, 2, 1, neumann());
    // a global biquadratic is reproduced exactly on every patch (hanging vertices carry constrained, not sampled, data)
    if (low.hanging_nodes().empty()) {
      auto q = [](int, Point x) { return 0.3 + x.x - 2.0 * x.y + x.x * x.x * x.y * x.y - 0.7 * x.x * x.y * x.y; };
      const Vector r = reconstruct_up(low, interpolate_function(low, q), high);
      CHECK((r - interpolate_function(high, q)).lpNorm<Eigen::Infinity>() < 1e-13);
    }

    Vector u = random_vector(low.n_dofs(), 23);
    low.hanging_constraints().distribute(u);
    const Vector back = interpolate_down(high, reconstruct_up(low, u, high), low);
    CHECK((back - u).lpNorm<Eigen::Infinity>() < 1e-13);
    const Vector emb = interpolate_down(high, embed_up(low, u, high), low);
    CHECK((emb - u).lpNorm<Eigen::Infinity>() < 1e-13);
  }
}

TEST_CASE("transfer between meshes") {
  const MeshPtr coarse = square_mesh(1, 1), fine = graded_mesh();
  const Space a(coarse, 1, 1, neumann()), b(fine, 1, 1, neumann());
  auto f = [](int, Point x) { return 2.0 - x.x + 0.5 * x.y; };
  const Vector moved = transfer(a, interpolate_function(a, f), b);
  CHECK((moved - interpolate_function(b, f)).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK(Transfer(a, a).identity());
}

TEST_CASE("temporal interpolation operators") {
  const Vector one = Vector::Constant(1, 1.0), three = Vector::Constant(1, 3.0);
  CHECK(temporal_interp_down(one, three)[0] == 3.0);

  const TemporalMesh tm = TemporalMesh::uniform(1.0, 2);
  const std::vector<Vector> z = {one, three};
  CHECK(temporal_reconstruct_up(tm, z, 1, 0.5)[0] == doctest::Approx(2.0));

  const std::vector<Vector> c(5, Vector::Constant(2, -4.0));
  const TemporalMesh t5({0.0, 0.1, 0.35, 0.5, 0.8, 1.0});
  for (int m = 0; m < 5; ++m)
    for (double tau : {0.0, 0.3, 1.0})
      CHECK((temporal_reconstruct_up(t5, c, m, tau) - c[0]).norm() < 1e-14);

  // the reconstruction passes through the dG(0) value at the right end of every interval
  std::vector<Vector> r;
  for (int m = 0; m < 5; ++m) r.push_back(random_vector(3, 31u + static_cast<unsigned>(m)));
  for (int m = 0; m < 5; ++m) CHECK((temporal_reconstruct_up(t5, r, m, 1.0) - r[m]).norm() < 1e-14);
}
