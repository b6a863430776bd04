#include "flow4dvar/fem.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "flow4dvar/errors.hpp"
#include "test_util.hpp"

using namespace flow4dvar;
using namespace f4d_test;

namespace {

Eigen::MatrixXd dense(const SparseOperator& op) {
  return Eigen::MatrixXd(op);
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

Field random_field(const Space& space, std::uint64_t seed, double lo = -1.0,
                   double hi = 1.0) {
  Field f(space);
  auto rng = seeded_rng(seed);
  for (int i = 0; i < space.dim(); ++i) f.coeff[i] = uniform(rng, lo, hi);
  return f;
}

// Nodal interpolant of an analytic function.
Field interpolate(const Space& space,
                  const std::function<double(const Vec2&, int)>& fn) {
  Field f(space);
  for (int v = 0; v < space.mesh->num_vertices(); ++v)
    for (int c = 0; c < space.arity; ++c)
      f.coeff[space.dof(v, c)] = fn(space.mesh->vertices[v], c);
  return f;
}

}  // namespace

TEST_CASE("degree-4 triangle quadrature integrates barycentric monomials") {
  Mesh mesh = two_cell_square();
  const auto& rule = tri_quadrature_degree4();
  double area = mesh.cell_area(0);
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      for (int c = 0; a + b + c <= 4; ++c) {
        double integral = 0.0;
        for (const auto& qp : rule)
          integral += qp.weight * area * std::pow(qp.bary[0], a) *
                      std::pow(qp.bary[1], b) * std::pow(qp.bary[2], c);
        double exact = 2.0 * area * factorial(a) * factorial(b) *
                       factorial(c) / factorial(a + b + c + 2);
        CHECK(integral == doctest::Approx(exact).epsilon(1e-12));
      }
}

TEST_CASE("3-point edge rule integrates monomials up to degree 5") {
  const auto& rule = edge_quadrature_gauss3();
  for (int k = 0; k <= 5; ++k) {
    double integral = 0.0;
    for (const auto& qp : rule) integral += qp.weight * std::pow(qp.s, k);
    CHECK(integral == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
  }
}

TEST_CASE("scalar mass of the unit square is one") {
  Mesh mesh = two_cell_square();
  Space scalar(mesh, 1);
  SparseOperator M = assemble_mass(scalar);
  Vector ones = Vector::Ones(scalar.dim());
  CHECK(ones.dot(M * ones) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("mass row sums equal one third of the vertex patch area") {
  Mesh mesh = rect_mesh(4, 4);
  Space scalar(mesh, 1);
  SparseOperator M = assemble_mass(scalar);
  Vector row_sums = M * Vector::Ones(scalar.dim());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    double patch = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const auto& t = mesh.cells[c];
      if (t[0] == v || t[1] == v || t[2] == v) patch += mesh.cell_area(c);
    }
    CHECK(row_sums[v] == doctest::Approx(patch / 3.0).epsilon(1e-13));
  }
}

TEST_CASE("vector mass decouples into per-component scalar blocks") {
  Mesh mesh = rect_mesh(3, 2);
  Space scalar(mesh, 1), vec(mesh, 2);
  Eigen::MatrixXd Ms = dense(assemble_mass(scalar));
  Eigen::MatrixXd Mv = dense(assemble_mass(vec));
  for (int i = 0; i < scalar.dim(); ++i)
    for (int j = 0; j < scalar.dim(); ++j) {
      CHECK(Mv(2 * i, 2 * j) == doctest::Approx(Ms(i, j)));
      CHECK(Mv(2 * i + 1, 2 * j + 1) == doctest::Approx(Ms(i, j)));
      CHECK(Mv(2 * i, 2 * j + 1) == 0.0);
    }
}

TEST_CASE("stiffness annihilates constants") {
  Mesh mesh = rect_mesh(3, 3);
  Space vec(mesh, 2);
  SparseOperator K = assemble_stiffness(vec, 1.7);
  Vector c(vec.dim());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    c[vec.dof(v, 0)] = 3.25;
    c[vec.dof(v, 1)] = -1.5;
  }
  CHECK((K * c).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("Dirichlet energy of u = x on the unit square") {
  Mesh mesh = rect_mesh(2, 2);
  Space scalar(mesh, 1);
  SparseOperator K = assemble_stiffness(scalar, 1.0);
  Field u = interpolate(scalar, [](const Vec2& p, int) { return p.x; });
  CHECK(0.5 * u.coeff.dot(K * u.coeff) == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("random-field energy matches the per-cell gradient oracle") {
  Mesh mesh = rect_mesh(5, 4, 1.3, 0.9);
  Space scalar(mesh, 1);
  double coeff = 2.25;
  SparseOperator K = assemble_stiffness(scalar, coeff);
  Field u = random_field(scalar, 42);
  double oracle = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeometry geo = cell_geometry(mesh, c);
    const auto& t = mesh.cells[c];
    Vec2 grad{0, 0};
    for (int k = 0; k < 3; ++k) grad = grad + geo.grad[k] * u.coeff[t[k]];
    oracle += coeff * geo.area * grad.dot(grad);
  }
  CHECK(u.coeff.dot(K * u.coeff) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("advection by a zero wind is the zero operator") {
  Mesh mesh = rect_mesh(3, 3);
  Space vec(mesh, 2);
  Field wind(vec);
  SparseOperator C = assemble_advection(vec, wind);
  CHECK(C.nonZeros() == 0);
}

TEST_CASE("advection of a linear field by a constant wind, two-cell oracle") {
  Mesh mesh = two_cell_square();
  Space scalar(mesh, 1), vec(mesh, 2);
  Field wind = interpolate(vec, [](const Vec2&, int c) {
    return c == 0 ? 0.7 : -0.4;
  });
  // u = 2x - y  =>  w·grad u = 0.7*2 + (-0.4)*(-1) = 1.8, constant.
  Field u = interpolate(scalar, [](const Vec2& p, int) {
    return 2.0 * p.x - p.y;
  });
  SparseOperator C = assemble_advection(scalar, wind);
  Vector r = C * u.coeff;
  // Against test functions v=1 and v=x: ∫ 1.8 v dx over the unit square.
  Vector ones = Vector::Ones(scalar.dim());
  Field vx = interpolate(scalar, [](const Vec2& p, int) { return p.x; });
  CHECK(ones.dot(r) == doctest::Approx(1.8).epsilon(1e-13));
  CHECK(vx.coeff.dot(r) == doctest::Approx(0.9).epsilon(1e-13));
}

TEST_CASE("advection action matches the independent quadrature oracle") {
  Mesh mesh = rect_mesh(4, 3, 1.1, 0.8);
  Space scalar(mesh, 1), vec(mesh, 2);
  Field wind = random_field(vec, 7);
  Field u = random_field(scalar, 8);
  SparseOperator C = assemble_advection(scalar, wind);
  double lhs = Vector::Ones(scalar.dim()).dot(C * u.coeff);

  TriQuadOracle oracle;
  double rhs = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeometry geo = cell_geometry(mesh, c);
    const auto& t = mesh.cells[c];
    Vec2 gu{0, 0};
    for (int k = 0; k < 3; ++k) gu = gu + geo.grad[k] * u.coeff[t[k]];
    rhs += oracle.integrate(
        mesh, c, [&](const Vec2&, const std::array<double, 3>& l) {
          Vec2 w{0, 0};
          for (int k = 0; k < 3; ++k) {
            w.x += l[k] * wind.coeff[vec.dof(t[k], 0)];
            w.y += l[k] * wind.coeff[vec.dof(t[k], 1)];
          }
          return w.dot(gu);
        });
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("wind gradient term matches a hand-computed constant-gradient case") {
  Mesh mesh = two_cell_square();
  Space vec(mesh, 2);
  // w = (3x + y, 2y): grad w = [[3,1],[0,2]].
  Field wind = interpolate(vec, [](const Vec2& p, int c) {
    return c == 0 ? 3.0 * p.x + p.y : 2.0 * p.y;
  });
  Field u = interpolate(vec, [](const Vec2&, int c) {
    return c == 0 ? 1.0 : -2.0;  // constant u
  });
  SparseOperator D = assemble_wind_gradient(vec, wind);
  // (u·grad)w = (3*1 + 1*(-2), 2*(-2)) = (1, -4), constant.
  Vector r = D * u.coeff;
  Vector ones_x = Vector::Zero(vec.dim()), ones_y = Vector::Zero(vec.dim());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    ones_x[vec.dof(v, 0)] = 1.0;
    ones_y[vec.dof(v, 1)] = 1.0;
  }
  CHECK(ones_x.dot(r) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(ones_y.dot(r) == doctest::Approx(-4.0).epsilon(1e-13));
}

TEST_CASE("divergence of a divergence-free linear field vanishes") {
  Mesh mesh = rect_mesh(3, 3);
  Space vec(mesh, 2), scalar(mesh, 1);
  SparseOperator B = assemble_divergence(vec, scalar);
  Field u = interpolate(vec, [](const Vec2& p, int c) {
    return c == 0 ? p.y : 0.0;
  });
  CHECK((B * u.coeff).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("divergence of u = (x, y) integrates to 2 per test function") {
  Mesh mesh = rect_mesh(2, 2);
  Space vec(mesh, 2), scalar(mesh, 1);
  SparseOperator B = assemble_divergence(vec, scalar);
  SparseOperator M = assemble_mass(scalar);
  Field u = interpolate(vec, [](const Vec2& p, int c) {
    return c == 0 ? p.x : p.y;
  });
  // ∫ q div u = 2 ∫ q for every q: rows equal twice the mass row sums.
  Vector lhs = B * u.coeff;
  Vector rhs = 2.0 * (M * Vector::Ones(scalar.dim()));
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("divergence adjointness") {
  Mesh mesh = rect_mesh(3, 2);
  Space vec(mesh, 2), scalar(mesh, 1);
  SparseOperator B = assemble_divergence(vec, scalar);
  Field u = random_field(vec, 12);
  Field q = random_field(scalar, 13);
  double a = q.coeff.dot(B * u.coeff);
  double b = u.coeff.dot(SparseOperator(B.transpose()) * q.coeff);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("pressure stabilization vanishes on constants and is sym-negative") {
  Mesh mesh = rect_mesh(4, 4);
  Space scalar(mesh, 1);
  SparseOperator S = assemble_pressure_stabilization(scalar, 1e-3);
  Vector c = Vector::Constant(scalar.dim(), 2.0);
  CHECK((S * c).lpNorm<Eigen::Infinity>() <= 1e-15);
  Field p = random_field(scalar, 3);
  CHECK(p.coeff.dot(S * p.coeff) <= 0.0);
  Eigen::MatrixXd Sd = dense(S);
  CHECK((Sd - Sd.transpose()).lpNorm<Eigen::Infinity>() <= 1e-15);
}

TEST_CASE("uniform refinement scales stabilization entries by one quarter") {
  Space coarse_space, fine_space;
  Mesh coarse = rect_mesh(2, 2);
  Mesh fine = rect_mesh(4, 4);
  Space sc(coarse, 1), sf(fine, 1);
  Eigen::MatrixXd Sc = dense(assemble_pressure_stabilization(sc, 1e-3));
  Eigen::MatrixXd Sf = dense(assemble_pressure_stabilization(sf, 1e-3));
  // Vertex 0 sits in the corner of both meshes with a geometrically similar
  // patch; its diagonal entry scales with h^2.
  CHECK(Sf(0, 0) == doctest::Approx(0.25 * Sc(0, 0)).epsilon(1e-12));
}

TEST_CASE("Nitsche blocks: velocity-velocity block is symmetric") {
  Mesh mesh = rect_mesh(3, 3, 1.0, 1.0, rect_ports(1.0, 1.0));
  Space vec(mesh, 2), scalar(mesh, 1);
  auto blocks = assemble_nitsche_blocks(
      vec, scalar, {BoundaryTag::inlet, BoundaryTag::out1}, 3.5, 100.0, 0.5);
  Eigen::MatrixXd A = dense(blocks.uu_new);
  double scale = A.lpNorm<Eigen::Infinity>();
  CHECK((A - A.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12 * scale);
}

TEST_CASE("Nitsche consistency: boundary terms reduce to the flux term at "
          "u|_Gamma = g") {
  Mesh mesh = rect_mesh(3, 2, 1.0, 1.0, rect_ports(1.0, 1.0));
  Space vec(mesh, 2), scalar(mesh, 1);
  double nu = 2.0, sigma = 50.0, theta = 0.7;
  std::vector<BoundaryTag> gd = {BoundaryTag::inlet, BoundaryTag::out1};
  auto blocks = assemble_nitsche_blocks(vec, scalar, gd, nu, sigma, theta);

  Field u = random_field(vec, 21);
  // g := trace of u on the Dirichlet boundary.
  Vector g = Vector::Zero(vec.dim());
  for (BoundaryTag t : gd)
    for (int d : vec.boundary_dofs(t)) g[d] = u.coeff[d];

  Vector r_pres = blocks.up * u.coeff + blocks.g_pres * g;
  CHECK(r_pres.lpNorm<Eigen::Infinity>() <= 1e-12);

  Vector r_vel = blocks.uu_new * u.coeff + blocks.g_vel * g;
  // Independent evaluation of the remaining flux term -theta*nu ∫ (∂u/∂n)·v.
  Vector flux = Vector::Zero(vec.dim());
  for (int f = 0; f < (int)mesh.boundary_facets.size(); ++f) {
    const auto& bf = mesh.boundary_facets[f];
    if (bf.tag != BoundaryTag::inlet && bf.tag != BoundaryTag::out1) continue;
    FacetGeometry geo = facet_geometry(mesh, f);
    CellGeometry cg = cell_geometry(mesh, bf.cell);
    const auto& t = mesh.cells[bf.cell];
    for (int a = 0; a < 2; ++a) {
      double dudn = 0.0;
      for (int k = 0; k < 3; ++k)
        dudn += u.coeff[vec.dof(t[k], a)] * cg.grad[k].dot(geo.normal);
      // ∫_edge phi ds = len/2 at both edge vertices.
      flux[vec.dof(bf.a, a)] += -theta * nu * dudn * geo.length / 2.0;
      flux[vec.dof(bf.b, a)] += -theta * nu * dudn * geo.length / 2.0;
    }
  }
  CHECK((r_vel - flux).lpNorm<Eigen::Infinity>() <=
        1e-11 * (1.0 + flux.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("Nitsche blocks reject a non-positive penalty coefficient") {
  Mesh mesh = rect_mesh(2, 2, 1.0, 1.0, rect_ports(1.0, 1.0));
  Space vec(mesh, 2), scalar(mesh, 1);
  CHECK_THROWS_AS(assemble_nitsche_blocks(vec, scalar, {BoundaryTag::inlet},
                                          3.5, 0.0, 0.5),
                  ConfigError);
  CHECK_THROWS_AS(assemble_nitsche_blocks(vec, scalar, {BoundaryTag::inlet},
                                          3.5, 100.0, 0.0),
                  ConfigError);
}

TEST_CASE("assembly is deterministic") {
  BifurcationParams params;
  params.edge_length = 0.7;
  Mesh mesh = generate_bifurcation(params);
  Space vec(mesh, 2);
  SparseOperator A = assemble_stiffness(vec, 3.5);
  SparseOperator B = assemble_stiffness(vec, 3.5);
  REQUIRE(A.nonZeros() == B.nonZeros());
  for (int k = 0; k < A.nonZeros(); ++k)
    CHECK(A.valuePtr()[k] == B.valuePtr()[k]);
}

TEST_CASE("mass and stiffness symmetry") {
  BifurcationParams params;
  params.edge_length = 0.7;
  Mesh mesh = generate_bifurcation(params);
  Space vec(mesh, 2);
  for (const SparseOperator& A :
       {assemble_mass(vec), assemble_stiffness(vec, 1.0)}) {
    Eigen::MatrixXd Ad = dense(A);
    CHECK((Ad - Ad.transpose()).lpNorm<Eigen::Infinity>() <=
          1e-14 * Ad.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("region mass only integrates over the tagged cells") {
  BifurcationParams params;
  params.edge_length = 0.5;
  Mesh mesh = generate_bifurcation(params);
  Space scalar(mesh, 1);
  SparseOperator Ma = assemble_mass_region(scalar, Region::ane);
  double ane_area = 0.0;
  for (int c : mesh.cells_in(Region::ane)) ane_area += mesh.cell_area(c);
  Vector ones = Vector::Ones(scalar.dim());
  CHECK(ones.dot(Ma * ones) == doctest::Approx(ane_area).epsilon(1e-12));
}

TEST_CASE("boundary mass and tangent stiffness on the unit square walls") {
  Mesh mesh = rect_mesh(4, 4);
  Space vec(mesh, 2);
  SparseOperator Mb = assemble_boundary_mass(vec, {BoundaryTag::walls});
  Vector ones_x = Vector::Zero(vec.dim());
  for (int v = 0; v < mesh.num_vertices(); ++v) ones_x[vec.dof(v, 0)] = 1.0;
  // ∫_walls 1 ds = perimeter = 4 (x component only).
  CHECK(ones_x.dot(Mb * ones_x) == doctest::Approx(4.0).epsilon(1e-12));

  SparseOperator Kb =
      assemble_boundary_tangent_stiffness(vec, {BoundaryTag::walls});
  CHECK((Kb * ones_x).lpNorm<Eigen::Infinity>() <= 1e-13);
  // u_x = x along the bottom edge: tangential derivative 1 on length 1 per
  // bottom/top edge, 0 on the vertical edges where x is constant.
  Field u = interpolate(vec, [](const Vec2& p, int c) {
    return c == 0 ? p.x : 0.0;
  });
  CHECK(u.coeff.dot(Kb * u.coeff) == doctest::Approx(2.0).epsilon(1e-12));
}
