#include "flow4dvar/fem.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseOperator from_triplets(int rows, int cols, std::vector<Triplet>& ts) {
  SparseOperator op(rows, cols);
  op.setFromTriplets(ts.begin(), ts.end());
  op.prune(0.0, 0.0);
  op.makeCompressed();
  return op;
}

}  // namespace

std::vector<int> Space::boundary_vertices(BoundaryTag tag) const {
  std::set<int> verts;
  for (const auto& bf : mesh->boundary_facets)
    if (bf.tag == tag) {
      verts.insert(bf.a);
      verts.insert(bf.b);
    }
  return {verts.begin(), verts.end()};
}

std::vector<int> Space::boundary_dofs(BoundaryTag tag) const {
  std::vector<int> dofs;
  for (int v : boundary_vertices(tag))
    for (int c = 0; c < arity; ++c) dofs.push_back(dof(v, c));
  std::sort(dofs.begin(), dofs.end());
  return dofs;
}

CellGeometry cell_geometry(const Mesh& mesh, int cell) {
  const auto& t = mesh.cells[cell];
  const Vec2& p0 = mesh.vertices[t[0]];
  const Vec2& p1 = mesh.vertices[t[1]];
  const Vec2& p2 = mesh.vertices[t[2]];
  CellGeometry geo;
  geo.area = 0.5 * cross(p1 - p0, p2 - p0);
  geo.diameter = mesh.cell_diameter(cell);
  double inv2a = 1.0 / (2.0 * geo.area);
  // grad phi_i = perpendicular of the opposite edge / (2 area)
  geo.grad[0] = Vec2{(p1.y - p2.y) * inv2a, (p2.x - p1.x) * inv2a};
  geo.grad[1] = Vec2{(p2.y - p0.y) * inv2a, (p0.x - p2.x) * inv2a};
  geo.grad[2] = Vec2{(p0.y - p1.y) * inv2a, (p1.x - p0.x) * inv2a};
  return geo;
}

const std::vector<TriQuadraturePoint>& tri_quadrature_degree4() {
  static const std::vector<TriQuadraturePoint> rule = [] {
    std::vector<TriQuadraturePoint> pts;
    auto add3 = [&](double w, double a, double b) {
      pts.push_back({{a, b, b}, w});
      pts.push_back({{b, a, b}, w});
      pts.push_back({{b, b, a}, w});
    };
    add3(0.223381589678011, 0.108103018168070, 0.445948490915965);
    add3(0.109951743655322, 0.816847572980459, 0.091576213509771);
    return pts;
  }();
  return rule;
}

const std::array<EdgeQuadraturePoint, 3>& edge_quadrature_gauss3() {
  static const std::array<EdgeQuadraturePoint, 3> rule = [] {
    const double s = std::sqrt(3.0 / 5.0);
    return std::array<EdgeQuadraturePoint, 3>{
        EdgeQuadraturePoint{0.5 * (1.0 - s), 5.0 / 18.0},
        EdgeQuadraturePoint{0.5, 8.0 / 18.0},
        EdgeQuadraturePoint{0.5 * (1.0 + s), 5.0 / 18.0},
    };
  }();
  return rule;
}

// ---------------------------------------------------------------------------
// Volume operators
// ---------------------------------------------------------------------------

namespace {

// Consistent P1 mass on one cell: area/12 * (1 + delta_ij).
double mass_entry(double area, int i, int j) {
  return area * (i == j ? 1.0 / 6.0 : 1.0 / 12.0);
}

}  // namespace

SparseOperator assemble_mass(const Space& space) {
  const Mesh& mesh = *space.mesh;
  std::vector<Triplet> ts;
  ts.reserve(mesh.num_cells() * 9 * space.arity);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double area = mesh.cell_area(c);
    const auto& t = mesh.cells[c];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double m = mass_entry(area, i, j);
        for (int a = 0; a < space.arity; ++a)
          ts.emplace_back(space.dof(t[i], a), space.dof(t[j], a), m);
      }
  }
  return from_triplets(space.dim(), space.dim(), ts);
}

SparseOperator assemble_mass_region(const Space& space, Region region) {
  const Mesh& mesh = *space.mesh;
  std::vector<Triplet> ts;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    if (!mesh.cell_in(c, region)) continue;
    double area = mesh.cell_area(c);
    const auto& t = mesh.cells[c];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double m = mass_entry(area, i, j);
        for (int a = 0; a < space.arity; ++a)
          ts.emplace_back(space.dof(t[i], a), space.dof(t[j], a), m);
      }
  }
  return from_triplets(space.dim(), space.dim(), ts);
}

SparseOperator assemble_stiffness(const Space& space, double coefficient) {
  if (coefficient < 0.0) throw ContractError("stiffness coefficient < 0");
  const Mesh& mesh = *space.mesh;
  std::vector<Triplet> ts;
  ts.reserve(mesh.num_cells() * 9 * space.arity);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeometry geo = cell_geometry(mesh, c);
    const auto& t = mesh.cells[c];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double k = coefficient * geo.area * geo.grad[i].dot(geo.grad[j]);
        for (int a = 0; a < space.arity; ++a)
          ts.emplace_back(space.dof(t[i], a), space.dof(t[j], a), k);
      }
  }
  return from_triplets(space.dim(), space.dim(), ts);
}

SparseOperator assemble_advection(const Space& space, const Field& wind) {
  if (wind.space->mesh != space.mesh || wind.space->arity != 2)
    throw ContractError("advecting field must be a velocity on the same mesh");
  const Mesh& mesh = *space.mesh;
  const auto& quad = tri_quadrature_degree4();
  std::vector<Triplet> ts;
  ts.reserve(mesh.num_cells() * 9 * space.arity);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeometry geo = cell_geometry(mesh, c);
    const auto& t = mesh.cells[c];
    std::array<Vec2, 3> w;
    for (int k = 0; k < 3; ++k)
      w[k] = Vec2{wind.coeff[wind.space->dof(t[k], 0)],
                  wind.coeff[wind.space->dof(t[k], 1)]};
    double block[3][3] = {};
    for (const auto& qp : quad) {
      Vec2 wq = w[0] * qp.bary[0] + w[1] * qp.bary[1] + w[2] * qp.bary[2];
      for (int j = 0; j < 3; ++j) {
        double adv = wq.dot(geo.grad[j]) * qp.weight * geo.area;
        for (int i = 0; i < 3; ++i) block[i][j] += adv * qp.bary[i];
      }
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int a = 0; a < space.arity; ++a)
          ts.emplace_back(space.dof(t[i], a), space.dof(t[j], a), block[i][j]);
  }
  return from_triplets(space.dim(), space.dim(), ts);
}

SparseOperator assemble_wind_gradient(const Space& space, const Field& wind) {
  if (wind.space->mesh != space.mesh || wind.space->arity != 2 ||
      space.arity != 2)
    throw ContractError("wind gradient needs velocity spaces on one mesh");
  const Mesh& mesh = *space.mesh;
  const auto& quad = tri_quadrature_degree4();
  std::vector<Triplet> ts;
  ts.reserve(mesh.num_cells() * 36);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeometry geo = cell_geometry(mesh, c);
    const auto& t = mesh.cells[c];
    // Constant velocity gradient G[a][b] = d w_a / d x_b on the cell.
    double G[2][2] = {};
    for (int k = 0; k < 3; ++k) {
      double wx = wind.coeff[wind.space->dof(t[k], 0)];
      double wy = wind.coeff[wind.space->dof(t[k], 1)];
      G[0][0] += wx * geo.grad[k].x;
      G[0][1] += wx * geo.grad[k].y;
      G[1][0] += wy * geo.grad[k].x;
      G[1][1] += wy * geo.grad[k].y;
    }
    double mass[3][3] = {};
    for (const auto& qp : quad)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          mass[i][j] += qp.weight * geo.area * qp.bary[i] * qp.bary[j];
    // ∫ (u·∇)w_a · v_a = sum_b G[a][b] ∫ u_b v_a
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            ts.emplace_back(space.dof(t[i], a), space.dof(t[j], b),
                            G[a][b] * mass[i][j]);
  }
  return from_triplets(space.dim(), space.dim(), ts);
}

SparseOperator assemble_divergence(const Space& velocity,
                                   const Space& pressure) {
  if (velocity.mesh != pressure.mesh || velocity.arity != 2 ||
      pressure.arity != 1)
    throw ContractError("divergence needs velocity/pressure spaces on one mesh");
  const Mesh& mesh = *velocity.mesh;
  std::vector<Triplet> ts;
  ts.reserve(mesh.num_cells() * 18);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeometry geo = cell_geometry(mesh, c);
    const auto& t = mesh.cells[c];
    for (int i = 0; i < 3; ++i) {
      double qint = geo.area / 3.0;  // ∫ phi_i dx
      for (int j = 0; j < 3; ++j) {
        ts.emplace_back(pressure.dof(t[i]), velocity.dof(t[j], 0),
                        qint * geo.grad[j].x);
        ts.emplace_back(pressure.dof(t[i]), velocity.dof(t[j], 1),
                        qint * geo.grad[j].y);
      }
    }
  }
  return from_triplets(pressure.dim(), velocity.dim(), ts);
}

SparseOperator assemble_pressure_stabilization(const Space& pressure,
                                               double beta) {
  if (beta <= 0.0) throw ConfigError("stabilisation coefficient must be > 0");
  if (pressure.arity != 1)
    throw ContractError("pressure stabilisation needs a scalar space");
  const Mesh& mesh = *pressure.mesh;
  std::vector<Triplet> ts;
  ts.reserve(mesh.num_cells() * 9);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeometry geo = cell_geometry(mesh, c);
    const auto& t = mesh.cells[c];
    double scale = -beta * geo.diameter * geo.diameter * geo.area;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        ts.emplace_back(pressure.dof(t[i]), pressure.dof(t[j]),
                        scale * geo.grad[i].dot(geo.grad[j]));
  }
  return from_triplets(pressure.dim(), pressure.dim(), ts);
}

// ---------------------------------------------------------------------------
// Boundary operators
// ---------------------------------------------------------------------------

namespace {

struct EdgeContext {
  const BoundaryFacet* facet;
  FacetGeometry geo;
  std::array<int, 3> cell_verts;
  // Values of the owning cell's three P1 functions at an edge point: the
  // basis of the two edge vertices varies linearly, the opposite one is 0.
  std::array<double, 3> basis_at(double s) const {
    std::array<double, 3> phi{0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
      if (cell_verts[k] == facet->a) phi[k] = 1.0 - s;
      if (cell_verts[k] == facet->b) phi[k] = s;
    }
    return phi;
  }
};

template <typename Fn>
void for_each_edge(const Mesh& mesh, const std::vector<BoundaryTag>& tags,
                   Fn&& fn) {
  for (const auto& bf : mesh.boundary_facets) {
    bool selected = false;
    for (BoundaryTag t : tags) selected |= (bf.tag == t);
    if (!selected) continue;
    EdgeContext ctx;
    ctx.facet = &bf;
    int f = static_cast<int>(&bf - mesh.boundary_facets.data());
    ctx.geo = facet_geometry(mesh, f);
    ctx.cell_verts = mesh.cells[bf.cell];
    fn(ctx);
  }
}

}  // namespace

NitscheBlocks assemble_nitsche_blocks(const Space& velocity,
                                      const Space& pressure,
                                      const std::vector<BoundaryTag>& dirichlet,
                                      double nu, double sigma, double theta) {
  if (sigma <= 0.0) throw ConfigError("Nitsche coefficient must be > 0");
  if (theta <= 0.0) throw ConfigError("Nitsche requires theta > 0");
  const Mesh& mesh = *velocity.mesh;
  const auto& quad = edge_quadrature_gauss3();

  std::vector<Triplet> t_bn;       // ∫ (∂u/∂n)·v ds, unweighted
  std::vector<Triplet> t_penalty;  // ∫ (1/h) u·v ds, unweighted
  std::vector<Triplet> t_pu;       // ∫ p n·v ds
  for_each_edge(mesh, dirichlet, [&](const EdgeContext& ctx) {
    CellGeometry cg = cell_geometry(mesh, ctx.facet->cell);
    double len = ctx.geo.length;
    const Vec2 n = ctx.geo.normal;
    for (const auto& qp : quad) {
      auto phi = ctx.basis_at(qp.s);
      double w = qp.weight * len;
      for (int i = 0; i < 3; ++i) {
        if (phi[i] == 0.0) continue;
        for (int j = 0; j < 3; ++j) {
          double dn = cg.grad[j].dot(n);
          for (int a = 0; a < 2; ++a)
            t_bn.emplace_back(velocity.dof(ctx.cell_verts[i], a),
                              velocity.dof(ctx.cell_verts[j], a),
                              w * phi[i] * dn);
          double pv = w * phi[i] * phi[j];
          for (int a = 0; a < 2; ++a)
            t_penalty.emplace_back(velocity.dof(ctx.cell_verts[i], a),
                                   velocity.dof(ctx.cell_verts[j], a),
                                   pv / ctx.geo.h);
          t_pu.emplace_back(velocity.dof(ctx.cell_verts[i], 0),
                            pressure.dof(ctx.cell_verts[j]), pv * n.x);
          t_pu.emplace_back(velocity.dof(ctx.cell_verts[i], 1),
                            pressure.dof(ctx.cell_verts[j]), pv * n.y);
        }
      }
    }
  });

  int nu_dim = velocity.dim(), np_dim = pressure.dim();
  SparseOperator bn(nu_dim, nu_dim), penalty(nu_dim, nu_dim);
  bn.setFromTriplets(t_bn.begin(), t_bn.end());
  penalty.setFromTriplets(t_penalty.begin(), t_penalty.end());
  SparseOperator pu(nu_dim, np_dim);
  pu.setFromTriplets(t_pu.begin(), t_pu.end());

  NitscheBlocks blocks;
  SparseOperator bn_t = SparseOperator(bn.transpose());
  blocks.penalty = nu * sigma * penalty;
  blocks.uu_new = -theta * nu * (bn + bn_t) + blocks.penalty;
  blocks.uu_old = -(1.0 - theta) * nu * bn;
  blocks.pu = pu;
  blocks.up = SparseOperator(pu.transpose());
  blocks.g_vel = theta * nu * bn_t - blocks.penalty;
  blocks.g_pres = -blocks.up;
  for (SparseOperator* op : {&blocks.uu_new, &blocks.uu_old, &blocks.pu,
                             &blocks.up, &blocks.penalty, &blocks.g_vel,
                             &blocks.g_pres}) {
    op->prune(0.0, 0.0);
    op->makeCompressed();
  }
  return blocks;
}

SparseOperator assemble_boundary_mass(const Space& velocity,
                                      const std::vector<BoundaryTag>& tags) {
  const Mesh& mesh = *velocity.mesh;
  const auto& quad = edge_quadrature_gauss3();
  std::vector<Triplet> ts;
  for_each_edge(mesh, tags, [&](const EdgeContext& ctx) {
    int va = ctx.facet->a, vb = ctx.facet->b;
    double len = ctx.geo.length;
    double m[2][2] = {};
    for (const auto& qp : quad) {
      double pa = 1.0 - qp.s, pb = qp.s;
      m[0][0] += qp.weight * len * pa * pa;
      m[0][1] += qp.weight * len * pa * pb;
      m[1][0] += qp.weight * len * pb * pa;
      m[1][1] += qp.weight * len * pb * pb;
    }
    int vs[2] = {va, vb};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int a = 0; a < velocity.arity; ++a)
          ts.emplace_back(velocity.dof(vs[i], a), velocity.dof(vs[j], a),
                          m[i][j]);
  });
  return from_triplets(velocity.dim(), velocity.dim(), ts);
}

SparseOperator assemble_boundary_tangent_stiffness(
    const Space& velocity, const std::vector<BoundaryTag>& tags) {
  const Mesh& mesh = *velocity.mesh;
  std::vector<Triplet> ts;
  for_each_edge(mesh, tags, [&](const EdgeContext& ctx) {
    int vs[2] = {ctx.facet->a, ctx.facet->b};
    double k = 1.0 / ctx.geo.length;
    double sign[2] = {1.0, -1.0};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int a = 0; a < velocity.arity; ++a)
          ts.emplace_back(velocity.dof(vs[i], a), velocity.dof(vs[j], a),
                          k * sign[i] * sign[j]);
  });
  return from_triplets(velocity.dim(), velocity.dim(), ts);
}

}  // namespace flow4dvar
