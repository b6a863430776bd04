#pragma once

#include <Eigen/Sparse>
#include <array>
#include <vector>

#include "flow4dvar/mesh.hpp"

namespace flow4dvar {

using SparseOperator = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

// P1 nodal space: one dof per vertex and component. Velocity components are
// interleaved per vertex (dof = arity*vertex + component).
struct Space {
  const Mesh* mesh = nullptr;
  int arity = 1;

  Space() = default;
  Space(const Mesh& m, int a) : mesh(&m), arity(a) {}

  int dim() const { return arity * mesh->num_vertices(); }
  int dof(int vertex, int comp = 0) const { return arity * vertex + comp; }

  // Sorted vertex / dof sets on a boundary tag.
  std::vector<int> boundary_vertices(BoundaryTag tag) const;
  std::vector<int> boundary_dofs(BoundaryTag tag) const;
};

struct Field {
  const Space* space = nullptr;
  Vector coeff;

  Field() = default;
  explicit Field(const Space& s) : space(&s), coeff(Vector::Zero(s.dim())) {}
  Field(const Space& s, Vector c) : space(&s), coeff(std::move(c)) {}
};

// Per-cell P1 geometry: area, diameter and the constant basis gradients.
struct CellGeometry {
  double area = 0.0;
  double diameter = 0.0;
  std::array<Vec2, 3> grad{};
};

CellGeometry cell_geometry(const Mesh& mesh, int cell);

// Quadrature exact for polynomials of total degree <= 4 on the reference
// triangle (barycentric points, weights summing to one).
struct TriQuadraturePoint {
  std::array<double, 3> bary;
  double weight;
};
const std::vector<TriQuadraturePoint>& tri_quadrature_degree4();

// 3-point Gauss rule on [0,1] (exact to degree 5), used for all edge forms.
struct EdgeQuadraturePoint {
  double s;
  double weight;
};
const std::array<EdgeQuadraturePoint, 3>& edge_quadrature_gauss3();

// --- volume operators -------------------------------------------------------

SparseOperator assemble_mass(const Space& space);
// Mass restricted to the cells of a region (Region::obs includes ane).
SparseOperator assemble_mass_region(const Space& space, Region region);
SparseOperator assemble_stiffness(const Space& space, double coefficient);
// C(w): (i,j) action ∫ (w·∇u_j)·v_i dx, advection by the frozen field w.
SparseOperator assemble_advection(const Space& space, const Field& wind);
// Linearised transport of the wind: ∫ (u·∇)w·v dx.
SparseOperator assemble_wind_gradient(const Space& space, const Field& wind);
// Rows over the pressure space: ∫ q div u dx.
SparseOperator assemble_divergence(const Space& velocity,
                                   const Space& pressure);
// -beta sum_cells h_cell^2 (grad p, grad q); symmetric negative semidefinite.
SparseOperator assemble_pressure_stabilization(const Space& pressure,
                                               double beta);

// --- Nitsche boundary operators ---------------------------------------------

// All blocks of the weak Dirichlet boundary form on the given regions, with
// the nu/sigma/theta weights baked in. Residual use:
//   R_u += uu_new*u + uu_old*u_prev + pu*p + g_vel*g
//   R_p += up*u + g_pres*g
// uu_new/pu/up also are the Jacobian boundary blocks; uu_old is the coupling
// to the previous state.
struct NitscheBlocks {
  SparseOperator uu_new;   // -theta*nu*(Bn + Bn^T) + (nu*sigma/h) P
  SparseOperator uu_old;   // -(1-theta)*nu*Bn
  SparseOperator pu;       // +∫ p n·v           (velocity rows, pressure cols)
  SparseOperator up;       // +∫ q n·u           (pressure rows, velocity cols)
  SparseOperator penalty;  // (nu*sigma/h) ∫ u·v
  SparseOperator g_vel;    // +theta*nu*Bn^T - (nu*sigma/h) P
  SparseOperator g_pres;   // -∫ q n·g
};

NitscheBlocks assemble_nitsche_blocks(const Space& velocity,
                                      const Space& pressure,
                                      const std::vector<BoundaryTag>& dirichlet,
                                      double nu, double sigma, double theta);

// --- boundary trace operators (control norms) --------------------------------

// ∫_Γ u·v ds over the edges of the given tags, on velocity-space indices.
SparseOperator assemble_boundary_mass(const Space& velocity,
                                      const std::vector<BoundaryTag>& tags);
// Tangential H1 seminorm along the boundary polyline.
SparseOperator assemble_boundary_tangent_stiffness(
    const Space& velocity, const std::vector<BoundaryTag>& tags);

}  // namespace flow4dvar
