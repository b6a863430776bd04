#pragma once

#include <Eigen/SparseCholesky>
#include <memory>
#include <vector>

#include "flow4dvar/fem.hpp"

namespace flow4dvar {

// Optimisation variable m = (u0, g_1..g_K): initial velocity plus Dirichlet
// boundary data per timestep. u0 is stored on the full velocity space with
// wall dofs zero; each g_k is stored compressed on the control dofs.
// The same shape carries dual vectors (gradients).
struct ControlVector {
  Vector u0;
  std::vector<Vector> g;
};

using Control = ControlVector;
using ControlGradient = ControlVector;

struct RegularisationConfig {
  double alpha = 1e-5;  // boundary weight
  double gamma = 1e-5;  // initial-condition weight
  // Anchor the first time difference at the trace of u0 (default); the
  // alternative starts the sum at k = 2 without any u0 coupling.
  bool couple_g0_to_u0 = true;
};

// Index bookkeeping shared by the regularisation, the Riesz map and the
// reduced functional. Control dofs are the Dirichlet-boundary velocity dofs
// minus wall dofs (walls win at shared corners).
struct ControlLayout {
  const Space* velocity = nullptr;
  std::vector<BoundaryTag> dirichlet;
  int K = 0;
  double dt = 0.0;

  std::vector<int> wall_dofs;     // sorted
  std::vector<int> control_dofs;  // sorted, disjoint from wall_dofs
  std::vector<int> free_dofs;     // all velocity dofs minus wall_dofs

  int n_g() const { return static_cast<int>(control_dofs.size()); }
  int n_u0() const { return static_cast<int>(free_dofs.size()); }
  int stacked_dim() const { return n_u0() + K * n_g(); }

  ControlVector zero() const;
  Vector pack(const ControlVector& m) const;
  ControlVector unpack(const Vector& stacked) const;

  // Scatter a compressed g onto the full velocity index set (zero elsewhere)
  // and gather back.
  Vector scatter_g(const Vector& g) const;
  Vector gather_g(const Vector& full) const;

  void zero_wall_dofs(Vector& full_velocity) const;
};

ControlLayout make_control_layout(const Space& velocity,
                                  std::vector<BoundaryTag> dirichlet, int K,
                                  double dt);

// Stacked sparse matrix of
//   gamma * ||u0||_{H1(Omega)}^2  +  alpha * ||g||^2_{H1(Gamma_D x (0,T])}
// (without the 1/2). The boundary norm integrates |g|^2 + |d_tau g|^2 +
// |g_dot|^2 + |d_tau g_dot|^2 with the rectangle rule in time and backward
// differences g_dot_k = (g_k - g_{k-1})/dt, g_0 = trace of u0.
SparseOperator assemble_control_quadratic(const ControlLayout& layout,
                                          double alpha, double gamma,
                                          bool couple_g0_to_u0 = true);

double regularisation_value(const ControlVector& m, const ControlLayout& layout,
                            const RegularisationConfig& cfg);
ControlGradient regularisation_gradient(const ControlVector& m,
                                        const ControlLayout& layout,
                                        const RegularisationConfig& cfg);

// Riesz map of the control space: the unweighted (alpha = gamma = 1) form
// above defines the inner product; apply() solves H0^{-1} x = dual.
class RieszMap {
 public:
  explicit RieszMap(const ControlLayout& layout);

  Vector apply(const Vector& stacked_dual) const;
  ControlVector apply(const ControlVector& dual) const;

  // (a, b)_M on primal stacked vectors.
  double inner(const Vector& a, const Vector& b) const;
  double norm(const Vector& a) const;
  // Dual norm ||d||_{M*} = sqrt(<d, H0 d>).
  double dual_norm(const Vector& dual) const;

  const SparseOperator& matrix() const { return matrix_; }

 private:
  const ControlLayout* layout_;
  SparseOperator matrix_;
  Eigen::SimplicialLDLT<SparseOperator> solver_;
};

// Loss-free binary checkpoint of a control vector.
void save_control(const Control& m, const ControlLayout& layout,
                  std::uint64_t mesh_hash, const std::string& path);
Control load_control(const ControlLayout& layout, std::uint64_t mesh_hash,
                     const std::string& path);

}  // namespace flow4dvar
