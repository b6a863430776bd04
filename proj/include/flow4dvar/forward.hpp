#pragma once

#include <Eigen/SparseLU>
#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flow4dvar/control.hpp"
#include "flow4dvar/fem.hpp"

namespace flow4dvar {

struct ModelConfig {
  double nu = 3.5;          // kinematic viscosity, mm^2/s
  double dt = 0.004625;     // s
  double T = 0.555;         // s
  double theta = 0.5;
  double sigma = 100.0;     // Nitsche coefficient
  double beta = 1e-3;       // pressure stabilisation coefficient
  std::array<double, 2> body_force{0.0, 0.0};
  bool swap_outlets = false;  // Gamma_D = {inlet, out2} instead of {inlet, out1}
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  bool include_convection = true;  // test hook: false gives the Stokes limit

  int num_steps() const;  // K = T/dt, must be integral within 1e-9
  std::vector<BoundaryTag> dirichlet_tags() const;
  void validate() const;
};

struct FlowState {
  Vector u;  // velocity coefficients, wall dofs exactly zero
  Vector p;  // pressure coefficients
  int k = 0;
};

struct Trajectory {
  std::vector<FlowState> states;  // k = 0..K
  double dt = 0.0;
  double theta = 0.0;

  int num_steps() const { return static_cast<int>(states.size()) - 1; }
  const FlowState& state(int k) const { return states.at(k); }
};

struct StepStats {
  int iterations = 0;
  std::vector<double> residuals;  // per Newton iteration, plus the final one
};

// Coupled velocity-pressure step system on one mesh. Owns the cached
// operators, the Jacobian pattern, and the sparse LU used both by the
// forward Newton iteration and (transposed) by the adjoint sweep.
class FlowSystem {
 public:
  FlowSystem(const Mesh& mesh, const ModelConfig& cfg);

  const Mesh& mesh() const { return *mesh_; }
  const ModelConfig& config() const { return cfg_; }
  const Space& velocity_space() const { return vel_; }
  const Space& pressure_space() const { return pres_; }
  const ControlLayout& control_layout() const { return layout_; }

  int coupled_dim() const { return 3 * mesh_->num_vertices(); }
  Vector pack(const Vector& u, const Vector& p) const;
  void unpack(const Vector& y, Vector& u, Vector& p) const;

  // Residual of the step producing the new state (u, p) from u_prev with
  // boundary data g (full velocity layout). Wall rows are zeroed.
  Vector residual(const Vector& u_prev, const Vector& u, const Vector& p,
                  const Vector& g_full) const;

  // Exact Newton Jacobian at (u_prev, u); kept until the next assemble call.
  void assemble_jacobian(const Vector& u_prev, const Vector& u);
  void factorize();                              // throws SolverError
  Vector solve(const Vector& rhs) const;         // J x = rhs
  Vector solve_transposed(const Vector& rhs);       // J^T x = rhs
  const SparseOperator& current_jacobian() const { return jac_; }

  // dF_k/du^k as a velocity x velocity operator at w = theta u_new +
  // (1-theta) u_old (only velocity rows are nonzero).
  SparseOperator assemble_prev_coupling(const Vector& u_old,
                                        const Vector& u_new) const;

  // dF/dg blocks (state-independent).
  const SparseOperator& g_to_vel() const { return nitsche_.g_vel; }
  const SparseOperator& g_to_pres() const { return nitsche_.g_pres; }
  const NitscheBlocks& nitsche() const { return nitsche_; }

  FlowState step(const FlowState& prev, const Vector& g_full,
                 StepStats* stats = nullptr);
  Trajectory solve_forward(const Control& m, std::vector<StepStats>* stats = nullptr);

  const std::vector<int>& wall_dofs() const { return layout_.wall_dofs; }
  void zero_wall_rows(Vector& coupled) const;

 private:
  void build_constant_part();

  const Mesh* mesh_;
  ModelConfig cfg_;
  Space vel_, pres_;
  ControlLayout layout_;

  SparseOperator mass_, stiffness_, divergence_, gradient_, stab_;
  NitscheBlocks nitsche_;
  Vector body_force_rhs_;
  std::vector<char> is_wall_;  // per velocity dof

  SparseOperator jac_;                 // current Jacobian (coupled)
  std::vector<double> jac_template_;   // constant part of jac_ values
  // Per cell: value offsets of the 6x6 velocity block inside jac_ (-1 for
  // eliminated wall rows/cols).
  std::vector<std::array<int, 36>> conv_scatter_;
  Eigen::SparseLU<SparseOperator> lu_;
  bool pattern_analyzed_ = false;
};

// One-shot convenience wrapper around FlowSystem.
Trajectory solve_forward(const Mesh& mesh, const ModelConfig& cfg,
                         const Control& m);

// Loss-free binary trajectory checkpoints keyed by the mesh hash.
void save_trajectory(const Trajectory& traj, std::uint64_t mesh_hash,
                     const std::string& path);
Trajectory load_trajectory(std::uint64_t mesh_hash, const std::string& path);

}  // namespace flow4dvar
