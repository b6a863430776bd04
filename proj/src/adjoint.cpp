#include "flow4dvar/adjoint.hpp"

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

namespace {

Vector pack_velocity_dual(const FlowSystem& system, const Vector& vel_dual) {
  Vector coupled = Vector::Zero(system.coupled_dim());
  const int nv = system.mesh().num_vertices();
  for (int v = 0; v < nv; ++v) {
    coupled[3 * v] = vel_dual[2 * v];
    coupled[3 * v + 1] = vel_dual[2 * v + 1];
  }
  return coupled;
}

}  // namespace

std::vector<AdjointState> solve_adjoint(FlowSystem& system,
                                        const Trajectory& traj,
                                        const std::vector<Vector>& misfit_sources) {
  const int K = traj.num_steps();
  if (static_cast<int>(misfit_sources.size()) != K + 1)
    throw ContractError("misfit sources must be indexed by state timestep");

  std::vector<AdjointState> adjoints(K + 1);
  adjoints[0].lambda_u = Vector::Zero(system.velocity_space().dim());
  adjoints[0].lambda_p = Vector::Zero(system.pressure_space().dim());

  Vector lambda_u_next;  // lambda^{K+1} = 0
  for (int k = K; k >= 1; --k) {
    Vector rhs_vel = -misfit_sources[k];
    if (k < K) {
      SparseOperator coupling =
          system.assemble_prev_coupling(traj.state(k).u, traj.state(k + 1).u);
      rhs_vel -= coupling.transpose() * lambda_u_next;
    }
    Vector rhs = pack_velocity_dual(system, rhs_vel);
    system.zero_wall_rows(rhs);

    system.assemble_jacobian(traj.state(k - 1).u, traj.state(k).u);
    try {
      system.factorize();
    } catch (const SolverError& e) {
      throw SolverError("adjoint step " + std::to_string(k) + ": " + e.what());
    }
    Vector lambda = system.solve_transposed(rhs);
    AdjointState& adj = adjoints[k];
    adj.k = k;
    system.unpack(lambda, adj.lambda_u, adj.lambda_p);
    for (int d : system.wall_dofs()) adj.lambda_u[d] = 0.0;
    lambda_u_next = adj.lambda_u;
  }
  return adjoints;
}

ControlGradient assemble_gradient(FlowSystem& system, const Trajectory& traj,
                                  const std::vector<AdjointState>& adjoints,
                                  const std::vector<Vector>& misfit_sources,
                                  const ControlGradient& reg_gradient) {
  const int K = traj.num_steps();
  const ControlLayout& layout = system.control_layout();
  if (static_cast<int>(adjoints.size()) != K + 1 ||
      static_cast<int>(reg_gradient.g.size()) != K)
    throw ContractError("gradient assembly: inconsistent dimensions");

  ControlGradient grad;

  // u0 block: (dF_0/du0)^T lambda^1 plus the direct misfit term at k = 0.
  SparseOperator coupling0 =
      system.assemble_prev_coupling(traj.state(0).u, traj.state(1).u);
  grad.u0 = coupling0.transpose() * adjoints[1].lambda_u;
  grad.u0 += misfit_sources[0];
  grad.u0 += reg_gradient.u0;
  layout.zero_wall_dofs(grad.u0);

  // g_k blocks: transposed Nitsche data maps applied to lambda^k.
  SparseOperator g_vel_t = SparseOperator(system.g_to_vel().transpose());
  SparseOperator g_pres_t = SparseOperator(system.g_to_pres().transpose());
  grad.g.resize(K);
  for (int k = 1; k <= K; ++k) {
    Vector full =
        g_vel_t * adjoints[k].lambda_u + g_pres_t * adjoints[k].lambda_p;
    grad.g[k - 1] = layout.gather_g(full) + reg_gradient.g[k - 1];
  }
  return grad;
}

std::vector<Vector> apply_state_jacobian(FlowSystem& system,
                                         const Trajectory& traj,
                                         const std::vector<Vector>& w) {
  const int K = traj.num_steps();
  if (static_cast<int>(w.size()) != K)
    throw ContractError("state perturbation must have K blocks");
  std::vector<Vector> out(K);
  Vector wu, wp;
  for (int k = 1; k <= K; ++k) {
    system.assemble_jacobian(traj.state(k - 1).u, traj.state(k).u);
    out[k - 1] = system.current_jacobian() * w[k - 1];
    if (k >= 2) {
      SparseOperator coupling =
          system.assemble_prev_coupling(traj.state(k - 1).u, traj.state(k).u);
      system.unpack(w[k - 2], wu, wp);
      out[k - 1] += pack_velocity_dual(system, coupling * wu);
    }
  }
  return out;
}

std::vector<Vector> apply_state_jacobian_transpose(
    FlowSystem& system, const Trajectory& traj,
    const std::vector<Vector>& lambda) {
  const int K = traj.num_steps();
  if (static_cast<int>(lambda.size()) != K)
    throw ContractError("adjoint perturbation must have K blocks");
  std::vector<Vector> out(K);
  Vector lu, lp;
  for (int k = 1; k <= K; ++k) {
    system.assemble_jacobian(traj.state(k - 1).u, traj.state(k).u);
    out[k - 1] =
        SparseOperator(system.current_jacobian().transpose()) * lambda[k - 1];
    if (k < K) {
      SparseOperator coupling =
          system.assemble_prev_coupling(traj.state(k).u, traj.state(k + 1).u);
      system.unpack(lambda[k], lu, lp);
      out[k - 1] += pack_velocity_dual(system, coupling.transpose() * lu);
    }
  }
  return out;
}

}  // namespace flow4dvar
