#pragma once

#include <vector>

#include "flow4dvar/forward.hpp"

namespace flow4dvar {

struct AdjointState {
  Vector lambda_u;
  Vector lambda_p;
  int k = 0;
};

// Backward substitution through the upper-triangular adjoint system: for
// k = K..1 solve
//   (dF_{k-1}/dy^k)^T lambda^k = -dJ/dy^k - (dF_k/dy^k)^T lambda^{k+1},
// with lambda^{K+1} = 0. The blocks are the transposed Newton Jacobians
// reassembled at the forward states. Index 0 of the returned vector is a
// zero placeholder so adjoints[k] pairs with traj.state(k).
std::vector<AdjointState> solve_adjoint(FlowSystem& system,
                                        const Trajectory& traj,
                                        const std::vector<Vector>& misfit_sources);

// dJhat/dm = (dF/dm)^T lambda + dJhat/dm|_explicit. The u0 block combines the
// first step's previous-state coupling with any direct source at k = 0; the
// g_k blocks are the transposed Nitsche data maps applied to lambda^k.
ControlGradient assemble_gradient(FlowSystem& system, const Trajectory& traj,
                                  const std::vector<AdjointState>& adjoints,
                                  const std::vector<Vector>& misfit_sources,
                                  const ControlGradient& reg_gradient);

// Forward and transposed action of the full space-time state Jacobian on
// coupled vectors w^1..w^K (wall components zero). Used by the adjoint
// exactness checks; both sides are assembled independently of solve_adjoint's
// solve path.
std::vector<Vector> apply_state_jacobian(FlowSystem& system,
                                         const Trajectory& traj,
                                         const std::vector<Vector>& w);
std::vector<Vector> apply_state_jacobian_transpose(
    FlowSystem& system, const Trajectory& traj,
    const std::vector<Vector>& lambda);

}  // namespace flow4dvar
