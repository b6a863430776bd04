#include "flow4dvar/reduced.hpp"

#include <limits>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

ReducedFunctional::ReducedFunctional(const Mesh& mesh, const ModelConfig& model,
                                     ObservationSet observations,
                                     RegularisationConfig reg)
    : system_(mesh, model),
      observer_(system_.velocity_space(), mesh),
      observations_(std::move(observations)),
      reg_(reg) {
  if (observations_.mesh_hash != mesh.content_hash())
    throw ValidationError("observation set belongs to a different mesh");
  align_to_space(observations_, system_.velocity_space());
  if (std::abs(observations_.dt - model.dt) > 1e-12)
    throw ValidationError("observation grid spacing differs from the model");
  reg_matrix_ = assemble_control_quadratic(layout(), reg_.alpha, reg_.gamma,
                                           reg_.couple_g0_to_u0);
}

RieszMap& ReducedFunctional::riesz() {
  if (!riesz_) riesz_ = std::make_unique<RieszMap>(layout());
  return *riesz_;
}

double ReducedFunctional::regularisation(const Control& m) const {
  Vector x = layout().pack(m);
  return 0.5 * x.dot(reg_matrix_ * x);
}

Trajectory ReducedFunctional::solve(const Vector& stacked_m) {
  Control m = layout().unpack(stacked_m);
  return system_.solve_forward(m);
}

double ReducedFunctional::value(const Vector& stacked_m) {
  Control m = layout().unpack(stacked_m);
  Trajectory traj = system_.solve_forward(m);
  return observer_.misfit(traj, observations_) + regularisation(m);
}

Objective ReducedFunctional::guarded_objective() {
  return [this](const Vector& m) -> Evaluation {
    try {
      return evaluate(m);
    } catch (const SolverError&) {
      Evaluation failed;
      failed.value = std::numeric_limits<double>::infinity();
      failed.misfit = failed.value;
      failed.gradient = Vector::Zero(m.size());
      return failed;
    }
  };
}

Evaluation ReducedFunctional::evaluate(const Vector& stacked_m) {
  Control m = layout().unpack(stacked_m);
  Trajectory traj = system_.solve_forward(m);

  Evaluation result;
  result.misfit = observer_.misfit(traj, observations_);
  result.reg = regularisation(m);
  result.value = result.misfit + result.reg;

  std::vector<Vector> sources =
      observer_.misfit_state_sources(traj, observations_);
  std::vector<AdjointState> adjoints = solve_adjoint(system_, traj, sources);
  ControlGradient reg_grad = layout().unpack(reg_matrix_ * stacked_m);
  ControlGradient grad =
      assemble_gradient(system_, traj, adjoints, sources, reg_grad);
  result.gradient = layout().pack(grad);
  return result;
}

}  // namespace flow4dvar
