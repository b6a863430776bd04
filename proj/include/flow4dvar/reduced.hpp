#pragma once

#include <memory>
#include <optional>

#include "flow4dvar/adjoint.hpp"
#include "flow4dvar/control.hpp"
#include "flow4dvar/forward.hpp"
#include "flow4dvar/observe.hpp"
#include "flow4dvar/optimize.hpp"

namespace flow4dvar {

// Reduced functional Jhat(m) = J(u(m)) + R(m) over the stacked control
// vector, with its exact discrete gradient via the adjoint sweep.
class ReducedFunctional {
 public:
  ReducedFunctional(const Mesh& mesh, const ModelConfig& model,
                    ObservationSet observations, RegularisationConfig reg);

  const ControlLayout& layout() const { return system_.control_layout(); }
  FlowSystem& system() { return system_; }
  const Observer& observer() const { return observer_; }
  const ObservationSet& observations() const { return observations_; }
  const RegularisationConfig& reg_config() const { return reg_; }
  RieszMap& riesz();

  // Forward solve + misfit + regularisation + adjoint gradient.
  Evaluation evaluate(const Vector& stacked_m);
  // Forward solve + values only (finite-difference oracles, line-search
  // probes in tests).
  double value(const Vector& stacked_m);

  Trajectory solve(const Vector& stacked_m);

  double regularisation(const Control& m) const;

  // Objective wrapper that maps forward-solver failures at a probe point to
  // an infinite value, so the line search backs off instead of aborting.
  Objective guarded_objective();

 private:
  FlowSystem system_;
  Observer observer_;
  ObservationSet observations_;
  RegularisationConfig reg_;
  SparseOperator reg_matrix_;  // cached weighted quadratic form
  std::unique_ptr<RieszMap> riesz_;
};

}  // namespace flow4dvar
