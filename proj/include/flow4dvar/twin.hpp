#pragma once

#include "flow4dvar/control.hpp"
#include "flow4dvar/forward.hpp"
#include "flow4dvar/observe.hpp"

namespace flow4dvar {

// Truth-simulation boundary data for the twin experiments: parabolic
// profiles on the Dirichlet ports (peak_inlet on the inlet, peak_outlet
// directed outward on the controlled outlet), modulated in time by
// sin(pi (1-t)^3).
Control pulse_control(const ControlLayout& layout, const Mesh& mesh,
                      const ModelConfig& model, double peak_inlet,
                      double peak_outlet);

struct TwinData {
  Trajectory truth;  // restricted to the reconstruction mesh
  ObservationSet observations;
};

// Full twin protocol: solve the truth on the extended mesh with zero initial
// condition and the pulse boundary data, restrict to the reconstruction
// mesh, sample with the chosen operator, optionally add noise. The truth
// generation always drives inlet + out1; swapping outlets is a property of
// the reconstruction run only.
TwinData generate_twin_data(const Mesh& extended_mesh,
                            const Mesh& reconstruction_mesh,
                            const ModelConfig& model, ObservationKind kind,
                            int n_observations, double peak_inlet,
                            double peak_outlet, double snr,
                            std::uint64_t seed);

// Sampling only, for reuse of a previously computed (restricted) truth.
TwinData sample_twin_data(const Mesh& reconstruction_mesh,
                          const Trajectory& restricted_truth,
                          const ModelConfig& model, ObservationKind kind,
                          int n_observations, double snr, std::uint64_t seed);

}  // namespace flow4dvar
