#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flow4dvar/fem.hpp"
#include "flow4dvar/forward.hpp"

namespace flow4dvar {

enum class ObservationKind { instantaneous, averaged };

// N measured velocity fields restricted to the observation subdomain. Data
// vectors live on the full velocity index set with zeros outside the
// observation dofs.
struct ObservationSet {
  ObservationKind kind = ObservationKind::instantaneous;
  std::vector<double> times;      // instantaneous: N sample times
  std::vector<double> endpoints;  // averaged: N+1 interval endpoints
  std::vector<Vector> data;
  std::vector<int> vertices;  // observed vertices (sorted)
  std::uint64_t mesh_hash = 0;
  double dt = 0.0;

  int size() const { return static_cast<int>(data.size()); }
};

// Nearest step index; throws ContractError when t is off the grid by more
// than 1e-9 * dt.
int step_index(double t, double dt);

// Evenly distributed sample times n*T/N, snapped to the step grid.
std::vector<double> even_observation_times(double T, double dt, int n);
std::vector<double> even_observation_endpoints(double T, double dt, int n);

// Observation machinery for one mesh: the restriction mask and the velocity
// mass matrix over the observation cells.
class Observer {
 public:
  Observer(const Space& velocity, const Mesh& mesh);

  const Space& velocity_space() const { return *velocity_; }
  const SparseOperator& mass_obs() const { return mass_obs_; }
  const std::vector<int>& vertices() const { return vertices_; }

  // Restriction to the observation dofs (zero elsewhere).
  Vector restrict(const Vector& u) const;

  ObservationSet sample_instantaneous(const Trajectory& traj,
                                      const std::vector<double>& times) const;
  ObservationSet sample_averaged(const Trajectory& traj,
                                 const std::vector<double>& endpoints) const;

  // J = sum_n <T_n u - d_n, M_obs (T_n u - d_n)>.
  double misfit(const Trajectory& traj, const ObservationSet& obs) const;
  // dJ/du^k for k = 0..K (velocity-space dual vectors).
  std::vector<Vector> misfit_state_sources(const Trajectory& traj,
                                           const ObservationSet& obs) const;

 private:
  Vector observed(const Trajectory& traj, const ObservationSet& obs,
                  int n) const;

  const Space* velocity_;
  const Mesh* mesh_;
  SparseOperator mass_obs_;
  std::vector<int> vertices_;
  std::vector<char> obs_dof_;
};

// Additive per-dof Gaussian noise scaled so that the realised
// ||T u||^2 / ||T u - d||^2 (in the M_obs norm) equals target_snr.
// target_snr = infinity returns the data unchanged.
ObservationSet add_noise(const ObservationSet& obs, const Observer& observer,
                         double target_snr, std::uint64_t seed);

void save_observations(const ObservationSet& obs, const std::string& path);
ObservationSet load_observations(const std::string& path);

// Zero-pads loaded data vectors to the velocity-space dimension; throws when
// an observed vertex lies outside the mesh.
void align_to_space(ObservationSet& obs, const Space& velocity);

}  // namespace flow4dvar
