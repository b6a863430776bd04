#pragma once

#include <string>
#include <vector>

#include "flow4dvar/forward.hpp"

namespace flow4dvar {

// Wall shear stress magnitude per boundary facet and timestep, in Pa.
// Internally all fields live in the mm-s unit system; with rho in kg/m^3 the
// traction comes out in units of 1e-6 Pa, converted on output.
struct WssSample {
  int facet = -1;
  std::vector<double> magnitude;  // k = 0..K
};

// Tangential wall traction of one state on one facet (linear in (u, p)):
// tau = sigma n - (sigma n . n) n with sigma = rho(-pI + nu(grad u + grad u^T)).
Vec2 wall_tangential_traction(const Mesh& mesh, const Space& velocity,
                              const Vector& u, const Vector& p, int facet,
                              double nu, double rho);

std::vector<WssSample> wss(const Mesh& mesh, const Space& velocity,
                           const Trajectory& traj,
                           const std::vector<int>& facets, double nu,
                           double rho);

// Relative space-time L2 error over the cells of a region, rectangle rule
// over (0, T]. Both trajectories must live on the same mesh and grid.
double velocity_error(const Space& velocity,
                      const Trajectory& reconstructed, const Trajectory& truth,
                      Region region);

// Relative error of the time-averaged velocity field over a region.
double time_averaged_velocity_error(const Space& velocity,
                                    const Trajectory& reconstructed,
                                    const Trajectory& truth, Region region);

// Relative space-time error of the WSS magnitude over the given wall facets
// (facet-length weighting; rectangle rule in time).
double wss_error(const Mesh& mesh, const Space& velocity,
                 const Trajectory& reconstructed, const Trajectory& truth,
                 const std::vector<int>& facets, double nu, double rho);

// Nodal restriction of a trajectory computed on the extended mesh onto the
// reconstruction mesh (whose vertices are a prefix of the extended mesh's).
Trajectory restrict_trajectory(const Trajectory& truth,
                               const Mesh& extended_mesh,
                               const Mesh& reconstruction_mesh);

struct MetricsReport {
  double e_velocity = 0.0;  // relative velocity error over the aneurysm
  double e_wss = 0.0;       // relative WSS error on the aneurysm wall
  double e_ua = 0.0;        // relative error of the time-averaged velocity
};

MetricsReport compute_metrics(const Mesh& mesh, const Trajectory& reconstructed,
                              const Trajectory& truth, double nu, double rho);

void write_metrics_report(const MetricsReport& report,
                          const std::string& path);
// CSV: t,u_norm_ane,u_norm_ane_true,wss_norm,wss_norm_true
void write_metrics_timeseries(const Mesh& mesh,
                              const Trajectory& reconstructed,
                              const Trajectory& truth, double nu, double rho,
                              const std::string& path);

}  // namespace flow4dvar
