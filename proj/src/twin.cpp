#include "flow4dvar/twin.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "flow4dvar/errors.hpp"
#include "flow4dvar/metrics.hpp"

namespace flow4dvar {

namespace {

struct PortProfile {
  std::set<int> vertices;
  int flow_component = 0;  // 0: x-direction, 1: y-direction
  double flow_sign = 1.0;  // outward-positive for outlets, inward for inlet
  double lo = 0.0, hi = 0.0;  // extent across the port
  int across_component = 1;   // coordinate spanning the port width

  double shape(const Vec2& pos) const {
    double xi = across_component == 0 ? pos.x : pos.y;
    double w = hi - lo;
    if (w <= 0.0) return 0.0;
    double s = 4.0 * (xi - lo) * (hi - xi) / (w * w);
    return std::max(0.0, s);
  }
};

PortProfile make_profile(const Mesh& mesh, const Space& vel, BoundaryTag tag) {
  PortProfile profile;
  for (int v : vel.boundary_vertices(tag)) profile.vertices.insert(v);
  if (profile.vertices.empty())
    throw ContractError(std::string("no boundary vertices tagged ") +
                        to_string(tag));
  // Port orientation from the facet normals (ports are straight).
  int f = mesh.facets_with(tag).front();
  FacetGeometry geo = facet_geometry(mesh, f);
  if (std::abs(geo.normal.x) > std::abs(geo.normal.y)) {
    profile.flow_component = 0;
    profile.flow_sign = tag == BoundaryTag::inlet ? -geo.normal.x : geo.normal.x;
    profile.across_component = 1;
  } else {
    profile.flow_component = 1;
    profile.flow_sign = tag == BoundaryTag::inlet ? -geo.normal.y : geo.normal.y;
    profile.across_component = 0;
  }
  double lo = 1e300, hi = -1e300;
  for (int v : profile.vertices) {
    double xi = profile.across_component == 0 ? mesh.vertices[v].x
                                              : mesh.vertices[v].y;
    lo = std::min(lo, xi);
    hi = std::max(hi, xi);
  }
  profile.lo = lo;
  profile.hi = hi;
  return profile;
}

}  // namespace

Control pulse_control(const ControlLayout& layout, const Mesh& mesh,
                      const ModelConfig& model, double peak_inlet,
                      double peak_outlet) {
  const Space& vel = *layout.velocity;
  std::vector<std::pair<PortProfile, double>> ports;
  for (BoundaryTag tag : layout.dirichlet) {
    double peak = tag == BoundaryTag::inlet ? peak_inlet : peak_outlet;
    ports.emplace_back(make_profile(mesh, vel, tag), peak);
  }

  const int K = model.num_steps();
  Control m = layout.zero();
  for (int k = 0; k < K; ++k) {
    double t = (k + 1) * model.dt;
    double pulse = std::sin(M_PI * std::pow(1.0 - t, 3));
    for (int i = 0; i < layout.n_g(); ++i) {
      int dof = layout.control_dofs[i];
      int vertex = dof / 2, comp = dof % 2;
      for (const auto& [profile, peak] : ports) {
        if (!profile.vertices.count(vertex)) continue;
        if (comp != profile.flow_component) continue;
        m.g[k][i] = peak * profile.flow_sign * profile.shape(
                        mesh.vertices[vertex]) * pulse;
      }
    }
  }
  return m;
}

TwinData generate_twin_data(const Mesh& extended_mesh,
                            const Mesh& reconstruction_mesh,
                            const ModelConfig& model, ObservationKind kind,
                            int n_observations, double peak_inlet,
                            double peak_outlet, double snr,
                            std::uint64_t seed) {
  ModelConfig truth_model = model;
  truth_model.swap_outlets = false;  // generation drives inlet + out1

  FlowSystem system(extended_mesh, truth_model);
  Control m = pulse_control(system.control_layout(), extended_mesh,
                            truth_model, peak_inlet, peak_outlet);
  Trajectory truth = system.solve_forward(m);
  Trajectory restricted =
      restrict_trajectory(truth, extended_mesh, reconstruction_mesh);
  return sample_twin_data(reconstruction_mesh, restricted, model, kind,
                          n_observations, snr, seed);
}

TwinData sample_twin_data(const Mesh& reconstruction_mesh,
                          const Trajectory& restricted_truth,
                          const ModelConfig& model, ObservationKind kind,
                          int n_observations, double snr, std::uint64_t seed) {
  Space velocity(reconstruction_mesh, 2);
  Observer observer(velocity, reconstruction_mesh);
  TwinData data;
  data.truth = restricted_truth;
  if (kind == ObservationKind::instantaneous)
    data.observations = observer.sample_instantaneous(
        restricted_truth,
        even_observation_times(model.T, model.dt, n_observations));
  else
    data.observations = observer.sample_averaged(
        restricted_truth,
        even_observation_endpoints(model.T, model.dt, n_observations));
  data.observations = add_noise(data.observations, observer, snr, seed);
  return data;
}

}  // namespace flow4dvar
