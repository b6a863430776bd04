#include "flow4dvar/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "flow4dvar/errors.hpp"
#include "flow4dvar/fem.hpp"

namespace flow4dvar {

namespace {

constexpr double kPaPerMmUnit = 1e-6;  // (kg/m^3) * mm^2/s^2 in Pa

}  // namespace

Vec2 wall_tangential_traction(const Mesh& mesh, const Space& velocity,
                              const Vector& u, const Vector& p, int facet,
                              double nu, double rho) {
  const BoundaryFacet& bf = mesh.boundary_facets[facet];
  FacetGeometry geo = facet_geometry(mesh, facet);
  CellGeometry cg = cell_geometry(mesh, bf.cell);
  const auto& t = mesh.cells[bf.cell];

  // Constant velocity gradient on the owning cell.
  double G[2][2] = {};
  for (int k = 0; k < 3; ++k) {
    double ux = u[velocity.dof(t[k], 0)], uy = u[velocity.dof(t[k], 1)];
    G[0][0] += ux * cg.grad[k].x;
    G[0][1] += ux * cg.grad[k].y;
    G[1][0] += uy * cg.grad[k].x;
    G[1][1] += uy * cg.grad[k].y;
  }
  double p_avg = 0.5 * (p[bf.a] + p[bf.b]);

  const Vec2 n = geo.normal;
  double sxx = rho * (-p_avg + nu * 2.0 * G[0][0]);
  double syy = rho * (-p_avg + nu * 2.0 * G[1][1]);
  double sxy = rho * nu * (G[0][1] + G[1][0]);
  Vec2 traction{sxx * n.x + sxy * n.y, sxy * n.x + syy * n.y};
  double normal_part = traction.dot(n);
  return Vec2{traction.x - normal_part * n.x, traction.y - normal_part * n.y};
}

std::vector<WssSample> wss(const Mesh& mesh, const Space& velocity,
                           const Trajectory& traj,
                           const std::vector<int>& facets, double nu,
                           double rho) {
  std::vector<WssSample> samples;
  samples.reserve(facets.size());
  for (int f : facets) {
    WssSample sample;
    sample.facet = f;
    sample.magnitude.reserve(traj.states.size());
    for (const FlowState& s : traj.states) {
      Vec2 tau =
          wall_tangential_traction(mesh, velocity, s.u, s.p, f, nu, rho);
      sample.magnitude.push_back(tau.norm() * kPaPerMmUnit);
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

namespace {

void check_same_grid(const Trajectory& a, const Trajectory& b) {
  if (a.num_steps() != b.num_steps() || a.dt != b.dt)
    throw ContractError("trajectories live on different time grids");
  if (a.state(0).u.size() != b.state(0).u.size())
    throw ContractError("trajectories live on different meshes");
}

}  // namespace

double velocity_error(const Space& velocity,
                      const Trajectory& reconstructed, const Trajectory& truth,
                      Region region) {
  check_same_grid(reconstructed, truth);
  SparseOperator M = assemble_mass_region(velocity, region);
  double num = 0.0, den = 0.0;
  for (int k = 1; k <= truth.num_steps(); ++k) {
    Vector e = reconstructed.state(k).u - truth.state(k).u;
    num += truth.dt * e.dot(M * e);
    den += truth.dt * truth.state(k).u.dot(M * truth.state(k).u);
  }
  if (den <= 0.0) throw ContractError("velocity error: zero reference norm");
  return std::sqrt(num / den);
}

double time_averaged_velocity_error(const Space& velocity,
                                    const Trajectory& reconstructed,
                                    const Trajectory& truth, Region region) {
  check_same_grid(reconstructed, truth);
  SparseOperator M = assemble_mass_region(velocity, region);
  const int K = truth.num_steps();
  Vector mean_rec = Vector::Zero(velocity.dim());
  Vector mean_true = Vector::Zero(velocity.dim());
  for (int k = 1; k <= K; ++k) {
    mean_rec += reconstructed.state(k).u;
    mean_true += truth.state(k).u;
  }
  mean_rec /= K;
  mean_true /= K;
  double den = mean_true.dot(M * mean_true);
  if (den <= 0.0)
    throw ContractError("time-averaged error: zero reference norm");
  Vector e = mean_rec - mean_true;
  return std::sqrt(e.dot(M * e) / den);
}

double wss_error(const Mesh& mesh, const Space& velocity,
                 const Trajectory& reconstructed, const Trajectory& truth,
                 const std::vector<int>& facets, double nu, double rho) {
  check_same_grid(reconstructed, truth);
  auto rec = wss(mesh, velocity, reconstructed, facets, nu, rho);
  auto ref = wss(mesh, velocity, truth, facets, nu, rho);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < facets.size(); ++i) {
    double len = facet_geometry(mesh, facets[i]).length;
    for (int k = 1; k <= truth.num_steps(); ++k) {
      double d = rec[i].magnitude[k] - ref[i].magnitude[k];
      num += truth.dt * len * d * d;
      den += truth.dt * len * ref[i].magnitude[k] * ref[i].magnitude[k];
    }
  }
  if (den <= 0.0) throw ContractError("WSS error: zero reference norm");
  return std::sqrt(num / den);
}

Trajectory restrict_trajectory(const Trajectory& truth,
                               const Mesh& extended_mesh,
                               const Mesh& reconstruction_mesh) {
  const int nv = reconstruction_mesh.num_vertices();
  if (extended_mesh.num_vertices() < nv)
    throw ValidationError("extended mesh smaller than the reconstruction mesh");
  for (int v = 0; v < nv; ++v) {
    if (extended_mesh.vertices[v].x != reconstruction_mesh.vertices[v].x ||
        extended_mesh.vertices[v].y != reconstruction_mesh.vertices[v].y)
      throw ValidationError(
          "reconstruction mesh is not a vertex prefix of the extended mesh");
  }
  Trajectory out;
  out.dt = truth.dt;
  out.theta = truth.theta;
  out.states.reserve(truth.states.size());
  for (const FlowState& s : truth.states) {
    FlowState r;
    r.k = s.k;
    r.u = s.u.head(2 * nv);
    r.p = s.p.head(nv);
    out.states.push_back(std::move(r));
  }
  return out;
}

MetricsReport compute_metrics(const Mesh& mesh, const Trajectory& reconstructed,
                              const Trajectory& truth, double nu, double rho) {
  Space velocity(mesh, 2);
  MetricsReport report;
  report.e_velocity =
      velocity_error(velocity, reconstructed, truth, Region::ane);
  report.e_ua = time_averaged_velocity_error(velocity, reconstructed,
                                             truth, Region::ane);
  report.e_wss = wss_error(mesh, velocity, reconstructed, truth,
                           mesh.aneurysm_wall_facets(), nu, rho);
  return report;
}

void write_metrics_report(const MetricsReport& report,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "# relative errors over the aneurysm; WSS in Pa "
         "(1 kg/m^3 * mm^2/s^2 = 1e-6 Pa)\n";
  char buf[96];
  std::snprintf(buf, sizeof(buf), "E_velocity_ane %.17g\n", report.e_velocity);
  out << buf;
  std::snprintf(buf, sizeof(buf), "E_wss_ane %.17g\n", report.e_wss);
  out << buf;
  std::snprintf(buf, sizeof(buf), "E_velocity_timeavg_ane %.17g\n",
                report.e_ua);
  out << buf;
}

void write_metrics_timeseries(const Mesh& mesh,
                              const Trajectory& reconstructed,
                              const Trajectory& truth, double nu, double rho,
                              const std::string& path) {
  check_same_grid(reconstructed, truth);
  Space velocity(mesh, 2);
  SparseOperator M = assemble_mass_region(velocity, Region::ane);
  auto facets = mesh.aneurysm_wall_facets();
  auto rec_wss = wss(mesh, velocity, reconstructed, facets, nu, rho);
  auto true_wss = wss(mesh, velocity, truth, facets, nu, rho);

  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "# u in mm/s, WSS in Pa (1 kg/m^3 * mm^2/s^2 = 1e-6 Pa)\n";
  out << "t,u_norm_ane,u_norm_ane_true,wss_norm,wss_norm_true\n";
  char buf[256];
  for (int k = 0; k <= truth.num_steps(); ++k) {
    double un = std::sqrt(
        reconstructed.state(k).u.dot(M * reconstructed.state(k).u));
    double ut = std::sqrt(truth.state(k).u.dot(M * truth.state(k).u));
    double wn = 0.0, wt = 0.0;
    for (size_t i = 0; i < facets.size(); ++i) {
      double len = facet_geometry(mesh, facets[i]).length;
      wn += len * rec_wss[i].magnitude[k] * rec_wss[i].magnitude[k];
      wt += len * true_wss[i].magnitude[k] * true_wss[i].magnitude[k];
    }
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  k * truth.dt, un, ut, std::sqrt(wn), std::sqrt(wt));
    out << buf;
  }
}

}  // namespace flow4dvar
