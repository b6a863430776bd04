#include "flow4dvar/observe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

int step_index(double t, double dt) {
  int k = static_cast<int>(std::lround(t / dt));
  if (std::abs(t - k * dt) > 1e-9 * dt)
    throw ContractError("time " + std::to_string(t) +
                        " is not aligned to the step grid");
  return k;
}

std::vector<double> even_observation_times(double T, double dt, int n) {
  std::vector<double> times(n);
  for (int i = 1; i <= n; ++i) {
    double t = i * T / n;
    times[i - 1] = std::lround(t / dt) * dt;  // snap to the grid
  }
  return times;
}

std::vector<double> even_observation_endpoints(double T, double dt, int n) {
  std::vector<double> ep(n + 1);
  for (int i = 0; i <= n; ++i) ep[i] = std::lround(i * T / n / dt) * dt;
  return ep;
}

Observer::Observer(const Space& velocity, const Mesh& mesh)
    : velocity_(&velocity), mesh_(&mesh) {
  mass_obs_ = assemble_mass_region(velocity, Region::obs);
  std::set<int> verts;
  for (int c : mesh.cells_in(Region::obs))
    for (int v : mesh.cells[c]) verts.insert(v);
  vertices_.assign(verts.begin(), verts.end());
  obs_dof_.assign(velocity.dim(), 0);
  for (int v : vertices_) {
    obs_dof_[velocity.dof(v, 0)] = 1;
    obs_dof_[velocity.dof(v, 1)] = 1;
  }
}

Vector Observer::restrict(const Vector& u) const {
  Vector r = Vector::Zero(velocity_->dim());
  for (int d = 0; d < velocity_->dim(); ++d)
    if (obs_dof_[d]) r[d] = u[d];
  return r;
}

ObservationSet Observer::sample_instantaneous(
    const Trajectory& traj, const std::vector<double>& times) const {
  ObservationSet obs;
  obs.kind = ObservationKind::instantaneous;
  obs.times = times;
  obs.vertices = vertices_;
  obs.mesh_hash = mesh_->content_hash();
  obs.dt = traj.dt;
  for (double t : times) {
    int k = step_index(t, traj.dt);
    if (k < 0 || k > traj.num_steps())
      throw ContractError("observation time outside the trajectory");
    obs.data.push_back(restrict(traj.state(k).u));
  }
  return obs;
}

ObservationSet Observer::sample_averaged(
    const Trajectory& traj, const std::vector<double>& endpoints) const {
  ObservationSet obs;
  obs.kind = ObservationKind::averaged;
  obs.endpoints = endpoints;
  obs.vertices = vertices_;
  obs.mesh_hash = mesh_->content_hash();
  obs.dt = traj.dt;
  for (size_t n = 1; n < endpoints.size(); ++n) {
    int k0 = step_index(endpoints[n - 1], traj.dt);
    int k1 = step_index(endpoints[n], traj.dt);
    if (k1 <= k0) throw ContractError("empty observation interval");
    if (k1 > traj.num_steps())
      throw ContractError("observation interval outside the trajectory");
    Vector mean = Vector::Zero(velocity_->dim());
    for (int k = k0 + 1; k <= k1; ++k) mean += traj.state(k).u;
    mean /= static_cast<double>(k1 - k0);
    obs.data.push_back(restrict(mean));
  }
  return obs;
}

Vector Observer::observed(const Trajectory& traj, const ObservationSet& obs,
                          int n) const {
  if (obs.kind == ObservationKind::instantaneous) {
    int k = step_index(obs.times[n], traj.dt);
    return restrict(traj.state(k).u);
  }
  int k0 = step_index(obs.endpoints[n], traj.dt);
  int k1 = step_index(obs.endpoints[n + 1], traj.dt);
  Vector mean = Vector::Zero(velocity_->dim());
  for (int k = k0 + 1; k <= k1; ++k) mean += traj.state(k).u;
  mean /= static_cast<double>(k1 - k0);
  return restrict(mean);
}

double Observer::misfit(const Trajectory& traj,
                        const ObservationSet& obs) const {
  double total = 0.0;
  for (int n = 0; n < obs.size(); ++n) {
    Vector e = observed(traj, obs, n) - obs.data[n];
    total += e.dot(mass_obs_ * e);
  }
  return total;
}

std::vector<Vector> Observer::misfit_state_sources(
    const Trajectory& traj, const ObservationSet& obs) const {
  std::vector<Vector> sources(traj.num_steps() + 1,
                              Vector::Zero(velocity_->dim()));
  for (int n = 0; n < obs.size(); ++n) {
    Vector e = observed(traj, obs, n) - obs.data[n];
    Vector src = 2.0 * (mass_obs_ * e);
    if (obs.kind == ObservationKind::instantaneous) {
      sources[step_index(obs.times[n], traj.dt)] += src;
    } else {
      int k0 = step_index(obs.endpoints[n], traj.dt);
      int k1 = step_index(obs.endpoints[n + 1], traj.dt);
      for (int k = k0 + 1; k <= k1; ++k)
        sources[k] += src / static_cast<double>(k1 - k0);
    }
  }
  return sources;
}

namespace {

// Deterministic standard normals: Box-Muller over a fixed-width uniform
// draw, independent of the standard library's distribution implementation.
struct GaussianStream {
  std::mt19937_64 rng;
  bool have_spare = false;
  double spare = 0.0;

  explicit GaussianStream(std::uint64_t seed) : rng(seed) {}

  double uniform01() {
    return ((rng() >> 11) + 0.5) * 0x1.0p-53;  // in (0,1)
  }

  double next() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    double u1 = uniform01(), u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * M_PI * u2);
    have_spare = true;
    return r * std::cos(2.0 * M_PI * u2);
  }
};

}  // namespace

ObservationSet add_noise(const ObservationSet& obs, const Observer& observer,
                         double target_snr, std::uint64_t seed) {
  if (std::isinf(target_snr)) return obs;
  if (target_snr <= 0.0) throw ContractError("target SNR must be positive");

  const Space& vel = observer.velocity_space();
  double signal = 0.0;
  for (const Vector& d : obs.data) signal += d.dot(observer.mass_obs() * d);
  if (signal <= 0.0)
    throw ContractError("cannot set a finite SNR on zero-signal observations");

  GaussianStream gauss(seed);
  std::vector<Vector> noise;
  double noise_energy = 0.0;
  for (int n = 0; n < obs.size(); ++n) {
    Vector eta = Vector::Zero(vel.dim());
    for (int v : obs.vertices) {
      eta[vel.dof(v, 0)] = gauss.next();
      eta[vel.dof(v, 1)] = gauss.next();
    }
    noise_energy += eta.dot(observer.mass_obs() * eta);
    noise.push_back(std::move(eta));
  }
  double scale = std::sqrt(signal / (target_snr * noise_energy));

  ObservationSet out = obs;
  for (int n = 0; n < obs.size(); ++n) out.data[n] += scale * noise[n];
  return out;
}

void save_observations(const ObservationSet& obs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  char buf[128];
  out << "flow4dvar-obs v1\n";
  std::snprintf(buf, sizeof(buf), "mesh %016llx\n",
                static_cast<unsigned long long>(obs.mesh_hash));
  out << buf;
  out << "kind "
      << (obs.kind == ObservationKind::instantaneous ? "inst" : "avg") << "\n";
  out << "n " << obs.size() << "\n";
  std::snprintf(buf, sizeof(buf), "dt %.17g\n", obs.dt);
  out << buf;
  for (int n = 0; n < obs.size(); ++n) {
    if (obs.kind == ObservationKind::instantaneous)
      std::snprintf(buf, sizeof(buf), "observation %d time %.17g\n", n + 1,
                    obs.times[n]);
    else
      std::snprintf(buf, sizeof(buf), "observation %d interval %.17g %.17g\n",
                    n + 1, obs.endpoints[n], obs.endpoints[n + 1]);
    out << buf;
    out << "dofs " << obs.vertices.size() << "\n";
    const Vector& d = obs.data[n];
    for (int v : obs.vertices) {
      std::snprintf(buf, sizeof(buf), "%d %.17g %.17g\n", v, d[2 * v],
                    d[2 * v + 1]);
      out << buf;
    }
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

ObservationSet load_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open observation file '" + path + "'");
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line))
      throw ParseError(std::string("observation file ended before ") + what);
    return line;
  };

  if (next("magic") != "flow4dvar-obs v1")
    throw ParseError("not an observation file: '" + path + "'");

  ObservationSet obs;
  {
    std::istringstream ss(next("mesh hash"));
    std::string word, hex;
    ss >> word >> hex;
    if (word != "mesh") throw ParseError("expected 'mesh <hash>'");
    obs.mesh_hash = std::stoull(hex, nullptr, 16);
  }
  int n_obs = 0;
  {
    std::istringstream ss(next("kind"));
    std::string word, kind;
    ss >> word >> kind;
    if (word != "kind" || (kind != "inst" && kind != "avg"))
      throw ParseError("expected 'kind inst|avg'");
    obs.kind = kind == "inst" ? ObservationKind::instantaneous
                              : ObservationKind::averaged;
  }
  {
    std::istringstream ss(next("n"));
    std::string word;
    ss >> word >> n_obs;
    if (word != "n" || n_obs <= 0) throw ParseError("expected 'n <count>'");
  }
  {
    std::istringstream ss(next("dt"));
    std::string word;
    ss >> word >> obs.dt;
    if (word != "dt" || obs.dt <= 0.0) throw ParseError("expected 'dt <dt>'");
  }

  int max_vertex = -1;
  std::vector<std::vector<std::pair<int, Vec2>>> raw(n_obs);
  for (int n = 0; n < n_obs; ++n) {
    std::istringstream ss(next("observation header"));
    std::string word;
    int idx;
    ss >> word >> idx;
    if (word != "observation" || idx != n + 1)
      throw ParseError("expected 'observation " + std::to_string(n + 1) + "'");
    ss >> word;
    if (obs.kind == ObservationKind::instantaneous) {
      if (word != "time") throw ParseError("expected 'time <t>'");
      double t;
      ss >> t;
      obs.times.push_back(t);
    } else {
      if (word != "interval") throw ParseError("expected 'interval <t0> <t1>'");
      double t0, t1;
      ss >> t0 >> t1;
      if (n == 0) obs.endpoints.push_back(t0);
      obs.endpoints.push_back(t1);
    }
    std::istringstream ds(next("dofs header"));
    int ndofs;
    ds >> word >> ndofs;
    if (word != "dofs" || ndofs < 0) throw ParseError("expected 'dofs <count>'");
    raw[n].reserve(ndofs);
    for (int i = 0; i < ndofs; ++i) {
      std::istringstream vs(next("dof line"));
      int v;
      Vec2 value;
      if (!(vs >> v >> value.x >> value.y))
        throw ParseError("bad dof line in observation " + std::to_string(n + 1));
      raw[n].emplace_back(v, value);
      max_vertex = std::max(max_vertex, v);
    }
  }

  std::set<int> verts;
  for (const auto& entries : raw)
    for (const auto& [v, value] : entries) verts.insert(v);
  obs.vertices.assign(verts.begin(), verts.end());
  int dim = 2 * (max_vertex + 1);
  for (int n = 0; n < n_obs; ++n) {
    Vector d = Vector::Zero(dim);
    for (const auto& [v, value] : raw[n]) {
      d[2 * v] = value.x;
      d[2 * v + 1] = value.y;
    }
    obs.data.push_back(std::move(d));
  }
  return obs;
}

void align_to_space(ObservationSet& obs, const Space& velocity) {
  for (int v : obs.vertices)
    if (v < 0 || v >= velocity.mesh->num_vertices())
      throw ValidationError("observation vertex " + std::to_string(v) +
                            " outside the mesh");
  for (Vector& d : obs.data) {
    if (d.size() > velocity.dim())
      throw ValidationError("observation data larger than the velocity space");
    if (d.size() < velocity.dim()) {
      Vector padded = Vector::Zero(velocity.dim());
      padded.head(d.size()) = d;
      d = std::move(padded);
    }
  }
}

}  // namespace flow4dvar
