#include "flow4dvar/forward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

int ModelConfig::num_steps() const {
  double ratio = T / dt;
  int k = static_cast<int>(std::lround(ratio));
  if (k < 1 || std::abs(ratio - k) > 1e-9)
    throw ConfigError("T/dt must be integral (within 1e-9)");
  return k;
}

std::vector<BoundaryTag> ModelConfig::dirichlet_tags() const {
  if (swap_outlets) return {BoundaryTag::inlet, BoundaryTag::out2};
  return {BoundaryTag::inlet, BoundaryTag::out1};
}

void ModelConfig::validate() const {
  if (theta <= 0.0 || theta > 1.0) throw ConfigError("theta must be in (0,1]");
  if (dt <= 0.0) throw ConfigError("dt must be positive");
  if (nu <= 0.0) throw ConfigError("nu must be positive");
  if (sigma <= 0.0) throw ConfigError("sigma must be positive");
  if (beta <= 0.0) throw ConfigError("beta must be positive");
  num_steps();
}

namespace {

inline int vel_to_coupled(int vel_dof) {
  return 3 * (vel_dof / 2) + (vel_dof % 2);
}

inline int pres_to_coupled(int pres_dof) { return 3 * pres_dof + 2; }

// Local convection kernels on one cell for the frozen nodal wind w:
//   adv[i][j]  = ∫ (w·∇φ_j) φ_i dx   (component-diagonal advection)
//   grad[a][b] = ∂w_a/∂x_b            (constant on the cell)
//   mass[i][j] = ∫ φ_i φ_j dx
struct LocalConvection {
  double adv[3][3];
  double grad[2][2];
  double mass[3][3];
};

LocalConvection local_convection(const CellGeometry& geo,
                                 const std::array<Vec2, 3>& w) {
  LocalConvection lc{};
  const auto& quad = tri_quadrature_degree4();
  for (const auto& qp : quad) {
    Vec2 wq = w[0] * qp.bary[0] + w[1] * qp.bary[1] + w[2] * qp.bary[2];
    double scale = qp.weight * geo.area;
    for (int j = 0; j < 3; ++j) {
      double a = wq.dot(geo.grad[j]) * scale;
      for (int i = 0; i < 3; ++i) {
        lc.adv[i][j] += a * qp.bary[i];
        lc.mass[i][j] += scale * qp.bary[i] * qp.bary[j];
      }
    }
  }
  for (int k = 0; k < 3; ++k) {
    lc.grad[0][0] += w[k].x * geo.grad[k].x;
    lc.grad[0][1] += w[k].x * geo.grad[k].y;
    lc.grad[1][0] += w[k].y * geo.grad[k].x;
    lc.grad[1][1] += w[k].y * geo.grad[k].y;
  }
  return lc;
}

}  // namespace

FlowSystem::FlowSystem(const Mesh& mesh, const ModelConfig& cfg)
    : mesh_(&mesh), cfg_(cfg), vel_(mesh, 2), pres_(mesh, 1) {
  cfg_.validate();
  layout_ = make_control_layout(vel_, cfg_.dirichlet_tags(), cfg_.num_steps(),
                                cfg_.dt);

  mass_ = assemble_mass(vel_);
  stiffness_ = assemble_stiffness(vel_, 1.0);
  divergence_ = assemble_divergence(vel_, pres_);
  gradient_ = SparseOperator(divergence_.transpose());
  stab_ = assemble_pressure_stabilization(pres_, cfg_.beta);
  nitsche_ = assemble_nitsche_blocks(vel_, pres_, cfg_.dirichlet_tags(),
                                     cfg_.nu, cfg_.sigma, cfg_.theta);

  Vector f(vel_.dim());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    f[vel_.dof(v, 0)] = cfg_.body_force[0];
    f[vel_.dof(v, 1)] = cfg_.body_force[1];
  }
  body_force_rhs_ = mass_ * f;

  is_wall_.assign(vel_.dim(), 0);
  for (int d : layout_.wall_dofs) is_wall_[d] = 1;

  build_constant_part();
}

void FlowSystem::build_constant_part() {
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> ts;
  const int n = coupled_dim();
  const double theta = cfg_.theta;

  auto add_vel_vel = [&](const SparseOperator& op, double scale) {
    for (int col = 0; col < op.outerSize(); ++col)
      for (SparseOperator::InnerIterator it(op, col); it; ++it) {
        if (is_wall_[it.row()] || is_wall_[it.col()]) continue;
        ts.emplace_back(vel_to_coupled(it.row()), vel_to_coupled(it.col()),
                        scale * it.value());
      }
  };
  add_vel_vel(mass_, 1.0 / cfg_.dt);
  add_vel_vel(stiffness_, cfg_.nu * theta);
  add_vel_vel(nitsche_.uu_new, 1.0);

  for (int col = 0; col < gradient_.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(gradient_, col); it; ++it) {
      if (is_wall_[it.row()]) continue;
      ts.emplace_back(vel_to_coupled(it.row()), pres_to_coupled(it.col()),
                      it.value());
    }
  for (int col = 0; col < nitsche_.pu.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(nitsche_.pu, col); it; ++it) {
      if (is_wall_[it.row()]) continue;
      ts.emplace_back(vel_to_coupled(it.row()), pres_to_coupled(it.col()),
                      it.value());
    }
  for (int col = 0; col < divergence_.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(divergence_, col); it; ++it) {
      if (is_wall_[it.col()]) continue;
      ts.emplace_back(pres_to_coupled(it.row()), vel_to_coupled(it.col()),
                      it.value());
    }
  for (int col = 0; col < nitsche_.up.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(nitsche_.up, col); it; ++it) {
      if (is_wall_[it.col()]) continue;
      ts.emplace_back(pres_to_coupled(it.row()), vel_to_coupled(it.col()),
                      it.value());
    }
  for (int col = 0; col < stab_.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(stab_, col); it; ++it)
      ts.emplace_back(pres_to_coupled(it.row()), pres_to_coupled(it.col()),
                      it.value());

  for (int d = 0; d < vel_.dim(); ++d)
    if (is_wall_[d]) ts.emplace_back(vel_to_coupled(d), vel_to_coupled(d), 1.0);

  // Symbolic convection pattern (values zero) so the Jacobian structure is
  // fixed across Newton iterations and timesteps.
  if (cfg_.include_convection) {
    for (int c = 0; c < mesh_->num_cells(); ++c) {
      const auto& t = mesh_->cells[c];
      for (int i = 0; i < 3; ++i)
        for (int a = 0; a < 2; ++a)
          for (int j = 0; j < 3; ++j)
            for (int b = 0; b < 2; ++b) {
              int rd = vel_.dof(t[i], a), cd = vel_.dof(t[j], b);
              if (is_wall_[rd] || is_wall_[cd]) continue;
              ts.emplace_back(vel_to_coupled(rd), vel_to_coupled(cd), 0.0);
            }
    }
  }

  jac_.resize(n, n);
  jac_.setFromTriplets(ts.begin(), ts.end());
  jac_.makeCompressed();
  jac_template_.assign(jac_.valuePtr(), jac_.valuePtr() + jac_.nonZeros());

  // Value offsets of each cell's 6x6 velocity block inside jac_.
  auto find_entry = [&](int row, int col) -> int {
    int begin = jac_.outerIndexPtr()[col], end = jac_.outerIndexPtr()[col + 1];
    const auto* inner = jac_.innerIndexPtr();
    auto it = std::lower_bound(inner + begin, inner + end, row);
    if (it == inner + end || *it != row)
      throw ContractError("missing Jacobian entry in pattern");
    return static_cast<int>(it - inner);
  };
  if (cfg_.include_convection) {
    conv_scatter_.resize(mesh_->num_cells());
    for (int c = 0; c < mesh_->num_cells(); ++c) {
      const auto& t = mesh_->cells[c];
      for (int li = 0; li < 6; ++li)
        for (int lj = 0; lj < 6; ++lj) {
          int rd = vel_.dof(t[li / 2], li % 2);
          int cd = vel_.dof(t[lj / 2], lj % 2);
          if (is_wall_[rd] || is_wall_[cd]) {
            conv_scatter_[c][li * 6 + lj] = -1;
          } else {
            conv_scatter_[c][li * 6 + lj] =
                find_entry(vel_to_coupled(rd), vel_to_coupled(cd));
          }
        }
    }
  }

  lu_.analyzePattern(jac_);
  pattern_analyzed_ = true;
}

Vector FlowSystem::pack(const Vector& u, const Vector& p) const {
  Vector y(coupled_dim());
  const int nv = mesh_->num_vertices();
  for (int v = 0; v < nv; ++v) {
    y[3 * v] = u[2 * v];
    y[3 * v + 1] = u[2 * v + 1];
    y[3 * v + 2] = p[v];
  }
  return y;
}

void FlowSystem::unpack(const Vector& y, Vector& u, Vector& p) const {
  const int nv = mesh_->num_vertices();
  u.resize(2 * nv);
  p.resize(nv);
  for (int v = 0; v < nv; ++v) {
    u[2 * v] = y[3 * v];
    u[2 * v + 1] = y[3 * v + 1];
    p[v] = y[3 * v + 2];
  }
}

void FlowSystem::zero_wall_rows(Vector& coupled) const {
  for (int d : layout_.wall_dofs) coupled[vel_to_coupled(d)] = 0.0;
}

Vector FlowSystem::residual(const Vector& u_prev, const Vector& u,
                            const Vector& p, const Vector& g_full) const {
  const double theta = cfg_.theta, thetab = 1.0 - theta;

  Vector r_vel = (1.0 / cfg_.dt) * (mass_ * (u - u_prev));
  r_vel += cfg_.nu * (theta * (stiffness_ * u) + thetab * (stiffness_ * u_prev));
  r_vel += gradient_ * p;
  r_vel += nitsche_.uu_new * u + nitsche_.uu_old * u_prev + nitsche_.pu * p;
  r_vel += nitsche_.g_vel * g_full;
  r_vel -= body_force_rhs_;

  if (cfg_.include_convection) {
    Vector w = theta * u + thetab * u_prev;
    for (int c = 0; c < mesh_->num_cells(); ++c) {
      const auto& t = mesh_->cells[c];
      CellGeometry geo = cell_geometry(*mesh_, c);
      std::array<Vec2, 3> wn;
      for (int k = 0; k < 3; ++k)
        wn[k] = Vec2{w[vel_.dof(t[k], 0)], w[vel_.dof(t[k], 1)]};
      LocalConvection lc = local_convection(geo, wn);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          r_vel[vel_.dof(t[i], 0)] += lc.adv[i][j] * wn[j].x;
          r_vel[vel_.dof(t[i], 1)] += lc.adv[i][j] * wn[j].y;
        }
    }
  }

  Vector r_pres = divergence_ * u + stab_ * p;
  r_pres += nitsche_.up * u + nitsche_.g_pres * g_full;

  Vector r = pack(r_vel, r_pres);
  zero_wall_rows(r);
  return r;
}

void FlowSystem::assemble_jacobian(const Vector& u_prev, const Vector& u) {
  std::copy(jac_template_.begin(), jac_template_.end(), jac_.valuePtr());
  if (!cfg_.include_convection) return;

  const double theta = cfg_.theta;
  Vector w = theta * u + (1.0 - theta) * u_prev;
  double* values = jac_.valuePtr();
  for (int c = 0; c < mesh_->num_cells(); ++c) {
    const auto& t = mesh_->cells[c];
    CellGeometry geo = cell_geometry(*mesh_, c);
    std::array<Vec2, 3> wn;
    for (int k = 0; k < 3; ++k)
      wn[k] = Vec2{w[vel_.dof(t[k], 0)], w[vel_.dof(t[k], 1)]};
    LocalConvection lc = local_convection(geo, wn);
    const auto& scatter = conv_scatter_[c];
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 2; ++a)
        for (int j = 0; j < 3; ++j)
          for (int b = 0; b < 2; ++b) {
            int idx = scatter[(2 * i + a) * 6 + (2 * j + b)];
            if (idx < 0) continue;
            double value = lc.grad[a][b] * lc.mass[i][j];
            if (a == b) value += lc.adv[i][j];
            values[idx] += theta * value;
          }
  }
}

void FlowSystem::factorize() {
  lu_.factorize(jac_);
  if (lu_.info() != Eigen::Success)
    throw SolverError("sparse LU factorisation of the step system failed");
}

Vector FlowSystem::solve(const Vector& rhs) const { return lu_.solve(rhs); }

Vector FlowSystem::solve_transposed(const Vector& rhs) {
  return lu_.transpose().solve(rhs);
}

SparseOperator FlowSystem::assemble_prev_coupling(const Vector& u_old,
                                                  const Vector& u_new) const {
  const double theta = cfg_.theta, thetab = 1.0 - theta;
  SparseOperator A = (-1.0 / cfg_.dt) * mass_;
  A += (cfg_.nu * thetab) * stiffness_;
  A += nitsche_.uu_old;
  if (cfg_.include_convection && thetab != 0.0) {
    Field w(vel_, theta * u_new + thetab * u_old);
    A += thetab * (assemble_advection(vel_, w) + assemble_wind_gradient(vel_, w));
  }
  return A;
}

FlowState FlowSystem::step(const FlowState& prev, const Vector& g_full,
                           StepStats* stats) {
  Vector u = prev.u;
  Vector p = prev.p;

  double y_norm = std::sqrt(u.squaredNorm() + p.squaredNorm());
  auto tol = [&] { return cfg_.newton_tol * std::max(1.0, y_norm); };

  Vector r = residual(prev.u, u, p, g_full);
  double r_norm = r.norm();
  if (stats) stats->residuals.push_back(r_norm);

  int iter = 0;
  while (r_norm > tol()) {
    if (iter >= cfg_.newton_max_iter)
      throw SolverError("Newton did not converge within " +
                        std::to_string(cfg_.newton_max_iter) +
                        " iterations (residual " + std::to_string(r_norm) +
                        ")");
    assemble_jacobian(prev.u, u);
    factorize();
    Vector delta = solve(r);

    // Backtracking on the residual norm; full steps near the solution.
    double step_scale = 1.0;
    Vector u_try, p_try, r_try;
    double r_try_norm = 0.0;
    for (int half = 0; half < 9; ++half) {
      Vector y_try = pack(u, p) - step_scale * delta;
      unpack(y_try, u_try, p_try);
      for (int d : layout_.wall_dofs) u_try[d] = 0.0;
      r_try = residual(prev.u, u_try, p_try, g_full);
      r_try_norm = r_try.norm();
      if (r_try_norm < r_norm || r_try_norm <= tol()) break;
      step_scale *= 0.5;
    }
    u = std::move(u_try);
    p = std::move(p_try);
    r = std::move(r_try);
    r_norm = r_try_norm;
    y_norm = std::sqrt(u.squaredNorm() + p.squaredNorm());
    ++iter;
    if (stats) stats->residuals.push_back(r_norm);
  }
  if (stats) stats->iterations = iter;

  FlowState next;
  next.u = std::move(u);
  next.p = std::move(p);
  next.k = prev.k + 1;
  if (!next.u.allFinite() || !next.p.allFinite())
    throw SolverError("step produced non-finite state");
  return next;
}

Trajectory FlowSystem::solve_forward(const Control& m,
                                     std::vector<StepStats>* stats) {
  const int K = cfg_.num_steps();
  if (static_cast<int>(m.g.size()) != K)
    throw ContractError("control provides " + std::to_string(m.g.size()) +
                        " boundary fields, expected " + std::to_string(K));
  if (m.u0.size() != vel_.dim())
    throw ContractError("control u0 has wrong dimension");

  Trajectory traj;
  traj.dt = cfg_.dt;
  traj.theta = cfg_.theta;
  traj.states.reserve(K + 1);

  FlowState initial;
  initial.u = m.u0;
  for (int d : layout_.wall_dofs) initial.u[d] = 0.0;
  initial.p = Vector::Zero(pres_.dim());  // p^0 is not evolved; stored as zero
  initial.k = 0;
  traj.states.push_back(std::move(initial));

  for (int k = 0; k < K; ++k) {
    Vector g_full = layout_.scatter_g(m.g[k]);
    StepStats st;
    try {
      traj.states.push_back(
          step(traj.states.back(), g_full, stats ? &st : nullptr));
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(k + 1) + ": " + e.what());
    }
    if (stats) stats->push_back(std::move(st));
  }
  return traj;
}

Trajectory solve_forward(const Mesh& mesh, const ModelConfig& cfg,
                         const Control& m) {
  FlowSystem system(mesh, cfg);
  return system.solve_forward(m);
}

// ---------------------------------------------------------------------------
// Trajectory checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kTrajMagic[] = "F4DVTRAJ1";

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("unexpected end of trajectory checkpoint");
  return v;
}

}  // namespace

void save_trajectory(const Trajectory& traj, std::uint64_t mesh_hash,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out.write(kTrajMagic, sizeof(kTrajMagic));
  write_pod(out, mesh_hash);
  write_pod(out, traj.num_steps());
  write_pod(out, traj.dt);
  write_pod(out, traj.theta);
  int nv = static_cast<int>(traj.states.at(0).p.size());
  write_pod(out, nv);
  for (const FlowState& s : traj.states) {
    out.write(reinterpret_cast<const char*>(s.u.data()),
              sizeof(double) * s.u.size());
    out.write(reinterpret_cast<const char*>(s.p.data()),
              sizeof(double) * s.p.size());
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

Trajectory load_trajectory(std::uint64_t mesh_hash, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trajectory checkpoint '" + path + "'");
  char magic[sizeof(kTrajMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic) != kTrajMagic)
    throw ParseError("not a trajectory checkpoint: '" + path + "'");
  auto hash = read_pod<std::uint64_t>(in);
  if (hash != mesh_hash)
    throw ValidationError("trajectory checkpoint mesh hash mismatch");
  int K = read_pod<int>(in);
  Trajectory traj;
  traj.dt = read_pod<double>(in);
  traj.theta = read_pod<double>(in);
  int nv = read_pod<int>(in);
  traj.states.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    FlowState& s = traj.states[k];
    s.k = k;
    s.u.resize(2 * nv);
    s.p.resize(nv);
    in.read(reinterpret_cast<char*>(s.u.data()), sizeof(double) * 2 * nv);
    in.read(reinterpret_cast<char*>(s.p.data()), sizeof(double) * nv);
  }
  if (!in) throw ParseError("unexpected end of trajectory checkpoint");
  return traj;
}

}  // namespace flow4dvar
