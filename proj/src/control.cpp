#include "flow4dvar/control.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

ControlVector ControlLayout::zero() const {
  ControlVector m;
  m.u0 = Vector::Zero(velocity->dim());
  m.g.assign(K, Vector::Zero(n_g()));
  return m;
}

Vector ControlLayout::pack(const ControlVector& m) const {
  Vector out(stacked_dim());
  for (int i = 0; i < n_u0(); ++i) out[i] = m.u0[free_dofs[i]];
  for (int k = 0; k < K; ++k)
    out.segment(n_u0() + k * n_g(), n_g()) = m.g[k];
  return out;
}

ControlVector ControlLayout::unpack(const Vector& stacked) const {
  if (stacked.size() != stacked_dim())
    throw ContractError("stacked control has wrong dimension");
  ControlVector m;
  m.u0 = Vector::Zero(velocity->dim());
  for (int i = 0; i < n_u0(); ++i) m.u0[free_dofs[i]] = stacked[i];
  m.g.resize(K);
  for (int k = 0; k < K; ++k)
    m.g[k] = stacked.segment(n_u0() + k * n_g(), n_g());
  return m;
}

Vector ControlLayout::scatter_g(const Vector& g) const {
  Vector full = Vector::Zero(velocity->dim());
  for (int i = 0; i < n_g(); ++i) full[control_dofs[i]] = g[i];
  return full;
}

Vector ControlLayout::gather_g(const Vector& full) const {
  Vector g(n_g());
  for (int i = 0; i < n_g(); ++i) g[i] = full[control_dofs[i]];
  return g;
}

void ControlLayout::zero_wall_dofs(Vector& full_velocity) const {
  for (int d : wall_dofs) full_velocity[d] = 0.0;
}

ControlLayout make_control_layout(const Space& velocity,
                                  std::vector<BoundaryTag> dirichlet, int K,
                                  double dt) {
  ControlLayout layout;
  layout.velocity = &velocity;
  layout.dirichlet = std::move(dirichlet);
  layout.K = K;
  layout.dt = dt;
  layout.wall_dofs = velocity.boundary_dofs(BoundaryTag::walls);
  std::set<int> walls(layout.wall_dofs.begin(), layout.wall_dofs.end());
  std::set<int> ctrl;
  for (BoundaryTag tag : layout.dirichlet)
    for (int d : velocity.boundary_dofs(tag))
      if (!walls.count(d)) ctrl.insert(d);
  layout.control_dofs.assign(ctrl.begin(), ctrl.end());
  for (int d = 0; d < velocity.dim(); ++d)
    if (!walls.count(d)) layout.free_dofs.push_back(d);
  return layout;
}

SparseOperator assemble_control_quadratic(const ControlLayout& layout,
                                          double alpha, double gamma,
                                          bool couple_g0_to_u0) {
  const Space& vel = *layout.velocity;
  const int nf = layout.n_u0(), ng = layout.n_g(), K = layout.K;
  const double dt = layout.dt;

  // Position of a full velocity dof inside the free/control index lists.
  std::vector<int> free_pos(vel.dim(), -1), ctrl_pos(vel.dim(), -1);
  for (int i = 0; i < nf; ++i) free_pos[layout.free_dofs[i]] = i;
  for (int i = 0; i < ng; ++i) ctrl_pos[layout.control_dofs[i]] = i;

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> ts;

  // u0 block: gamma * (M + K) restricted to free dofs.
  if (gamma != 0.0) {
    SparseOperator H1 = assemble_mass(vel) + assemble_stiffness(vel, 1.0);
    for (int col = 0; col < H1.outerSize(); ++col)
      for (SparseOperator::InnerIterator it(H1, col); it; ++it) {
        int i = free_pos[it.row()], j = free_pos[it.col()];
        if (i >= 0 && j >= 0) ts.emplace_back(i, j, gamma * it.value());
      }
  }

  if (alpha != 0.0 && ng > 0) {
    // Per-slice boundary H1 energy on control dofs.
    SparseOperator E_full = assemble_boundary_mass(vel, layout.dirichlet) +
                            assemble_boundary_tangent_stiffness(
                                vel, layout.dirichlet);
    std::vector<Triplet> e_ts;
    for (int col = 0; col < E_full.outerSize(); ++col)
      for (SparseOperator::InnerIterator it(E_full, col); it; ++it) {
        int i = ctrl_pos[it.row()], j = ctrl_pos[it.col()];
        if (i >= 0 && j >= 0) e_ts.emplace_back(i, j, it.value());
      }
    SparseOperator E(ng, ng);
    E.setFromTriplets(e_ts.begin(), e_ts.end());

    auto g_offset = [&](int k) { return nf + (k - 1) * ng; };  // k = 1..K

    auto add_block = [&](int row0, int col0, double scale) {
      for (int col = 0; col < E.outerSize(); ++col)
        for (SparseOperator::InnerIterator it(E, col); it; ++it)
          ts.emplace_back(row0 + it.row(), col0 + it.col(),
                          scale * it.value());
    };

    // Value term: sum_k dt * g_k^T E g_k.
    for (int k = 1; k <= K; ++k)
      add_block(g_offset(k), g_offset(k), alpha * dt);

    // Time-derivative term: sum over differences (g_k - g_{k-1})^T E (...)/dt.
    const int k_start = couple_g0_to_u0 ? 1 : 2;
    for (int k = k_start; k <= K; ++k) {
      add_block(g_offset(k), g_offset(k), alpha / dt);
      if (k >= 2) {
        add_block(g_offset(k - 1), g_offset(k - 1), alpha / dt);
        add_block(g_offset(k), g_offset(k - 1), -alpha / dt);
        add_block(g_offset(k - 1), g_offset(k), -alpha / dt);
      } else {
        // g_0 = trace of u0: couple g_1 with the u0 block through E.
        for (int col = 0; col < E.outerSize(); ++col)
          for (SparseOperator::InnerIterator it(E, col); it; ++it) {
            int iu = free_pos[layout.control_dofs[it.row()]];
            int ju = free_pos[layout.control_dofs[it.col()]];
            ts.emplace_back(iu, ju, alpha / dt * it.value());
            ts.emplace_back(g_offset(1) + it.row(), ju,
                            -alpha / dt * it.value());
            ts.emplace_back(iu, g_offset(1) + it.col(),
                            -alpha / dt * it.value());
          }
      }
    }
  }

  SparseOperator A(layout.stacked_dim(), layout.stacked_dim());
  A.setFromTriplets(ts.begin(), ts.end());
  A.prune(0.0, 0.0);
  A.makeCompressed();
  return A;
}

double regularisation_value(const ControlVector& m, const ControlLayout& layout,
                            const RegularisationConfig& cfg) {
  if (cfg.alpha < 0 || cfg.gamma < 0)
    throw ContractError("regularisation weights must be non-negative");
  SparseOperator A = assemble_control_quadratic(layout, cfg.alpha, cfg.gamma,
                                                cfg.couple_g0_to_u0);
  Vector x = layout.pack(m);
  return 0.5 * x.dot(A * x);
}

ControlGradient regularisation_gradient(const ControlVector& m,
                                        const ControlLayout& layout,
                                        const RegularisationConfig& cfg) {
  SparseOperator A = assemble_control_quadratic(layout, cfg.alpha, cfg.gamma,
                                                cfg.couple_g0_to_u0);
  return layout.unpack(A * layout.pack(m));
}

RieszMap::RieszMap(const ControlLayout& layout) : layout_(&layout) {
  matrix_ = assemble_control_quadratic(layout, 1.0, 1.0, true);
  solver_.compute(matrix_);
  if (solver_.info() != Eigen::Success)
    throw SolverError("Riesz operator factorisation failed");
}

Vector RieszMap::apply(const Vector& stacked_dual) const {
  if (stacked_dual.size() != layout_->stacked_dim())
    throw ContractError("Riesz map: dual vector has wrong dimension");
  return solver_.solve(stacked_dual);
}

ControlVector RieszMap::apply(const ControlVector& dual) const {
  return layout_->unpack(apply(layout_->pack(dual)));
}

double RieszMap::inner(const Vector& a, const Vector& b) const {
  return a.dot(matrix_ * b);
}

double RieszMap::norm(const Vector& a) const {
  return std::sqrt(std::max(0.0, inner(a, a)));
}

double RieszMap::dual_norm(const Vector& dual) const {
  return std::sqrt(std::max(0.0, dual.dot(apply(dual))));
}

namespace {

constexpr char kControlMagic[] = "F4DVCTRL1";

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("unexpected end of control checkpoint");
  return v;
}

}  // namespace

void save_control(const Control& m, const ControlLayout& layout,
                  std::uint64_t mesh_hash, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out.write(kControlMagic, sizeof(kControlMagic));
  write_pod(out, mesh_hash);
  write_pod(out, layout.K);
  write_pod(out, layout.dt);
  write_pod(out, static_cast<int>(layout.dirichlet.size()));
  for (BoundaryTag t : layout.dirichlet) write_pod(out, static_cast<int>(t));
  write_pod(out, static_cast<int>(m.u0.size()));
  out.write(reinterpret_cast<const char*>(m.u0.data()),
            sizeof(double) * m.u0.size());
  write_pod(out, layout.n_g());
  for (const Vector& g : m.g)
    out.write(reinterpret_cast<const char*>(g.data()),
              sizeof(double) * g.size());
  if (!out) throw ParseError("write failed for '" + path + "'");
}

Control load_control(const ControlLayout& layout, std::uint64_t mesh_hash,
                     const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open control checkpoint '" + path + "'");
  char magic[sizeof(kControlMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic) != kControlMagic)
    throw ParseError("not a control checkpoint: '" + path + "'");
  auto hash = read_pod<std::uint64_t>(in);
  if (hash != mesh_hash)
    throw ValidationError("control checkpoint mesh hash mismatch");
  int K = read_pod<int>(in);
  double dt = read_pod<double>(in);
  if (K != layout.K || dt != layout.dt)
    throw ValidationError("control checkpoint grid mismatch");
  int ntags = read_pod<int>(in);
  std::vector<BoundaryTag> tags;
  for (int i = 0; i < ntags; ++i)
    tags.push_back(static_cast<BoundaryTag>(read_pod<int>(in)));
  if (tags != layout.dirichlet)
    throw ValidationError("control checkpoint Dirichlet tags mismatch");
  int nu = read_pod<int>(in);
  if (nu != layout.velocity->dim())
    throw ValidationError("control checkpoint dimension mismatch");
  Control m;
  m.u0.resize(nu);
  in.read(reinterpret_cast<char*>(m.u0.data()), sizeof(double) * nu);
  int ng = read_pod<int>(in);
  if (ng != layout.n_g())
    throw ValidationError("control checkpoint boundary dimension mismatch");
  m.g.assign(K, Vector(ng));
  for (int k = 0; k < K; ++k)
    in.read(reinterpret_cast<char*>(m.g[k].data()), sizeof(double) * ng);
  if (!in) throw ParseError("unexpected end of control checkpoint");
  return m;
}

}  // namespace flow4dvar
