#include "flow4dvar/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

double Vec2::norm() const { return std::hypot(x, y); }

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::inlet: return "inlet";
    case BoundaryTag::out1: return "out1";
    case BoundaryTag::out2: return "out2";
    case BoundaryTag::walls: return "walls";
  }
  return "?";
}

const char* to_string(Region region) {
  switch (region) {
    case Region::interior: return "interior";
    case Region::ane: return "ane";
    case Region::obs: return "obs";
    case Region::ext: return "ext";
  }
  return "?";
}

BoundaryTag parse_boundary_tag(const std::string& s) {
  if (s == "inlet") return BoundaryTag::inlet;
  if (s == "out1") return BoundaryTag::out1;
  if (s == "out2") return BoundaryTag::out2;
  if (s == "walls") return BoundaryTag::walls;
  throw ParseError("unknown boundary tag '" + s + "'");
}

Region parse_region(const std::string& s) {
  if (s == "ane") return Region::ane;
  if (s == "obs") return Region::obs;
  if (s == "ext") return Region::ext;
  throw ParseError("unknown region tag '" + s + "'");
}

double Mesh::cell_area(int c) const {
  const auto& t = cells[c];
  const Vec2& a = vertices[t[0]];
  const Vec2& b = vertices[t[1]];
  const Vec2& d = vertices[t[2]];
  return 0.5 * cross(b - a, d - a);
}

double Mesh::cell_diameter(int c) const {
  const auto& t = cells[c];
  double d01 = (vertices[t[1]] - vertices[t[0]]).norm();
  double d12 = (vertices[t[2]] - vertices[t[1]]).norm();
  double d20 = (vertices[t[0]] - vertices[t[2]]).norm();
  return std::max({d01, d12, d20});
}

Vec2 Mesh::cell_centroid(int c) const {
  const auto& t = cells[c];
  return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) * (1.0 / 3.0);
}

bool Mesh::cell_in(int c, Region r) const {
  Region cr = cell_regions[c];
  if (r == Region::obs) return cr == Region::obs || cr == Region::ane;
  return cr == r;
}

std::vector<int> Mesh::cells_in(Region r) const {
  std::vector<int> result;
  for (int c = 0; c < num_cells(); ++c)
    if (cell_in(c, r)) result.push_back(c);
  return result;
}

std::vector<int> Mesh::facets_with(BoundaryTag tag) const {
  std::vector<int> result;
  for (int f = 0; f < static_cast<int>(boundary_facets.size()); ++f)
    if (boundary_facets[f].tag == tag) result.push_back(f);
  return result;
}

std::vector<int> Mesh::aneurysm_wall_facets() const {
  std::vector<int> result;
  for (int f = 0; f < static_cast<int>(boundary_facets.size()); ++f) {
    const auto& bf = boundary_facets[f];
    if (bf.tag == BoundaryTag::walls && cell_regions[bf.cell] == Region::ane)
      result.push_back(f);
  }
  return result;
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_bytes(std::uint64_t& h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

template <typename T>
void fnv_pod(std::uint64_t& h, const T& value) {
  fnv_bytes(h, &value, sizeof(T));
}

}  // namespace

std::uint64_t Mesh::content_hash() const {
  std::uint64_t h = kFnvOffset;
  const char magic[] = "flow4dvar-mesh v1";
  fnv_bytes(h, magic, sizeof(magic));
  fnv_pod(h, num_vertices());
  for (const Vec2& v : vertices) {
    fnv_pod(h, v.x);
    fnv_pod(h, v.y);
  }
  fnv_pod(h, num_cells());
  for (const auto& c : cells) fnv_bytes(h, c.data(), sizeof(int) * 3);
  fnv_pod(h, static_cast<int>(boundary_facets.size()));
  for (const auto& f : boundary_facets) {
    fnv_pod(h, f.a);
    fnv_pod(h, f.b);
    fnv_pod(h, f.cell);
    fnv_pod(h, static_cast<int>(f.tag));
  }
  for (Region r : cell_regions) fnv_pod(h, static_cast<int>(r));
  return h;
}

std::string Mesh::content_hash_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(content_hash()));
  return buf;
}

namespace {

// Canonical undirected edge key.
std::pair<int, int> edge_key(int a, int b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

struct EdgeInfo {
  int count = 0;
  int cell = -1;
};

std::map<std::pair<int, int>, EdgeInfo> collect_edges(const Mesh& mesh) {
  std::map<std::pair<int, int>, EdgeInfo> edges;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& t = mesh.cells[c];
    for (int e = 0; e < 3; ++e) {
      auto& info = edges[edge_key(t[e], t[(e + 1) % 3])];
      info.count += 1;
      if (info.count == 1) info.cell = c;
    }
  }
  return edges;
}

}  // namespace

void Mesh::validate() const {
  if (cell_regions.size() != cells.size())
    throw ValidationError("cell_regions size does not match cell count");
  const int nv = num_vertices();
  for (int c = 0; c < num_cells(); ++c) {
    for (int k : cells[c])
      if (k < 0 || k >= nv)
        throw ValidationError("cell " + std::to_string(c) +
                              " references vertex " + std::to_string(k));
    if (cell_area(c) <= 0.0)
      throw ValidationError("cell " + std::to_string(c) +
                            " is not counter-clockwise (area <= 0)");
  }

  auto edges = collect_edges(*this);
  std::map<std::pair<int, int>, int> tagged;
  for (int f = 0; f < static_cast<int>(boundary_facets.size()); ++f) {
    const auto& bf = boundary_facets[f];
    auto key = edge_key(bf.a, bf.b);
    auto it = edges.find(key);
    if (it == edges.end() || it->second.count != 1)
      throw ValidationError("boundary facet (" + std::to_string(bf.a) + "," +
                            std::to_string(bf.b) + ") is not a boundary edge");
    if (bf.cell != it->second.cell)
      throw ValidationError("boundary facet (" + std::to_string(bf.a) + "," +
                            std::to_string(bf.b) + ") has wrong owning cell");
    if (tagged.count(key))
      throw ValidationError("boundary edge (" + std::to_string(bf.a) + "," +
                            std::to_string(bf.b) + ") tagged twice");
    tagged[key] = f;
  }
  for (const auto& [key, info] : edges) {
    if (info.count == 1 && !tagged.count(key))
      throw ValidationError("boundary edge (" + std::to_string(key.first) +
                            "," + std::to_string(key.second) +
                            ") carries no tag");
    if (info.count > 2)
      throw ValidationError("edge (" + std::to_string(key.first) + "," +
                            std::to_string(key.second) +
                            ") shared by more than two cells");
  }
}

FacetGeometry facet_geometry(const Mesh& mesh, int facet_index) {
  if (facet_index < 0 ||
      facet_index >= static_cast<int>(mesh.boundary_facets.size()))
    throw ContractError("facet index out of bounds");
  const auto& bf = mesh.boundary_facets[facet_index];
  const Vec2& pa = mesh.vertices[bf.a];
  const Vec2& pb = mesh.vertices[bf.b];
  Vec2 tangent = pb - pa;
  double length = tangent.norm();
  Vec2 normal{tangent.y / length, -tangent.x / length};
  // Orient outward: away from the opposite vertex of the owning cell.
  const auto& t = mesh.cells[bf.cell];
  int opposite = -1;
  for (int k : t)
    if (k != bf.a && k != bf.b) opposite = k;
  Vec2 to_inside = mesh.vertices[opposite] - pa;
  if (normal.dot(to_inside) > 0.0) normal = normal * -1.0;
  return FacetGeometry{normal, length, mesh.cell_diameter(bf.cell)};
}

void derive_boundary_facets(
    Mesh& mesh,
    const std::function<BoundaryTag(const Vec2&, const Vec2&)>& classify) {
  auto edges = collect_edges(mesh);
  mesh.boundary_facets.clear();
  // Deterministic order: sorted by canonical edge key (map iteration).
  for (const auto& [key, info] : edges) {
    if (info.count != 1) continue;
    BoundaryFacet bf;
    bf.a = key.first;
    bf.b = key.second;
    bf.cell = info.cell;
    bf.tag = classify(mesh.vertices[bf.a], mesh.vertices[bf.b]);
    mesh.boundary_facets.push_back(bf);
  }
}

// ---------------------------------------------------------------------------
// Text format I/O
// ---------------------------------------------------------------------------

namespace {

struct LineReader {
  std::istream& in;
  int line_no = 0;

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      // Strip comments and whitespace-only lines.
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("mesh parse error at line " + std::to_string(line_no) +
                     ": " + what);
  }
};

}  // namespace

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file '" + path + "'");
  LineReader reader{in};
  std::string line;

  if (!reader.next(line)) reader.fail("empty file");
  if (line != "flow4dvar-mesh v1") reader.fail("bad magic line");

  Mesh mesh;
  auto read_section = [&](const char* name) -> int {
    if (!reader.next(line)) reader.fail(std::string("expected section ") + name);
    std::istringstream ss(line);
    std::string word;
    int count = -1;
    ss >> word >> count;
    if (word != name || count < 0)
      reader.fail(std::string("expected section '") + name + " <count>'");
    return count;
  };

  int nv = read_section("vertices");
  mesh.vertices.reserve(nv);
  for (int i = 0; i < nv; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of vertex list");
    std::istringstream ss(line);
    Vec2 v;
    if (!(ss >> v.x >> v.y)) reader.fail("bad vertex line");
    mesh.vertices.push_back(v);
  }

  int nc = read_section("cells");
  mesh.cells.reserve(nc);
  for (int i = 0; i < nc; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of cell list");
    std::istringstream ss(line);
    std::array<int, 3> t{};
    if (!(ss >> t[0] >> t[1] >> t[2])) reader.fail("bad cell line");
    mesh.cells.push_back(t);
  }
  mesh.cell_regions.assign(nc, Region::interior);

  int nb = read_section("boundary");
  auto edges = collect_edges(mesh);
  mesh.boundary_facets.reserve(nb);
  for (int i = 0; i < nb; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of boundary list");
    std::istringstream ss(line);
    int a, b;
    std::string tag;
    if (!(ss >> a >> b >> tag)) reader.fail("bad boundary line");
    BoundaryFacet bf;
    bf.a = a;
    bf.b = b;
    auto it = edges.find(edge_key(a, b));
    if (it == edges.end() || it->second.count != 1)
      reader.fail("edge (" + std::to_string(a) + "," + std::to_string(b) +
                  ") is not a boundary edge");
    bf.cell = it->second.cell;
    try {
      bf.tag = parse_boundary_tag(tag);
    } catch (const ParseError& e) {
      reader.fail(e.what());
    }
    mesh.boundary_facets.push_back(bf);
  }

  int nr = read_section("regions");
  for (int i = 0; i < nr; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of region list");
    std::istringstream ss(line);
    int cell;
    std::string tag;
    if (!(ss >> cell >> tag)) reader.fail("bad region line");
    if (cell < 0 || cell >= nc) reader.fail("region cell index out of range");
    try {
      mesh.cell_regions[cell] = parse_region(tag);
    } catch (const ParseError& e) {
      reader.fail(e.what());
    }
  }

  mesh.validate();
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  char buf[96];
  out << "flow4dvar-mesh v1\n";
  out << "vertices " << mesh.num_vertices() << "\n";
  for (const Vec2& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", v.x, v.y);
    out << buf;
  }
  out << "cells " << mesh.num_cells() << "\n";
  for (const auto& t : mesh.cells)
    out << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "boundary " << mesh.boundary_facets.size() << "\n";
  for (const auto& f : mesh.boundary_facets)
    out << f.a << " " << f.b << " " << to_string(f.tag) << "\n";
  std::vector<std::pair<int, Region>> regions;
  for (int c = 0; c < mesh.num_cells(); ++c)
    if (mesh.cell_regions[c] != Region::interior)
      regions.emplace_back(c, mesh.cell_regions[c]);
  out << "regions " << regions.size() << "\n";
  for (const auto& [c, r] : regions) out << c << " " << to_string(r) << "\n";
  if (!out) throw ParseError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Bifurcation generator
// ---------------------------------------------------------------------------

namespace {

// Subdivides [lo, hi] into ~ (hi-lo)/h equal intervals, at least one.
std::vector<double> linspace_by_h(double lo, double hi, double h) {
  int n = std::max(1, static_cast<int>(std::lround((hi - lo) / h)));
  std::vector<double> xs(n + 1);
  for (int i = 0; i <= n; ++i) xs[i] = lo + (hi - lo) * i / n;
  xs.front() = lo;
  xs.back() = hi;
  return xs;
}

struct GridBuilder {
  Mesh mesh;
  // (column-key, row-key) -> vertex index; keys are grid indices so lookups
  // never touch floating point.
  std::map<std::pair<int, int>, int> node_index;

  int node(int i, int j, double x, double y) {
    auto it = node_index.find({i, j});
    if (it != node_index.end()) return it->second;
    int idx = mesh.num_vertices();
    mesh.vertices.push_back({x, y});
    node_index[{i, j}] = idx;
    return idx;
  }

  void add_cell(int a, int b, int c, Region region) {
    std::array<int, 3> t{a, b, c};
    Vec2 ab = mesh.vertices[b] - mesh.vertices[a];
    Vec2 ac = mesh.vertices[c] - mesh.vertices[a];
    if (cross(ab, ac) < 0.0) std::swap(t[1], t[2]);
    mesh.cells.push_back(t);
    mesh.cell_regions.push_back(region);
  }

  void add_quad(int n00, int n10, int n11, int n01, Region region) {
    add_cell(n00, n10, n11, region);
    add_cell(n00, n11, n01, region);
  }
};

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double t = (p - a).dot(ab) / ab.dot(ab);
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

}  // namespace

Mesh generate_bifurcation(const BifurcationParams& p) {
  if (p.inlet_width <= 0 || p.branch_width <= 0 || p.inlet_length <= 0 ||
      p.branch_length <= 0 || p.aneurysm_radius <= 0 || p.edge_length <= 0 ||
      p.aneurysm_neck <= 0)
    throw GeometryError("bifurcation parameters must be positive");
  if (p.edge_length >= std::min(p.inlet_width, p.branch_width))
    throw GeometryError("edge length must be smaller than the channel widths");
  if (p.aneurysm_neck >= p.aneurysm_radius)
    throw GeometryError("aneurysm neck must be narrower than the radius");

  const double h = p.edge_length;
  const double xw = p.inlet_length + p.branch_width;  // wall carrying the sac
  const double y_in = p.inlet_width / 2.0;
  const double y_top = y_in + p.branch_length;

  // Global tensor grid covering the T-shaped vessel union.
  std::vector<double> xs = linspace_by_h(0.0, p.inlet_length, h);
  {
    auto xs2 = linspace_by_h(p.inlet_length, xw, h);
    xs.insert(xs.end(), xs2.begin() + 1, xs2.end());
  }
  const int col_junction =
      static_cast<int>(linspace_by_h(0.0, p.inlet_length, h).size()) - 1;

  std::vector<double> ys = linspace_by_h(-y_top, -y_in, h);
  const int row_in_lo = static_cast<int>(ys.size()) - 1;
  {
    auto ys2 = linspace_by_h(-y_in, y_in, h);
    ys.insert(ys.end(), ys2.begin() + 1, ys2.end());
  }
  const int row_in_hi = static_cast<int>(ys.size()) - 1;
  {
    auto ys2 = linspace_by_h(y_in, y_top, h);
    ys.insert(ys.end(), ys2.begin() + 1, ys2.end());
  }
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;

  GridBuilder gb;
  auto in_domain = [&](int ci, int cj) {
    if (ci >= col_junction) return true;              // vertical channel
    return cj >= row_in_lo && cj < row_in_hi;         // inlet channel band
  };

  // Base channels; row-major over cells keeps vertex emission deterministic.
  for (int cj = 0; cj < ny; ++cj) {
    for (int ci = 0; ci < nx; ++ci) {
      if (!in_domain(ci, cj)) continue;
      int n00 = gb.node(ci, cj, xs[ci], ys[cj]);
      int n10 = gb.node(ci + 1, cj, xs[ci + 1], ys[cj]);
      int n11 = gb.node(ci + 1, cj + 1, xs[ci + 1], ys[cj + 1]);
      int n01 = gb.node(ci, cj + 1, xs[ci], ys[cj + 1]);
      gb.add_quad(n00, n10, n11, n01, Region::obs);
    }
  }

  // Aneurysm sac: circular segment attached to the wall x = xw, neck snapped
  // to grid rows so the chord nodes are shared with the channel wall.
  {
    int jb0 = row_in_lo, jb1 = row_in_hi;
    double best0 = 1e30, best1 = 1e30;
    for (int j = 0; j <= ny; ++j) {
      if (std::abs(ys[j] + p.aneurysm_neck) < best0) {
        best0 = std::abs(ys[j] + p.aneurysm_neck);
        jb0 = j;
      }
      if (std::abs(ys[j] - p.aneurysm_neck) < best1) {
        best1 = std::abs(ys[j] - p.aneurysm_neck);
        jb1 = j;
      }
    }
    if (jb1 - jb0 < 2)
      throw GeometryError("aneurysm neck unresolved by the target edge length");
    const double neck = ys[jb1];  // snapped half-width (grid symmetric)
    const double r = p.aneurysm_radius;
    if (neck >= r)
      throw GeometryError("snapped aneurysm neck exceeds the radius");
    const double cx = std::sqrt(r * r - neck * neck);
    const double alpha = std::atan2(neck, -cx);  // in (pi/2, pi)
    const int ns = jb1 - jb0;
    const int nt = std::max(2, static_cast<int>(std::lround((cx + r) / h)));

    const int ncols = nx;  // grid column count; sac nodes use fresh keys
    auto sac_node = [&](int i, int j) -> int {
      if (j == 0) return gb.node(ncols, jb0 + i, xw, ys[jb0 + i]);
      if (i == 0) return gb.node(ncols, jb0, xw, ys[jb0]);
      if (i == ns) return gb.node(ncols, jb1, xw, ys[jb1]);
      double s = static_cast<double>(i) / ns;
      double t = static_cast<double>(j) / nt;
      double theta = -alpha + 2.0 * alpha * s;
      Vec2 chord{xw, ys[jb0 + i]};
      Vec2 arc{xw + cx + r * std::cos(theta), r * std::sin(theta)};
      Vec2 q = chord * (1.0 - t) + arc * t;
      return gb.node(ncols + 1 + i, 1000 + j, q.x, q.y);
    };

    for (int j = 0; j < nt; ++j) {
      for (int i = 0; i < ns; ++i) {
        int n00 = sac_node(i, j);
        int n10 = sac_node(i + 1, j);
        int n11 = sac_node(i + 1, j + 1);
        int n01 = sac_node(i, j + 1);
        if (n00 == n01)
          gb.add_cell(n00, n10, n11, Region::ane);
        else if (n10 == n11)
          gb.add_cell(n00, n10, n01, Region::ane);
        else
          gb.add_quad(n00, n10, n11, n01, Region::ane);
      }
    }
  }

  double x_min = 0.0, y_max = y_top, y_min = -y_top;

  if (p.with_extension) {
    // Inlet extension to the left, branch extensions beyond the outlets.
    const double ext_in = p.extension_factor * p.inlet_width;
    const double ext_br = p.extension_factor * p.branch_width;
    x_min = -ext_in;
    y_max = y_top + ext_br;
    y_min = -y_max;

    auto xs_ext = linspace_by_h(-ext_in, 0.0, h);
    int ne = static_cast<int>(xs_ext.size()) - 1;
    for (int cj = row_in_lo; cj < row_in_hi; ++cj) {
      for (int ci = 0; ci < ne; ++ci) {
        int n00 = gb.node(ci - ne, cj, xs_ext[ci], ys[cj]);
        int n10 = gb.node(ci - ne + 1, cj, xs_ext[ci + 1], ys[cj]);
        int n11 = gb.node(ci - ne + 1, cj + 1, xs_ext[ci + 1], ys[cj + 1]);
        int n01 = gb.node(ci - ne, cj + 1, xs_ext[ci], ys[cj + 1]);
        gb.add_quad(n00, n10, n11, n01, Region::ext);
      }
    }

    auto ys_ext = linspace_by_h(y_top, y_max, h);
    int me = static_cast<int>(ys_ext.size()) - 1;
    for (int cj = 0; cj < me; ++cj) {
      for (int ci = col_junction; ci < nx; ++ci) {
        int n00 = gb.node(ci, ny + cj, xs[ci], ys_ext[cj]);
        int n10 = gb.node(ci + 1, ny + cj, xs[ci + 1], ys_ext[cj]);
        int n11 = gb.node(ci + 1, ny + cj + 1, xs[ci + 1], ys_ext[cj + 1]);
        int n01 = gb.node(ci, ny + cj + 1, xs[ci], ys_ext[cj + 1]);
        gb.add_quad(n00, n10, n11, n01, Region::ext);
      }
    }
    auto bottom_row_key = [](int cj) { return cj == 0 ? 0 : -cj; };
    for (int cj = 0; cj < me; ++cj) {
      for (int ci = col_junction; ci < nx; ++ci) {
        int n00 = gb.node(ci, bottom_row_key(cj), xs[ci], -ys_ext[cj]);
        int n10 = gb.node(ci + 1, bottom_row_key(cj), xs[ci + 1], -ys_ext[cj]);
        int n11 =
            gb.node(ci + 1, bottom_row_key(cj + 1), xs[ci + 1], -ys_ext[cj + 1]);
        int n01 = gb.node(ci, bottom_row_key(cj + 1), xs[ci], -ys_ext[cj + 1]);
        gb.add_quad(n00, n10, n11, n01, Region::ext);
      }
    }
  }

  Mesh mesh = std::move(gb.mesh);

  const double tol = 1e-9;
  derive_boundary_facets(mesh, [&](const Vec2& a, const Vec2& b) {
    if (std::abs(a.x - x_min) < tol && std::abs(b.x - x_min) < tol)
      return BoundaryTag::inlet;
    if (std::abs(a.y - y_max) < tol && std::abs(b.y - y_max) < tol)
      return BoundaryTag::out1;
    if (std::abs(a.y - y_min) < tol && std::abs(b.y - y_min) < tol)
      return BoundaryTag::out2;
    return BoundaryTag::walls;
  });

  if (p.obs_wall_margin > 0.0) {
    std::vector<std::pair<Vec2, Vec2>> wall_segments;
    for (const auto& bf : mesh.boundary_facets)
      if (bf.tag == BoundaryTag::walls)
        wall_segments.emplace_back(mesh.vertices[bf.a], mesh.vertices[bf.b]);
    for (int c = 0; c < mesh.num_cells(); ++c) {
      if (mesh.cell_regions[c] != Region::obs) continue;
      Vec2 ctr = mesh.cell_centroid(c);
      for (const auto& [sa, sb] : wall_segments) {
        if (segment_distance(ctr, sa, sb) < p.obs_wall_margin) {
          mesh.cell_regions[c] = Region::interior;
          break;
        }
      }
    }
  }

  mesh.validate();
  return mesh;
}

}  // namespace flow4dvar
