#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace flow4dvar {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const;
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Cross product z-component; positive for a CCW turn a -> b.
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

enum class BoundaryTag : int { inlet = 0, out1 = 1, out2 = 2, walls = 3 };
enum class Region : int { interior = 0, ane = 1, obs = 2, ext = 3 };

const char* to_string(BoundaryTag tag);
const char* to_string(Region region);
BoundaryTag parse_boundary_tag(const std::string& s);
Region parse_region(const std::string& s);

struct BoundaryFacet {
  int a = -1;       // vertex indices of the edge
  int b = -1;
  int cell = -1;    // owning cell
  BoundaryTag tag = BoundaryTag::walls;
};

struct FacetGeometry {
  Vec2 normal;      // outward unit normal
  double length = 0.0;
  double h = 0.0;   // diameter of the owning cell
};

// 2D triangle mesh with tagged boundary and cell regions. Immutable once
// built; construction goes through load_mesh / generate_bifurcation or the
// test helpers, all of which leave the invariants established by validate().
struct Mesh {
  std::vector<Vec2> vertices;                 // mm
  std::vector<std::array<int, 3>> cells;      // CCW vertex triples
  std::vector<BoundaryFacet> boundary_facets;
  std::vector<Region> cell_regions;           // one entry per cell

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_cells() const { return static_cast<int>(cells.size()); }

  double cell_area(int c) const;
  double cell_diameter(int c) const;  // longest edge
  Vec2 cell_centroid(int c) const;

  // Region membership; Region::obs includes the aneurysm cells.
  bool cell_in(int c, Region r) const;
  std::vector<int> cells_in(Region r) const;

  std::vector<int> facets_with(BoundaryTag tag) const;
  // Wall facets whose owning cell lies in the aneurysm region.
  std::vector<int> aneurysm_wall_facets() const;

  // Deterministic content hash used by the checkpoint/observation headers.
  std::uint64_t content_hash() const;
  std::string content_hash_hex() const;

  // Checks all Mesh invariants; throws ValidationError on the first breach.
  void validate() const;
};

FacetGeometry facet_geometry(const Mesh& mesh, int facet_index);

// Rebuilds boundary_facets from the cell connectivity: every edge with
// exactly one owning cell, tagged by the classifier. Used by the generator
// and test helpers.
void derive_boundary_facets(
    Mesh& mesh,
    const std::function<BoundaryTag(const Vec2&, const Vec2&)>& classify);

struct BifurcationParams {
  double inlet_width = 4.0;     // mm
  double branch_width = 3.0;    // mm
  double inlet_length = 14.0;   // mm
  double branch_length = 14.0;  // mm
  double aneurysm_radius = 3.0; // mm
  double aneurysm_neck = 2.2;   // neck half-width, mm
  double edge_length = 0.2;     // target h, mm
  bool with_extension = false;
  double extension_factor = 5.0; // extension length in channel widths
  double obs_wall_margin = 0.0;  // cells closer to a wall are dropped from obs
};

// Symmetric bifurcation (perpendicular branches) with a circular aneurysm
// bulge on the wall facing the inlet. With with_extension the vessels are
// prolonged past the reconstruction boundaries; the base mesh is a strict
// prefix (vertices and cells) of the extended one.
Mesh generate_bifurcation(const BifurcationParams& params);

Mesh load_mesh(const std::string& path);
void save_mesh(const Mesh& mesh, const std::string& path);

}  // namespace flow4dvar
