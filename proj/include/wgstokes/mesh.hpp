#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace wgstokes {

template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

/// A facet (edge in 2D, triangle in 3D) and the elements on either side.
///
/// Local facet i of an element is the one opposite its local vertex i. The
/// neighbor fields are -1 for facets on the domain boundary.
template <int Dim>
struct Facet {
  std::array<int, Dim> vertices{};
  int owner = -1;
  int owner_local = -1;
  int neighbor = -1;
  int neighbor_local = -1;

  bool on_boundary() const noexcept { return neighbor < 0; }
};

/// Conforming simplicial mesh with the geometric data the WG operators use.
///
/// Immutable once built. Facets are numbered in order of first appearance
/// while walking elements and their local facets, so numbering is a pure
/// function of the element list.
template <int Dim>
class Mesh {
  static_assert(Dim == 2 || Dim == 3, "only 2D and 3D meshes are supported");

public:
  static constexpr int dim = Dim;
  static constexpr int nverts_per_element = Dim + 1;
  using point_type = Point<Dim>;
  using element_type = std::array<int, Dim + 1>;

  Mesh(std::vector<point_type> vertices, std::vector<element_type> elements)
      : vertices_(std::move(vertices)), elements_(std::move(elements)) {
    if (elements_.empty()) {
      throw std::invalid_argument("mesh has no elements");
    }
    for (const auto& el : elements_) {
      for (int v : el) {
        if (v < 0 || static_cast<std::size_t>(v) >= vertices_.size()) {
          throw std::invalid_argument("element references a missing vertex");
        }
      }
    }
    build_facets();
    build_geometry();
  }

  int num_elements() const noexcept { return static_cast<int>(elements_.size()); }
  int num_vertices() const noexcept { return static_cast<int>(vertices_.size()); }
  int num_facets() const noexcept { return static_cast<int>(facets_.size()); }
  int num_boundary_facets() const noexcept { return num_boundary_facets_; }
  int num_interior_facets() const noexcept { return num_facets() - num_boundary_facets_; }

  const std::vector<point_type>& vertices() const noexcept { return vertices_; }
  const std::vector<element_type>& elements() const noexcept { return elements_; }
  const std::vector<Facet<Dim>>& facets() const noexcept { return facets_; }

  const point_type& vertex(int v) const { return vertices_[v]; }
  const element_type& element(int k) const { return elements_[k]; }
  const Facet<Dim>& facet(int f) const { return facets_[f]; }

  /// Global facet index of local facet i of element k.
  int element_facet(int k, int i) const { return element_facets_[k][i]; }

  double element_measure(int k) const { return element_measures_[k]; }
  double facet_measure(int f) const { return facet_measures_[f]; }
  const point_type& element_centroid(int k) const { return centroids_[k]; }
  const point_type& facet_midpoint(int f) const { return midpoints_[f]; }

  /// Unit normal of facet f, pointing out of its owner element.
  const point_type& facet_normal(int f) const { return normals_[f]; }

  /// Unit normal of local facet i pointing out of element k.
  point_type outward_normal(int k, int i) const {
    const int f = element_facets_[k][i];
    return facets_[f].owner == k ? normals_[f] : point_type(-normals_[f]);
  }

  /// Measure of local facet i of element k.
  double local_facet_measure(int k, int i) const {
    return facet_measures_[element_facets_[k][i]];
  }

  bool local_facet_on_boundary(int k, int i) const {
    return facets_[element_facets_[k][i]].on_boundary();
  }

  /// Vertices of local facet i of element k (all vertices except vertex i).
  std::array<point_type, Dim> local_facet_vertices(int k, int i) const {
    std::array<point_type, Dim> out;
    int j = 0;
    for (int v = 0; v <= Dim; ++v) {
      if (v != i) {
        out[j++] = vertices_[elements_[k][v]];
      }
    }
    return out;
  }

  std::array<point_type, Dim> facet_vertex_points(int f) const {
    std::array<point_type, Dim> out;
    for (int j = 0; j < Dim; ++j) {
      out[j] = vertices_[facets_[f].vertices[j]];
    }
    return out;
  }

  std::array<point_type, Dim + 1> element_vertex_points(int k) const {
    std::array<point_type, Dim + 1> out;
    for (int j = 0; j <= Dim; ++j) {
      out[j] = vertices_[elements_[k][j]];
    }
    return out;
  }

  /// Maximum element diameter.
  double h() const noexcept { return h_; }

  /// |Omega| as the sum of element measures.
  double domain_measure() const noexcept { return domain_measure_; }

private:
  void build_facets() {
    using key_type = std::array<int, Dim>;
    std::map<key_type, int> lookup;
    element_facets_.resize(elements_.size());
    for (int k = 0; k < num_elements(); ++k) {
      for (int i = 0; i <= Dim; ++i) {
        key_type key{};
        int j = 0;
        for (int v = 0; v <= Dim; ++v) {
          if (v != i) {
            key[j++] = elements_[k][v];
          }
        }
        std::sort(key.begin(), key.end());
        auto [it, inserted] = lookup.try_emplace(key, num_facets());
        if (inserted) {
          Facet<Dim> f;
          f.vertices = key;
          f.owner = k;
          f.owner_local = i;
          facets_.push_back(f);
        } else {
          auto& f = facets_[it->second];
          if (f.neighbor >= 0) {
            throw std::invalid_argument("non-manifold mesh: facet shared by more than two elements");
          }
          f.neighbor = k;
          f.neighbor_local = i;
        }
        element_facets_[k][i] = it->second;
      }
    }
    num_boundary_facets_ = static_cast<int>(
        std::count_if(facets_.begin(), facets_.end(), [](const auto& f) { return f.on_boundary(); }));
  }

  void build_geometry() {
    const int n = num_elements();
    element_measures_.resize(n);
    centroids_.resize(n);
    h_ = 0.0;
    domain_measure_ = 0.0;
    for (int k = 0; k < n; ++k) {
      const auto pts = element_vertex_points(k);
      Eigen::Matrix<double, Dim, Dim> jac;
      for (int j = 0; j < Dim; ++j) {
        jac.col(j) = pts[j + 1] - pts[0];
      }
      const double factorial = Dim == 2 ? 2.0 : 6.0;
      element_measures_[k] = std::abs(jac.determinant()) / factorial;
      if (!(element_measures_[k] > 0.0)) {
        throw std::invalid_argument("degenerate element " + std::to_string(k));
      }
      domain_measure_ += element_measures_[k];
      point_type c = point_type::Zero();
      for (const auto& p : pts) {
        c += p;
      }
      centroids_[k] = c / static_cast<double>(Dim + 1);
      for (int a = 0; a <= Dim; ++a) {
        for (int b = a + 1; b <= Dim; ++b) {
          h_ = std::max(h_, (pts[a] - pts[b]).norm());
        }
      }
    }

    const int nf = num_facets();
    facet_measures_.resize(nf);
    midpoints_.resize(nf);
    normals_.resize(nf);
    for (int f = 0; f < nf; ++f) {
      const auto pts = facet_vertex_points(f);
      point_type mid = point_type::Zero();
      for (const auto& p : pts) {
        mid += p;
      }
      mid /= static_cast<double>(Dim);
      point_type nrm;
      double measure = 0.0;
      if constexpr (Dim == 2) {
        const point_type t = pts[1] - pts[0];
        measure = t.norm();
        nrm = point_type(t.y(), -t.x()) / measure;
      } else {
        const point_type c = (pts[1] - pts[0]).cross(pts[2] - pts[0]);
        measure = 0.5 * c.norm();
        nrm = c.normalized();
      }
      if (!(measure > 0.0)) {
        throw std::invalid_argument("degenerate facet " + std::to_string(f));
      }
      if ((mid - centroids_[facets_[f].owner]).dot(nrm) < 0.0) {
        nrm = -nrm;
      }
      facet_measures_[f] = measure;
      midpoints_[f] = mid;
      normals_[f] = nrm;
    }
  }

  std::vector<point_type> vertices_;
  std::vector<element_type> elements_;
  std::vector<Facet<Dim>> facets_;
  std::vector<std::array<int, Dim + 1>> element_facets_;
  std::vector<double> element_measures_;
  std::vector<point_type> centroids_;
  std::vector<double> facet_measures_;
  std::vector<point_type> midpoints_;
  std::vector<point_type> normals_;
  int num_boundary_facets_ = 0;
  double h_ = 0.0;
  double domain_measure_ = 0.0;
};

/// Structured mesh of the unit square (2 triangles per cell) or unit cube
/// (6 tetrahedra per cell, Kuhn split along the main diagonal).
template <int Dim>
Mesh<Dim> generate_structured(int n) {
  if (n < 1) {
    throw std::invalid_argument("generate_structured: n must be >= 1");
  }
  using P = Point<Dim>;
  const double inv = 1.0 / n;
  std::vector<P> verts;
  std::vector<std::array<int, Dim + 1>> elems;
  if constexpr (Dim == 2) {
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        verts.emplace_back(i * inv, j * inv);
      }
    }
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
        elems.push_back({v00, v10, v11});
        elems.push_back({v00, v11, v01});
      }
    }
  } else {
    auto id = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
    for (int k = 0; k <= n; ++k) {
      for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
          verts.emplace_back(i * inv, j * inv, k * inv);
        }
      }
    }
    static constexpr std::array<std::array<int, 3>, 6> perms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          for (const auto& perm : perms) {
            std::array<int, 3> c{i, j, k};
            std::array<int, 4> tet{};
            tet[0] = id(c[0], c[1], c[2]);
            for (int s = 0; s < 3; ++s) {
              ++c[perm[s]];
              tet[s + 1] = id(c[0], c[1], c[2]);
            }
            elems.push_back(tet);
          }
        }
      }
    }
  }
  return Mesh<Dim>(std::move(verts), std::move(elems));
}

/// Quasi-uniformity summary. The measures are the extreme eigenvalues of
/// the (diagonal) pressure mass matrix.
struct MeshStats {
  double h = 0.0;
  int num_elements = 0;
  double min_measure = 0.0;
  double max_measure = 0.0;
  double uniformity_ratio = 0.0;
};

template <int Dim>
MeshStats mesh_stats(const Mesh<Dim>& mesh) {
  MeshStats s;
  s.h = mesh.h();
  s.num_elements = mesh.num_elements();
  s.min_measure = std::numeric_limits<double>::infinity();
  s.max_measure = 0.0;
  for (int k = 0; k < mesh.num_elements(); ++k) {
    s.min_measure = std::min(s.min_measure, mesh.element_measure(k));
    s.max_measure = std::max(s.max_measure, mesh.element_measure(k));
  }
  s.uniformity_ratio = s.min_measure / s.max_measure;
  return s;
}

/// Largest violations of the geometric mesh invariants.
struct MeshDiagnostics {
  double max_normal_closure = 0.0;    // max_K |sum_i |e_i| n_i|
  double max_normal_length_error = 0.0;
  double max_antiparallel_error = 0.0; // interior facets: |n_K + n_K'|
  double max_adjacency_error = 0.0;    // neighbor-of-neighbor mismatches (count)
  double total_measure = 0.0;
  double min_element_measure = 0.0;
  double min_facet_measure = 0.0;
};

template <int Dim>
MeshDiagnostics diagnose(const Mesh<Dim>& mesh) {
  MeshDiagnostics d;
  d.min_element_measure = std::numeric_limits<double>::infinity();
  d.min_facet_measure = std::numeric_limits<double>::infinity();
  for (int k = 0; k < mesh.num_elements(); ++k) {
    Point<Dim> closure = Point<Dim>::Zero();
    for (int i = 0; i <= Dim; ++i) {
      const auto n = mesh.outward_normal(k, i);
      closure += mesh.local_facet_measure(k, i) * n;
      d.max_normal_length_error = std::max(d.max_normal_length_error, std::abs(n.norm() - 1.0));
      const auto& f = mesh.facet(mesh.element_facet(k, i));
      if (!f.on_boundary()) {
        const int other = f.owner == k ? f.neighbor : f.owner;
        const int other_local = f.owner == k ? f.neighbor_local : f.owner_local;
        if (mesh.element_facet(other, other_local) != mesh.element_facet(k, i)) {
          d.max_adjacency_error += 1.0;
        }
        d.max_antiparallel_error =
            std::max(d.max_antiparallel_error, (n + mesh.outward_normal(other, other_local)).norm());
      }
    }
    d.max_normal_closure = std::max(d.max_normal_closure, closure.norm());
    d.total_measure += mesh.element_measure(k);
    d.min_element_measure = std::min(d.min_element_measure, mesh.element_measure(k));
  }
  for (int f = 0; f < mesh.num_facets(); ++f) {
    d.min_facet_measure = std::min(d.min_facet_measure, mesh.facet_measure(f));
  }
  return d;
}

/// Rebuild the mesh with elements renumbered: new element j is old perm[j].
template <int Dim>
Mesh<Dim> permute_elements(const Mesh<Dim>& mesh, std::span<const int> perm) {
  if (static_cast<int>(perm.size()) != mesh.num_elements()) {
    throw std::invalid_argument("permute_elements: permutation size mismatch");
  }
  std::vector<typename Mesh<Dim>::element_type> elems;
  elems.reserve(perm.size());
  for (int j : perm) {
    elems.push_back(mesh.element(j));
  }
  return Mesh<Dim>(mesh.vertices(), std::move(elems));
}

// Plain-text mesh format:
//   line 1:       dim nv ne
//   nv lines:     d coordinates
//   ne lines:     d+1 zero-based vertex indices

template <int Dim>
void write_mesh(std::ostream& os, const Mesh<Dim>& mesh) {
  os << Dim << ' ' << mesh.num_vertices() << ' ' << mesh.num_elements() << '\n';
  os << std::setprecision(17);
  for (const auto& v : mesh.vertices()) {
    for (int j = 0; j < Dim; ++j) {
      os << (j ? " " : "") << v[j];
    }
    os << '\n';
  }
  for (const auto& el : mesh.elements()) {
    for (int j = 0; j <= Dim; ++j) {
      os << (j ? " " : "") << el[j];
    }
    os << '\n';
  }
}

/// Reads the dimension from the header without consuming the stream.
inline int peek_mesh_dim(const std::string& path) {
  std::ifstream in(path);
  int dim = 0;
  if (!(in >> dim)) {
    throw std::invalid_argument("cannot read mesh header from " + path);
  }
  return dim;
}

template <int Dim>
Mesh<Dim> read_mesh(std::istream& is) {
  int dim = 0;
  long nv = 0, ne = 0;
  if (!(is >> dim >> nv >> ne)) {
    throw std::invalid_argument("read_mesh: malformed header");
  }
  if (dim != Dim) {
    throw std::invalid_argument("read_mesh: file dimension " + std::to_string(dim) +
                                " does not match requested " + std::to_string(Dim));
  }
  if (nv <= Dim || ne < 1) {
    throw std::invalid_argument("read_mesh: bad vertex/element counts");
  }
  std::vector<Point<Dim>> verts(nv);
  for (auto& v : verts) {
    for (int j = 0; j < Dim; ++j) {
      if (!(is >> v[j])) {
        throw std::invalid_argument("read_mesh: truncated vertex block");
      }
    }
  }
  std::vector<std::array<int, Dim + 1>> elems(ne);
  for (auto& el : elems) {
    for (int j = 0; j <= Dim; ++j) {
      if (!(is >> el[j])) {
        throw std::invalid_argument("read_mesh: truncated element block");
      }
    }
  }
  return Mesh<Dim>(std::move(verts), std::move(elems));
}

} // namespace wgstokes
