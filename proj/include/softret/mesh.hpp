// mesh.hpp - hand surface as a triangle mesh with an edge graph, plus geodesic
// (shortest-path) distance queries. Distances are vertex-to-vertex after
// nearest-vertex projection; shortest paths use Dijkstra with Euclidean edge
// weights. Rest-pose positions are the default; queries can be evaluated on
// alternative per-frame vertex positions with the same topology.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "softret/geometry.hpp"
#include "softret/util.hpp"

namespace softret {

// Per-vertex region labels. Fingers are 1..5; label-1 is the finger id used in
// load/allocation arrays.
enum FingerLabel : int {
  kPalm = 0,
  kThumb = 1,
  kIndex = 2,
  kMiddle = 3,
  kRing = 4,
  kPinky = 5,
};
inline constexpr int kNumFingers = 5;
inline constexpr int kNumLabels = 6;

inline const char* finger_name(int finger_id) {
  static const char* names[kNumFingers] = {"thumb", "index", "middle", "ring", "pinky"};
  if (finger_id < 0 || finger_id >= kNumFingers)
    throw std::invalid_argument("finger_name: finger id out of range: " + std::to_string(finger_id));
  return names[finger_id];
}

inline int finger_id_from_name(const std::string& name) {
  for (int f = 0; f < kNumFingers; ++f)
    if (name == finger_name(f)) return f;
  throw std::invalid_argument("unknown finger name: " + name);
}

// Query point could not reach the target on the edge graph. Connectivity is
// validated at construction, so this indicates a corrupted graph.
struct UnreachableError : NumericalError {
  using NumericalError::NumericalError;
};

// Single-source shortest-path distances over the mesh edge graph.
struct GeodesicField {
  int source_vertex = -1;
  std::vector<double> distances;
};

using Triangle = std::array<int, 3>;

// Nearest vertex by Euclidean distance; ties break to the lowest index.
inline int project_to_vertex(const Vec3& point, std::span<const Vec3> vertices) {
  if (vertices.empty()) throw std::invalid_argument("project_to_vertex: empty vertex set");
  int best = 0;
  double best_d2 = (point - vertices[0]).squaredNorm();
  for (int i = 1; i < static_cast<int>(vertices.size()); ++i) {
    double d2 = (point - vertices[static_cast<size_t>(i)]).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

namespace detail {

// adjacency[v] holds (neighbor, edge weight) pairs sorted by neighbor index.
using Adjacency = std::vector<std::vector<std::pair<int, double>>>;

inline GeodesicField dijkstra(const Adjacency& adj, int source) {
  const int n = static_cast<int>(adj.size());
  if (source < 0 || source >= n)
    throw std::invalid_argument("geodesic_field: source vertex out of range: " + std::to_string(source));
  GeodesicField field;
  field.source_vertex = source;
  field.distances.assign(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
  field.distances[static_cast<size_t>(source)] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > field.distances[static_cast<size_t>(u)]) continue;
    for (auto [v, w] : adj[static_cast<size_t>(u)]) {
      double nd = d + w;
      if (nd < field.distances[static_cast<size_t>(v)]) {
        field.distances[static_cast<size_t>(v)] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  return field;
}

}  // namespace detail

// Triangle mesh of the hand surface. Immutable after construction; concurrent
// read queries are safe. Validates indices, degenerate triangles, labels and
// connectivity up front so downstream queries cannot fail silently.
class HandMesh {
 public:
  // Meshes at or below this vertex count get a full all-pairs distance table
  // at construction; larger meshes compute per-source fields lazily.
  static constexpr int kPrecomputeLimit = 5000;

  HandMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
           std::vector<int> finger_labels, std::vector<Vec3> skeleton_fingertips = {})
      : vertices_(std::move(vertices)),
        triangles_(std::move(triangles)),
        finger_labels_(std::move(finger_labels)),
        skeleton_fingertips_(std::move(skeleton_fingertips)) {
    validate();
    build_adjacency();
    check_connected();
    if (vertex_count() <= kPrecomputeLimit) {
      all_pairs_.reserve(static_cast<size_t>(vertex_count()));
      for (int s = 0; s < vertex_count(); ++s)
        all_pairs_.push_back(detail::dijkstra(adjacency_, s));
    }
  }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<int>& finger_labels() const { return finger_labels_; }
  const std::vector<Vec3>& skeleton_fingertips() const { return skeleton_fingertips_; }
  const detail::Adjacency& adjacency() const { return adjacency_; }

  int project_to_vertex(const Vec3& point) const {
    return softret::project_to_vertex(point, vertices_);
  }

  // Single-source field on rest-pose positions (cached).
  const GeodesicField& geodesic_field(int source) const {
    if (source < 0 || source >= vertex_count())
      throw std::invalid_argument("geodesic_field: source vertex out of range: " + std::to_string(source));
    if (!all_pairs_.empty()) return all_pairs_[static_cast<size_t>(source)];
    std::lock_guard<std::mutex> lock(lazy_->mutex);
    auto it = lazy_->fields.find(source);
    if (it == lazy_->fields.end()) {
      auto field = std::make_unique<GeodesicField>(detail::dijkstra(adjacency_, source));
      it = lazy_->fields.emplace(source, std::move(field)).first;
    }
    return *it->second;
  }

  // Single-source field with alternative vertex positions (same topology).
  // Used for the per-frame geodesic mode; never cached.
  GeodesicField geodesic_field_at(int source, std::span<const Vec3> positions) const {
    if (static_cast<int>(positions.size()) != vertex_count())
      throw std::invalid_argument("geodesic_field_at: positions size does not match mesh");
    return detail::dijkstra(reweighted_adjacency(positions), source);
  }

  double vertex_distance(int a, int b) const {
    const GeodesicField& f = geodesic_field(a);
    double d = f.distances[static_cast<size_t>(b)];
    if (!std::isfinite(d))
      throw UnreachableError("geodesic distance: vertex " + std::to_string(b) +
                             " unreachable from " + std::to_string(a));
    return d;
  }

  // Geodesic distance between two free-space points after nearest-vertex
  // projection. Symmetric; zero when both project to the same vertex.
  double geodesic_distance(const Vec3& x, const Vec3& y) const {
    return vertex_distance(project_to_vertex(x), project_to_vertex(y));
  }

 private:
  void validate() const {
    if (vertices_.empty()) throw std::invalid_argument("mesh: no vertices");
    if (triangles_.empty()) throw std::invalid_argument("mesh: no triangles");
    if (finger_labels_.size() != vertices_.size())
      throw std::invalid_argument("mesh: finger_labels size " + std::to_string(finger_labels_.size()) +
                                  " does not match vertex count " + std::to_string(vertices_.size()));
    for (size_t i = 0; i < vertices_.size(); ++i)
      if (!vertices_[i].allFinite())
        throw std::invalid_argument("mesh: non-finite vertex " + std::to_string(i));
    for (int label : finger_labels_)
      if (label < 0 || label >= kNumLabels)
        throw std::invalid_argument("mesh: finger label out of range: " + std::to_string(label));
    const int n = vertex_count();
    for (size_t t = 0; t < triangles_.size(); ++t) {
      const Triangle& tri = triangles_[t];
      for (int idx : tri)
        if (idx < 0 || idx >= n)
          throw std::invalid_argument("mesh: triangle " + std::to_string(t) +
                                      " references invalid vertex " + std::to_string(idx));
      if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
        throw std::invalid_argument("mesh: triangle " + std::to_string(t) + " has repeated indices");
      const Vec3& a = vertices_[static_cast<size_t>(tri[0])];
      const Vec3& b = vertices_[static_cast<size_t>(tri[1])];
      const Vec3& c = vertices_[static_cast<size_t>(tri[2])];
      double area2 = (b - a).cross(c - a).norm();
      if (area2 < 1e-12)
        throw std::invalid_argument("mesh: triangle " + std::to_string(t) + " is degenerate (zero area)");
    }
  }

  void build_adjacency() {
    adjacency_.assign(vertices_.size(), {});
    auto add_edge = [&](int a, int b) {
      double w = (vertices_[static_cast<size_t>(a)] - vertices_[static_cast<size_t>(b)]).norm();
      if (!(w > 0.0))
        throw std::invalid_argument("mesh: zero-length edge between vertices " + std::to_string(a) +
                                    " and " + std::to_string(b));
      auto& row = adjacency_[static_cast<size_t>(a)];
      for (auto& [v, _] : row)
        if (v == b) return;
      row.emplace_back(b, w);
    };
    for (const Triangle& tri : triangles_) {
      add_edge(tri[0], tri[1]);
      add_edge(tri[1], tri[0]);
      add_edge(tri[1], tri[2]);
      add_edge(tri[2], tri[1]);
      add_edge(tri[0], tri[2]);
      add_edge(tri[2], tri[0]);
    }
    for (auto& row : adjacency_) std::sort(row.begin(), row.end());
  }

  void check_connected() const {
    std::vector<char> seen(vertices_.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    size_t count = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (auto [v, _] : adjacency_[static_cast<size_t>(u)]) {
        if (!seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    if (count != vertices_.size())
      throw std::invalid_argument("mesh: edge graph is disconnected (" + std::to_string(count) + " of " +
                                  std::to_string(vertices_.size()) + " vertices reachable)");
  }

  detail::Adjacency reweighted_adjacency(std::span<const Vec3> positions) const {
    detail::Adjacency adj = adjacency_;
    for (size_t u = 0; u < adj.size(); ++u) {
      for (auto& [v, w] : adj[u]) {
        w = (positions[u] - positions[static_cast<size_t>(v)]).norm();
        if (!(w > 0.0))
          throw NumericalError("mesh: zero-length edge in deformed positions between " +
                               std::to_string(u) + " and " + std::to_string(v));
      }
    }
    return adj;
  }

  // Lazy per-source cache for meshes above the precompute limit. Behind a
  // pointer so the mesh itself stays movable.
  struct LazyCache {
    std::mutex mutex;
    std::unordered_map<int, std::unique_ptr<GeodesicField>> fields;
  };

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<int> finger_labels_;
  std::vector<Vec3> skeleton_fingertips_;
  detail::Adjacency adjacency_;
  std::vector<GeodesicField> all_pairs_;
  mutable std::unique_ptr<LazyCache> lazy_ = std::make_unique<LazyCache>();
};

}  // namespace softret
