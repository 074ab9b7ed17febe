#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dysuse/common.hpp"

namespace dysuse {

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;
};

inline bool operator==(const Edge& a, const Edge& b) {
  return a.src == b.src && a.dst == b.dst && a.weight == b.weight;
}

// One row of a temporal edge list, as ingested or generated.
struct TemporalEdgeRecord {
  NodeId src = 0;
  NodeId dst = 0;
  double time = 0.0;
  std::optional<double> weight;
};

// A single weighted directed graph snapshot over the global node universe
// [0, n_global). Immutable once constructed; adjacency is prebuilt so
// concurrent read-only use is safe.
class Snapshot {
 public:
  Snapshot() = default;

  // Edges are canonicalized to (src, dst) order. Endpoints must be present,
  // weights in [0, 1], and (src, dst) pairs unique.
  Snapshot(int index, NodeId n_global, std::vector<NodeId> present_nodes,
           std::vector<Edge> edges)
      : index_(index), n_global_(n_global), nodes_(std::move(present_nodes)),
        edges_(std::move(edges)) {
    if (n_global_ < 0) throw ValidationError("snapshot: negative node universe");
    std::sort(nodes_.begin(), nodes_.end());
    nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
    present_.assign(static_cast<std::size_t>(n_global_), 0);
    for (NodeId v : nodes_) {
      if (v < 0 || v >= n_global_)
        throw ValidationError("snapshot " + std::to_string(index_) + ": node id " +
                              std::to_string(v) + " outside [0, " +
                              std::to_string(n_global_) + ")");
      present_[static_cast<std::size_t>(v)] = 1;
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    in_nbrs_.assign(static_cast<std::size_t>(n_global_), {});
    out_nbrs_.assign(static_cast<std::size_t>(n_global_), {});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      if (!contains(e.src) || !contains(e.dst))
        throw ValidationError("snapshot " + std::to_string(index_) +
                              ": edge endpoint not in present node set");
      if (e.src == e.dst)
        throw ValidationError("snapshot " + std::to_string(index_) + ": self-loop at " +
                              std::to_string(e.src));
      if (i > 0 && edges_[i - 1].src == e.src && edges_[i - 1].dst == e.dst)
        throw ValidationError("snapshot " + std::to_string(index_) + ": duplicate edge (" +
                              std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
      if (!(e.weight >= 0.0 && e.weight <= 1.0))
        throw ValidationError("snapshot " + std::to_string(index_) +
                              ": edge weight outside [0,1]");
      out_nbrs_[static_cast<std::size_t>(e.src)].push_back({e.dst, e.weight});
      in_nbrs_[static_cast<std::size_t>(e.dst)].push_back({e.src, e.weight});
    }
  }

  int index() const { return index_; }
  NodeId n_global() const { return n_global_; }
  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool contains(NodeId v) const {
    return v >= 0 && v < n_global_ && present_[static_cast<std::size_t>(v)] != 0;
  }
  // In-neighbors (u, w) of v: v can be influenced by u with probability w.
  const std::vector<std::pair<NodeId, double>>& in_neighbors(NodeId v) const {
    return in_nbrs_[static_cast<std::size_t>(v)];
  }
  const std::vector<std::pair<NodeId, double>>& out_neighbors(NodeId v) const {
    return out_nbrs_[static_cast<std::size_t>(v)];
  }
  std::size_t in_degree(NodeId v) const { return in_nbrs_[static_cast<std::size_t>(v)].size(); }
  std::size_t out_degree(NodeId v) const { return out_nbrs_[static_cast<std::size_t>(v)].size(); }

 private:
  int index_ = 0;
  NodeId n_global_ = 0;
  std::vector<NodeId> nodes_;
  std::vector<std::uint8_t> present_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<NodeId, double>>> in_nbrs_;
  std::vector<std::vector<std::pair<NodeId, double>>> out_nbrs_;
};

// Ordered snapshot sequence over a fixed global node universe. Nodes absent
// from a snapshot are treated as isolated there.
class DynamicGraph {
 public:
  DynamicGraph() = default;
  DynamicGraph(NodeId n_global, std::vector<Snapshot> snapshots)
      : n_global_(n_global), snapshots_(std::move(snapshots)) {
    if (snapshots_.empty()) throw ValidationError("dynamic graph: no snapshots");
    for (std::size_t t = 0; t < snapshots_.size(); ++t) {
      if (snapshots_[t].index() != static_cast<int>(t))
        throw ValidationError("dynamic graph: snapshot indices not contiguous");
      if (snapshots_[t].n_global() != n_global_)
        throw ValidationError("dynamic graph: snapshot node universe mismatch");
    }
  }

  NodeId n_global() const { return n_global_; }
  int n_snapshots() const { return static_cast<int>(snapshots_.size()); }
  const Snapshot& snapshot(int t) const { return snapshots_[static_cast<std::size_t>(t)]; }
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }

 private:
  NodeId n_global_ = 0;
  std::vector<Snapshot> snapshots_;
};

// Convenience constructor for tests and small experiments: one edge list per
// snapshot, present nodes inferred from endpoints unless given explicitly.
inline DynamicGraph make_graph(NodeId n_global, const std::vector<std::vector<Edge>>& edges,
                               const std::vector<std::vector<NodeId>>* nodes = nullptr) {
  std::vector<Snapshot> snaps;
  snaps.reserve(edges.size());
  for (std::size_t t = 0; t < edges.size(); ++t) {
    std::vector<NodeId> present;
    if (nodes) {
      present = (*nodes)[t];
    } else {
      for (const Edge& e : edges[t]) {
        present.push_back(e.src);
        present.push_back(e.dst);
      }
    }
    snaps.emplace_back(static_cast<int>(t), n_global, std::move(present), edges[t]);
  }
  return DynamicGraph(n_global, std::move(snaps));
}

// Reassigns every edge weight to 1/d_in(dst), per snapshot, so weights track
// the evolving topology.
inline DynamicGraph assign_weights(const DynamicGraph& g) {
  std::vector<Snapshot> snaps;
  snaps.reserve(static_cast<std::size_t>(g.n_snapshots()));
  for (int t = 0; t < g.n_snapshots(); ++t) {
    const Snapshot& s = g.snapshot(t);
    std::vector<Edge> edges = s.edges();
    for (Edge& e : edges) e.weight = 1.0 / static_cast<double>(s.in_degree(e.dst));
    snaps.emplace_back(t, g.n_global(), s.nodes(), std::move(edges));
  }
  return DynamicGraph(g.n_global(), std::move(snaps));
}

}  // namespace dysuse
