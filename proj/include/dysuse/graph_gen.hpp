#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>
#include <vector>

#include "dysuse/graph.hpp"
#include "dysuse/rng.hpp"

namespace dysuse {

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }
  std::size_t component_size(std::size_t x) { return size_[find(x)]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace detail

// Builds T cumulative snapshots from time-ordered records. Snapshot 0 is the
// largest (weakly) connected component of the earliest `initial_fraction` of
// edges; the remaining edges are split into T-1 equal contiguous time blocks
// and added cumulatively. Self-loop records are dropped; duplicate (src,dst)
// rows keep their earliest appearance. Ties in time keep input order.
inline DynamicGraph build_snapshots(const std::vector<TemporalEdgeRecord>& records, int t_count,
                                    double initial_fraction = 0.5) {
  if (records.empty()) throw ValidationError("build_snapshots: empty record list");
  if (t_count < 1) throw ValidationError("build_snapshots: T must be >= 1");
  if (!(initial_fraction > 0.0 && initial_fraction <= 1.0))
    throw ValidationError("build_snapshots: initial_fraction must be in (0, 1]");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].time < records[b].time;
  });

  std::vector<TemporalEdgeRecord> sorted;
  sorted.reserve(records.size());
  for (std::size_t i : order)
    if (records[i].src != records[i].dst) sorted.push_back(records[i]);
  if (sorted.empty()) throw ValidationError("build_snapshots: no non-self-loop edges");

  const std::size_t total = sorted.size();
  std::size_t n0 = static_cast<std::size_t>(std::llround(initial_fraction * static_cast<double>(total)));
  n0 = std::min(std::max<std::size_t>(n0, 1), total);

  // Largest weakly connected component of the initial block; ties broken by
  // edge count, then by smallest contained node id.
  NodeId max_id = 0;
  for (const auto& r : sorted) max_id = std::max({max_id, r.src, r.dst});
  detail::UnionFind uf(static_cast<std::size_t>(max_id) + 1);
  for (std::size_t i = 0; i < n0; ++i)
    uf.unite(static_cast<std::size_t>(sorted[i].src), static_cast<std::size_t>(sorted[i].dst));

  std::vector<std::size_t> comp_nodes(static_cast<std::size_t>(max_id) + 1, 0);
  std::vector<std::size_t> comp_edges(static_cast<std::size_t>(max_id) + 1, 0);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(max_id) + 1, 0);
  for (std::size_t i = 0; i < n0; ++i) {
    for (NodeId v : {sorted[i].src, sorted[i].dst}) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++comp_nodes[uf.find(static_cast<std::size_t>(v))];
      }
    }
    ++comp_edges[uf.find(static_cast<std::size_t>(sorted[i].src))];
  }
  std::size_t best_root = 0;
  bool have_root = false;
  for (std::size_t v = 0; v <= static_cast<std::size_t>(max_id); ++v) {
    if (!seen[v]) continue;
    const std::size_t r = uf.find(v);
    if (!have_root || comp_nodes[r] > comp_nodes[best_root] ||
        (comp_nodes[r] == comp_nodes[best_root] && comp_edges[r] > comp_edges[best_root])) {
      best_root = r;
      have_root = true;
    }
  }

  std::set<std::pair<NodeId, NodeId>> edge_set;
  std::vector<Edge> cumulative;
  std::vector<NodeId> cumulative_nodes;
  auto add_record = [&](const TemporalEdgeRecord& r) {
    if (!edge_set.insert({r.src, r.dst}).second) return;
    double w = r.weight.value_or(1.0);
    if (!(w >= 0.0 && w <= 1.0)) w = 1.0;
    cumulative.push_back({r.src, r.dst, w});
    cumulative_nodes.push_back(r.src);
    cumulative_nodes.push_back(r.dst);
  };

  for (std::size_t i = 0; i < n0; ++i)
    if (uf.find(static_cast<std::size_t>(sorted[i].src)) == best_root) add_record(sorted[i]);
  if (cumulative.empty()) throw ValidationError("build_snapshots: initial component is empty");

  // Split the remaining edges into T-1 contiguous blocks, earliest blocks
  // taking the remainder.
  const std::size_t rest = total - n0;
  std::vector<std::size_t> block_ends(static_cast<std::size_t>(t_count), n0);
  if (t_count > 1) {
    const std::size_t q = rest / static_cast<std::size_t>(t_count - 1);
    const std::size_t r = rest % static_cast<std::size_t>(t_count - 1);
    std::size_t pos = n0;
    for (int t = 1; t < t_count; ++t) {
      pos += q + (static_cast<std::size_t>(t) <= r ? 1 : 0);
      block_ends[static_cast<std::size_t>(t)] = pos;
    }
  }

  std::vector<std::vector<Edge>> snap_edges;
  std::vector<std::vector<NodeId>> snap_nodes;
  std::size_t next = n0;
  for (int t = 0; t < t_count; ++t) {
    for (; next < block_ends[static_cast<std::size_t>(t)]; ++next) add_record(sorted[next]);
    snap_edges.push_back(cumulative);
    snap_nodes.push_back(cumulative_nodes);
  }

  NodeId n_global = 0;
  for (NodeId v : cumulative_nodes) n_global = std::max(n_global, v);
  ++n_global;

  std::vector<Snapshot> snaps;
  for (int t = 0; t < t_count; ++t)
    snaps.emplace_back(t, n_global, std::move(snap_nodes[static_cast<std::size_t>(t)]),
                       std::move(snap_edges[static_cast<std::size_t>(t)]));
  return DynamicGraph(n_global, std::move(snaps));
}

struct PerturbOptions {
  double node_add = 0.0;
  double node_del = 0.0;
  double edge_add = 0.0;
  double edge_del = 0.0;
  // Nodes never picked for deletion (e.g. reserved seed candidates).
  std::vector<NodeId> reserved;
  // Added nodes connect to the previous snapshot: one outgoing and/or one
  // incoming edge.
  bool added_node_out_edge = true;
  bool added_node_in_edge = true;
};

// Applies, independently at each snapshot t>0, uniform node/edge deletions
// and additions. Each class perturbs a count drawn uniformly from
// [0, ceil(fraction * class count)], matching the paper-style "0~f" ranges.
// Added nodes take fresh global ids and connect to nodes of snapshot t-1.
// Edge weights are placeholders (1.0) for new edges; run assign_weights on
// the result to restore the 1/d_in rule.
inline DynamicGraph perturb_snapshots(const DynamicGraph& g, const PerturbOptions& opt,
                                      std::uint64_t rng_seed) {
  for (double f : {opt.node_add, opt.node_del, opt.edge_add, opt.edge_del})
    if (!(f >= 0.0 && f < 1.0))
      throw ValidationError("perturb_snapshots: fractions must be in [0, 1)");
  if (opt.node_add == 0.0 && opt.node_del == 0.0 && opt.edge_add == 0.0 && opt.edge_del == 0.0)
    return g;

  std::unordered_set<NodeId> reserved(opt.reserved.begin(), opt.reserved.end());
  NodeId next_id = g.n_global();

  std::vector<std::vector<NodeId>> nodes_by_t;
  std::vector<std::vector<Edge>> edges_by_t;
  nodes_by_t.push_back(g.snapshot(0).nodes());
  edges_by_t.push_back(g.snapshot(0).edges());

  for (int t = 1; t < g.n_snapshots(); ++t) {
    const Snapshot& snap = g.snapshot(t);
    SeqRng rng(rng_seed, static_cast<std::uint64_t>(t), rng_tag::kPerturb);

    std::vector<NodeId> nodes = snap.nodes();
    std::vector<Edge> edges = snap.edges();
    const std::size_t n_nodes0 = nodes.size();
    const std::size_t n_edges0 = edges.size();

    auto draw_count = [&](double frac, std::size_t base) -> std::size_t {
      if (frac <= 0.0 || base == 0) return 0;
      const auto cap = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(base)));
      return static_cast<std::size_t>(rng.next_int(cap + 1));
    };

    // Node deletions, sampled among non-reserved nodes.
    std::vector<NodeId> candidates;
    for (NodeId v : nodes)
      if (!reserved.count(v)) candidates.push_back(v);
    std::size_t n_del = std::min(draw_count(opt.node_del, candidates.size()), candidates.size());
    std::unordered_set<NodeId> deleted;
    for (std::size_t i = 0; i < n_del; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next_int(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
      deleted.insert(candidates[i]);
    }
    if (!deleted.empty()) {
      nodes.erase(std::remove_if(nodes.begin(), nodes.end(),
                                 [&](NodeId v) { return deleted.count(v) != 0; }),
                  nodes.end());
      edges.erase(std::remove_if(edges.begin(), edges.end(),
                                 [&](const Edge& e) {
                                   return deleted.count(e.src) != 0 || deleted.count(e.dst) != 0;
                                 }),
                  edges.end());
    }

    // Edge deletions.
    std::size_t e_del = std::min(draw_count(opt.edge_del, n_edges0), edges.size());
    for (std::size_t i = 0; i < e_del; ++i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_int(edges.size()));
      edges[j] = edges.back();
      edges.pop_back();
    }

    std::set<std::pair<NodeId, NodeId>> edge_set;
    for (const Edge& e : edges) edge_set.insert({e.src, e.dst});
    std::unordered_set<NodeId> node_set(nodes.begin(), nodes.end());
    auto try_add_edge = [&](NodeId u, NodeId v) {
      if (u == v || !edge_set.insert({u, v}).second) return false;
      edges.push_back({u, v, 1.0});
      return true;
    };

    // Node additions: fresh ids, connected to the previous snapshot's nodes
    // that are still present here.
    const std::vector<NodeId>& prev_nodes = nodes_by_t.back();
    std::vector<NodeId> anchors;
    for (NodeId v : prev_nodes)
      if (node_set.count(v)) anchors.push_back(v);
    const std::size_t n_add = draw_count(opt.node_add, n_nodes0);
    for (std::size_t i = 0; i < n_add; ++i) {
      const NodeId fresh = next_id++;
      nodes.push_back(fresh);
      node_set.insert(fresh);
      if (!anchors.empty()) {
        if (opt.added_node_out_edge)
          try_add_edge(fresh, anchors[static_cast<std::size_t>(rng.next_int(anchors.size()))]);
        if (opt.added_node_in_edge)
          try_add_edge(anchors[static_cast<std::size_t>(rng.next_int(anchors.size()))], fresh);
      }
    }

    // Edge additions between current nodes; bounded resampling on collisions.
    const std::size_t e_add = draw_count(opt.edge_add, n_edges0);
    if (nodes.size() >= 2) {
      std::size_t added = 0, tries = 0;
      const std::size_t max_tries = 32 * (e_add + 1);
      while (added < e_add && tries < max_tries) {
        ++tries;
        const NodeId u = nodes[static_cast<std::size_t>(rng.next_int(nodes.size()))];
        const NodeId v = nodes[static_cast<std::size_t>(rng.next_int(nodes.size()))];
        if (try_add_edge(u, v)) ++added;
      }
    }

    nodes_by_t.push_back(std::move(nodes));
    edges_by_t.push_back(std::move(edges));
  }

  std::vector<Snapshot> snaps;
  for (int t = 0; t < g.n_snapshots(); ++t)
    snaps.emplace_back(t, next_id, std::move(nodes_by_t[static_cast<std::size_t>(t)]),
                       std::move(edges_by_t[static_cast<std::size_t>(t)]));
  return DynamicGraph(next_id, std::move(snaps));
}

inline DynamicGraph perturb_snapshots(const DynamicGraph& g, double node_add, double node_del,
                                      double edge_add, double edge_del, std::uint64_t rng_seed) {
  PerturbOptions opt;
  opt.node_add = node_add;
  opt.node_del = node_del;
  opt.edge_add = edge_add;
  opt.edge_del = edge_del;
  return perturb_snapshots(g, opt, rng_seed);
}

// Barabasi-Albert preferential attachment. Starts from a clique on the first
// m_attach nodes, then each new node attaches to m_attach distinct existing
// nodes with probability proportional to degree. Record time is insertion
// order; one record per edge (symmetrize downstream for undirected use).
inline std::vector<TemporalEdgeRecord> generate_ba(NodeId n, int m_attach,
                                                   std::uint64_t rng_seed) {
  if (m_attach < 1 || n <= m_attach)
    throw ValidationError("generate_ba: need n > m_attach >= 1");
  SeqRng rng(rng_seed, 0, rng_tag::kGraphGen);
  std::vector<TemporalEdgeRecord> records;
  std::vector<NodeId> pool;  // one entry per edge endpoint: degree-weighted sampling
  double time = 0.0;
  auto emit = [&](NodeId u, NodeId v) {
    records.push_back({u, v, time, std::nullopt});
    time += 1.0;
    pool.push_back(u);
    pool.push_back(v);
  };
  for (NodeId i = 0; i < m_attach; ++i)
    for (NodeId j = i + 1; j < m_attach; ++j) emit(i, j);
  for (NodeId k = m_attach; k < n; ++k) {
    std::unordered_set<NodeId> chosen;
    int rejections = 0;
    while (chosen.size() < static_cast<std::size_t>(m_attach)) {
      NodeId target;
      if (pool.empty() || rejections > 64) {
        // Uniform fallback: guarantees m distinct targets always complete.
        target = static_cast<NodeId>(rng.next_int(static_cast<std::uint64_t>(k)));
      } else {
        target = pool[static_cast<std::size_t>(rng.next_int(pool.size()))];
      }
      if (target == k || chosen.count(target)) {
        ++rejections;
        continue;
      }
      chosen.insert(target);
      rejections = 0;
    }
    std::vector<NodeId> ordered(chosen.begin(), chosen.end());
    std::sort(ordered.begin(), ordered.end());
    for (NodeId target : ordered) emit(k, target);
  }
  return records;
}

// `count-1` uniform random k-subsets of snapshot-0 nodes plus one set of the
// k highest-degree nodes (snapshot-0 total degree, ties to the lower id).
inline std::vector<std::vector<NodeId>> seed_sets(const DynamicGraph& g, std::size_t k,
                                                  std::size_t count, std::uint64_t rng_seed) {
  const Snapshot& s0 = g.snapshot(0);
  if (count < 1) throw ValidationError("seed_sets: count must be >= 1");
  if (k < 1 || k > s0.nodes().size())
    throw ValidationError("seed_sets: k must be in [1, |V_0|]");
  std::vector<std::vector<NodeId>> sets;
  sets.reserve(count);
  for (std::size_t i = 0; i + 1 < count; ++i) {
    SeqRng rng(rng_seed, i, rng_tag::kSeedSets);
    std::vector<NodeId> pool = s0.nodes();
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t m = j + static_cast<std::size_t>(rng.next_int(pool.size() - j));
      std::swap(pool[j], pool[m]);
    }
    std::vector<NodeId> set(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(set.begin(), set.end());
    sets.push_back(std::move(set));
  }
  std::vector<NodeId> by_degree = s0.nodes();
  std::sort(by_degree.begin(), by_degree.end(), [&](NodeId a, NodeId b) {
    const std::size_t da = s0.in_degree(a) + s0.out_degree(a);
    const std::size_t db = s0.in_degree(b) + s0.out_degree(b);
    return da != db ? da > db : a < b;
  });
  std::vector<NodeId> top(by_degree.begin(), by_degree.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(top.begin(), top.end());
  sets.push_back(std::move(top));
  return sets;
}

}  // namespace dysuse
