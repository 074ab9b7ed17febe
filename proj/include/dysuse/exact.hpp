#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dysuse/diffusion.hpp"
#include "dysuse/graph.hpp"
#include "dysuse/susceptibility.hpp"

namespace dysuse {

// Brute-force susceptibility for tiny instances, used as an independent
// oracle against the Monte-Carlo estimator. IC and TR enumerate all joint
// per-(edge,snapshot) coin worlds with their own dynamics; LT integrates the
// threshold box exactly via per-node interval decomposition. Supports the
// per-snapshot attempt policy only (the once-ever coin space is not a simple
// per-(edge,snapshot) product).

namespace exact_detail {

inline constexpr std::size_t kMaxOutcomes = std::size_t{1} << 20;

struct CoinLayout {
  // coin id of edge j in snapshot t = offsets[t] + j (snapshots use the
  // canonical sorted edge order)
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
};

inline CoinLayout coin_layout(const DynamicGraph& g) {
  CoinLayout layout;
  layout.offsets.resize(static_cast<std::size_t>(g.n_snapshots()));
  for (int t = 0; t < g.n_snapshots(); ++t) {
    layout.offsets[static_cast<std::size_t>(t)] = layout.total;
    layout.total += g.snapshot(t).edges().size();
  }
  return layout;
}

// IC dynamics under a fixed coin world: frontier nodes attempt their live
// out-edges, layered until quiescence or hop cap.
inline void run_world_ic(const DynamicGraph& g, const CoinLayout& layout, std::uint32_t world,
                         std::optional<int> hop_cap, std::vector<std::uint8_t>& influenced,
                         const std::vector<NodeId>& seeds,
                         std::vector<std::vector<std::uint8_t>>& influenced_by_t) {
  std::fill(influenced.begin(), influenced.end(), 0);
  for (NodeId s : seeds) influenced[static_cast<std::size_t>(s)] = 1;
  for (int t = 0; t < g.n_snapshots(); ++t) {
    const Snapshot& snap = g.snapshot(t);
    const std::size_t base = layout.offsets[static_cast<std::size_t>(t)];
    std::vector<NodeId> frontier;
    for (NodeId v : snap.nodes())
      if (influenced[static_cast<std::size_t>(v)]) frontier.push_back(v);
    const int cap = hop_cap.value_or(-1);
    for (int hop = 0; cap < 0 || hop < cap; ++hop) {
      std::vector<NodeId> fresh;
      for (NodeId u : frontier) {
        for (std::size_t j = 0; j < snap.edges().size(); ++j) {
          const Edge& e = snap.edges()[j];
          if (e.src != u || influenced[static_cast<std::size_t>(e.dst)]) continue;
          if (world & (std::uint32_t{1} << (base + j))) {
            influenced[static_cast<std::size_t>(e.dst)] = 1;
            fresh.push_back(e.dst);
          }
        }
      }
      if (fresh.empty()) break;
      frontier = std::move(fresh);
    }
    influenced_by_t[static_cast<std::size_t>(t)] = influenced;
  }
}

// TR dynamics under a fixed trigger world: a node activates when a frontier
// in-neighbor is a member of its (snapshot-local) trigger set.
inline void run_world_tr(const DynamicGraph& g, const CoinLayout& layout, std::uint32_t world,
                         std::optional<int> hop_cap, std::vector<std::uint8_t>& influenced,
                         const std::vector<NodeId>& seeds,
                         std::vector<std::vector<std::uint8_t>>& influenced_by_t) {
  std::fill(influenced.begin(), influenced.end(), 0);
  for (NodeId s : seeds) influenced[static_cast<std::size_t>(s)] = 1;
  std::vector<std::uint8_t> in_frontier(influenced.size(), 0);
  for (int t = 0; t < g.n_snapshots(); ++t) {
    const Snapshot& snap = g.snapshot(t);
    const std::size_t base = layout.offsets[static_cast<std::size_t>(t)];
    std::vector<NodeId> frontier;
    for (NodeId v : snap.nodes())
      if (influenced[static_cast<std::size_t>(v)]) frontier.push_back(v);
    const int cap = hop_cap.value_or(-1);
    for (int hop = 0; cap < 0 || hop < cap; ++hop) {
      std::fill(in_frontier.begin(), in_frontier.end(), 0);
      for (NodeId u : frontier) in_frontier[static_cast<std::size_t>(u)] = 1;
      std::vector<NodeId> fresh;
      for (NodeId v : snap.nodes()) {
        if (influenced[static_cast<std::size_t>(v)]) continue;
        for (std::size_t j = 0; j < snap.edges().size(); ++j) {
          const Edge& e = snap.edges()[j];
          if (e.dst != v || !in_frontier[static_cast<std::size_t>(e.src)]) continue;
          if (world & (std::uint32_t{1} << (base + j))) {
            fresh.push_back(v);
            break;
          }
        }
      }
      if (fresh.empty()) break;
      for (NodeId v : fresh) influenced[static_cast<std::size_t>(v)] = 1;
      frontier = std::move(fresh);
    }
    influenced_by_t[static_cast<std::size_t>(t)] = influenced;
  }
}

inline SusceptibilityTable enumerate_coin_worlds(const DynamicGraph& g,
                                                 const DiffusionModelSpec& spec,
                                                 const std::vector<NodeId>& seeds) {
  const CoinLayout layout = coin_layout(g);
  if (layout.total > 20)
    throw CapacityError("exact_susceptibility: " + std::to_string(layout.total) +
                        " edge coins exceed the 2^20 outcome budget");
  const std::size_t n_worlds = std::size_t{1} << layout.total;

  std::vector<double> p(layout.total);
  for (int t = 0; t < g.n_snapshots(); ++t) {
    const auto& edges = g.snapshot(t).edges();
    for (std::size_t j = 0; j < edges.size(); ++j)
      p[layout.offsets[static_cast<std::size_t>(t)] + j] = edges[j].weight;
  }

  const auto t_count = static_cast<std::size_t>(g.n_snapshots());
  const auto n = static_cast<std::size_t>(g.n_global());
  std::vector<std::vector<double>> sums(t_count, std::vector<double>(n, 0.0));
  std::vector<std::uint8_t> influenced(n, 0);
  std::vector<std::vector<std::uint8_t>> influenced_by_t(t_count);

  for (std::size_t world = 0; world < n_worlds; ++world) {
    double prob = 1.0;
    for (std::size_t c = 0; c < layout.total; ++c)
      prob *= (world & (std::size_t{1} << c)) ? p[c] : 1.0 - p[c];
    if (prob == 0.0) continue;
    if (spec.kind == DiffusionKind::IC)
      run_world_ic(g, layout, static_cast<std::uint32_t>(world), spec.hop_cap, influenced, seeds,
                   influenced_by_t);
    else
      run_world_tr(g, layout, static_cast<std::uint32_t>(world), spec.hop_cap, influenced, seeds,
                   influenced_by_t);
    for (std::size_t t = 0; t < t_count; ++t)
      for (std::size_t v = 0; v < n; ++v)
        if (influenced_by_t[t][v]) sums[t][v] += prob;
  }

  SusceptibilityTable table;
  table.values = std::move(sums);
  table.n_simulations = 0;
  table.seeds = seeds;
  return table;
}

// LT: node v's behavior depends on its threshold only through the interval
// between consecutive achievable influence-mass values, so the unit box of
// thresholds decomposes into finitely many product cells with constant
// dynamics. Mass candidates are subset sums of in-weights, accumulated in
// adjacency order so they match the sweep's floating-point sums bitwise.
inline SusceptibilityTable enumerate_lt_regions(const DynamicGraph& g,
                                                const DiffusionModelSpec& spec,
                                                const std::vector<NodeId>& seeds) {
  const auto n = static_cast<std::size_t>(g.n_global());
  if (n > 6)
    throw CapacityError("exact_susceptibility: LT region decomposition is limited to 6 nodes");
  const auto t_count = static_cast<std::size_t>(g.n_snapshots());

  std::vector<std::uint8_t> is_seed(n, 0);
  for (NodeId s : seeds) is_seed[static_cast<std::size_t>(s)] = 1;

  // Boundaries per node: {0, 1} plus every achievable mass in (0, 1).
  std::vector<std::vector<double>> boundaries(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<double> b = {0.0, 1.0};
    if (!is_seed[v]) {
      for (std::size_t t = 0; t < t_count; ++t) {
        const auto& in = g.snapshot(static_cast<int>(t)).in_neighbors(static_cast<NodeId>(v));
        const std::size_t deg = in.size();
        if (deg > 20)
          throw CapacityError("exact_susceptibility: LT in-degree exceeds subset budget");
        for (std::size_t mask = 1; mask < (std::size_t{1} << deg); ++mask) {
          double sum = 0.0;
          for (std::size_t j = 0; j < deg; ++j)
            if (mask & (std::size_t{1} << j)) sum += in[j].second;
          if (sum > 0.0 && sum < 1.0) b.push_back(sum);
        }
      }
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    boundaries[v] = std::move(b);
  }

  std::size_t n_cells = 1;
  for (std::size_t v = 0; v < n; ++v) {
    n_cells *= boundaries[v].size() - 1;
    if (n_cells > kMaxOutcomes)
      throw CapacityError("exact_susceptibility: LT cell count exceeds the 2^20 budget");
  }

  std::vector<std::vector<double>> sums(t_count, std::vector<double>(n, 0.0));
  std::vector<std::size_t> cell(n, 0);
  std::vector<double> theta(n);
  std::vector<std::uint8_t> influenced(n, 0);

  for (std::size_t ci = 0; ci < n_cells; ++ci) {
    double prob = 1.0;
    for (std::size_t v = 0; v < n; ++v) {
      const double lo = boundaries[v][cell[v]];
      const double hi = boundaries[v][cell[v] + 1];
      theta[v] = 0.5 * (lo + hi);
      prob *= hi - lo;
    }
    if (prob > 0.0) {
      std::fill(influenced.begin(), influenced.end(), 0);
      for (NodeId s : seeds) influenced[static_cast<std::size_t>(s)] = 1;
      for (std::size_t t = 0; t < t_count; ++t) {
        const Snapshot& snap = g.snapshot(static_cast<int>(t));
        const int cap = spec.hop_cap.value_or(-1);
        for (int hop = 0; cap < 0 || hop < cap; ++hop) {
          std::vector<NodeId> fresh;
          for (NodeId vv : snap.nodes()) {
            if (influenced[static_cast<std::size_t>(vv)]) continue;
            double mass = 0.0;
            for (const auto& [u, w] : snap.in_neighbors(vv))
              if (influenced[static_cast<std::size_t>(u)]) mass += w;
            if (mass >= theta[static_cast<std::size_t>(vv)]) fresh.push_back(vv);
          }
          if (fresh.empty()) break;
          for (NodeId vv : fresh) influenced[static_cast<std::size_t>(vv)] = 1;
        }
        for (std::size_t v = 0; v < n; ++v)
          if (influenced[v]) sums[t][v] += prob;
      }
    }
    // odometer increment
    for (std::size_t v = 0; v < n; ++v) {
      if (++cell[v] < boundaries[v].size() - 1) break;
      cell[v] = 0;
    }
  }

  SusceptibilityTable table;
  table.values = std::move(sums);
  table.n_simulations = 0;
  table.seeds = seeds;
  return table;
}

}  // namespace exact_detail

inline SusceptibilityTable exact_susceptibility(const DynamicGraph& g,
                                                const DiffusionModelSpec& spec,
                                                const std::vector<NodeId>& seeds) {
  spec.validate();
  for (NodeId s : seeds)
    if (s < 0 || s >= g.n_global())
      throw ValidationError("exact_susceptibility: seed outside the node universe");
  if (spec.kind == DiffusionKind::LT)
    return exact_detail::enumerate_lt_regions(g, spec, seeds);
  if (spec.attempt_policy != AttemptPolicy::PerSnapshot)
    throw ValidationError(
        "exact_susceptibility: only the per-snapshot attempt policy is supported");
  return exact_detail::enumerate_coin_worlds(g, spec, seeds);
}

}  // namespace dysuse
