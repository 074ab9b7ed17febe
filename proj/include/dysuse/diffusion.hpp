#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dysuse/graph.hpp"
#include "dysuse/rng.hpp"

namespace dysuse {

enum class DiffusionKind { IC, LT, TR };

// An influenced node may retry an edge at every snapshot where it exists
// (PerSnapshot), or attempt each (src,dst) pair at most once across the whole
// run (OnceEver). TR trigger sets follow the same cadence.
enum class AttemptPolicy { PerSnapshot, OnceEver };

struct DiffusionModelSpec {
  DiffusionKind kind = DiffusionKind::IC;
  std::optional<int> hop_cap;  // max hops per snapshot; unset = run to quiescence
  AttemptPolicy attempt_policy = AttemptPolicy::PerSnapshot;

  void validate() const {
    if (hop_cap && *hop_cap < 1) throw ValidationError("diffusion: hop_cap must be >= 1");
  }
};

inline const char* to_string(DiffusionKind k) {
  switch (k) {
    case DiffusionKind::IC: return "IC";
    case DiffusionKind::LT: return "LT";
    case DiffusionKind::TR: return "TR";
  }
  return "?";
}

inline DiffusionKind diffusion_kind_from_string(const std::string& s) {
  if (s == "IC" || s == "ic") return DiffusionKind::IC;
  if (s == "LT" || s == "lt") return DiffusionKind::LT;
  if (s == "TR" || s == "tr") return DiffusionKind::TR;
  throw ValidationError("unknown diffusion model: " + s);
}

// Per-simulation diffusion state. The influenced set is monotone and persists
// across snapshots; randomness is drawn from a counter-based stream keyed by
// (node, snapshot, neighbor), so trajectories are a pure function of
// (graph, spec, seeds, stream).
class DiffusionState {
 public:
  DiffusionState() = default;
  DiffusionState(const DynamicGraph& g, const DiffusionModelSpec& spec,
                 const std::vector<NodeId>& seeds, RandomStream rng)
      : spec_(spec), rng_(rng), influenced_(static_cast<std::size_t>(g.n_global()), 0) {
    spec_.validate();
    for (NodeId s : seeds) {
      if (s < 0 || s >= g.n_global())
        throw ValidationError("diffusion: seed outside the node universe");
      influenced_[static_cast<std::size_t>(s)] = 1;
    }
    if (spec_.kind == DiffusionKind::LT) {
      // Thresholds model a per-user trait: one draw per simulation.
      lt_thresholds_.resize(static_cast<std::size_t>(g.n_global()));
      for (NodeId v = 0; v < g.n_global(); ++v)
        lt_thresholds_[static_cast<std::size_t>(v)] =
            rng_.u01(rng_tag::kLtThreshold, static_cast<std::uint64_t>(v));
    }
  }

  const DiffusionModelSpec& spec() const { return spec_; }
  bool influenced(NodeId v) const { return influenced_[static_cast<std::size_t>(v)] != 0; }
  void mark_influenced(NodeId v) { influenced_[static_cast<std::size_t>(v)] = 1; }
  std::size_t influenced_count() const {
    std::size_t c = 0;
    for (auto b : influenced_) c += b;
    return c;
  }
  std::vector<NodeId> influenced_set() const {
    std::vector<NodeId> out;
    for (std::size_t v = 0; v < influenced_.size(); ++v)
      if (influenced_[v]) out.push_back(static_cast<NodeId>(v));
    return out;
  }
  const std::vector<std::uint8_t>& influenced_flags() const { return influenced_; }
  double lt_threshold(NodeId v) const { return lt_thresholds_[static_cast<std::size_t>(v)]; }

  // IC attempt coin for edge (u,v) at snapshot t under the active policy.
  // OnceEver marks the pair as consumed so the edge is never retried even if
  // its weight later changes.
  bool ic_attempt_succeeds(NodeId u, NodeId v, int t, double weight) {
    if (spec_.attempt_policy == AttemptPolicy::PerSnapshot)
      return rng_.u01(rng_tag::kIcAttempt, static_cast<std::uint64_t>(t),
                      static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(v)) < weight;
    if (!attempted_.insert(pair_key(u, v)).second) return false;
    return rng_.u01(rng_tag::kIcAttemptOnce, static_cast<std::uint64_t>(u),
                    static_cast<std::uint64_t>(v)) < weight;
  }

  // TR trigger-set membership of u in T_v. PerSnapshot resamples per (v, t)
  // with inclusion probability equal to the current edge weight; OnceEver
  // freezes T_v at the first snapshot where v is checked.
  bool tr_trigger_contains(const Snapshot& snap, NodeId v, NodeId u, int t, double weight) {
    if (spec_.attempt_policy == AttemptPolicy::PerSnapshot)
      return rng_.u01(rng_tag::kTrTrigger, static_cast<std::uint64_t>(t),
                      static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(u)) < weight;
    auto it = tr_triggers_.find(v);
    if (it == tr_triggers_.end()) {
      std::unordered_set<NodeId> trig;
      for (const auto& [w_src, w_weight] : snap.in_neighbors(v))
        if (rng_.u01(rng_tag::kTrTriggerOnce, static_cast<std::uint64_t>(v),
                     static_cast<std::uint64_t>(w_src)) < w_weight)
          trig.insert(w_src);
      it = tr_triggers_.emplace(v, std::move(trig)).first;
    }
    return it->second.count(u) != 0;
  }

  // Materialized trigger set of v at snapshot t (inspection/testing aid).
  std::vector<NodeId> trigger_set(const Snapshot& snap, NodeId v, int t) {
    std::vector<NodeId> out;
    for (const auto& [u, w] : snap.in_neighbors(v))
      if (tr_trigger_contains(snap, v, u, t, w)) out.push_back(u);
    return out;
  }

 private:
  static std::uint64_t pair_key(NodeId u, NodeId v) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(v);
  }

  DiffusionModelSpec spec_;
  RandomStream rng_;
  std::vector<std::uint8_t> influenced_;
  std::vector<double> lt_thresholds_;
  std::unordered_map<NodeId, std::unordered_set<NodeId>> tr_triggers_;  // OnceEver memo
  std::unordered_set<std::uint64_t> attempted_;                         // OnceEver keys
};

inline DiffusionState init_state(const DynamicGraph& g, const DiffusionModelSpec& spec,
                                 const std::vector<NodeId>& seeds, RandomStream rng) {
  return DiffusionState(g, spec, seeds, rng);
}

// One IC hop: every frontier node attempts each of its current out-edges.
// Returns the newly influenced present nodes.
inline std::vector<NodeId> step_ic(const Snapshot& snap, DiffusionState& state,
                                   const std::vector<NodeId>& frontier) {
  std::vector<NodeId> fresh;
  for (NodeId u : frontier) {
    for (const auto& [v, w] : snap.out_neighbors(u)) {
      if (state.influenced(v)) continue;
      if (state.ic_attempt_succeeds(u, v, snap.index(), w)) {
        state.mark_influenced(v);
        fresh.push_back(v);
      }
    }
  }
  return fresh;
}

// One LT sweep: activates every uninfluenced present node whose influenced
// in-neighbor weight mass meets its threshold (>=).
inline std::vector<NodeId> step_lt(const Snapshot& snap, DiffusionState& state) {
  std::vector<NodeId> fresh;
  for (NodeId v : snap.nodes()) {
    if (state.influenced(v)) continue;
    double mass = 0.0;
    for (const auto& [u, w] : snap.in_neighbors(v))
      if (state.influenced(u)) mass += w;
    if (mass >= state.lt_threshold(v)) fresh.push_back(v);
  }
  for (NodeId v : fresh) state.mark_influenced(v);
  return fresh;
}

// One TR hop: an uninfluenced node activates when some frontier in-neighbor
// belongs to its trigger set.
inline std::vector<NodeId> step_tr(const Snapshot& snap, DiffusionState& state,
                                   const std::vector<NodeId>& frontier) {
  std::vector<std::uint8_t> in_frontier(static_cast<std::size_t>(snap.n_global()), 0);
  for (NodeId u : frontier) in_frontier[static_cast<std::size_t>(u)] = 1;
  std::vector<NodeId> fresh;
  for (NodeId v : snap.nodes()) {
    if (state.influenced(v)) continue;
    for (const auto& [u, w] : snap.in_neighbors(v)) {
      if (!in_frontier[static_cast<std::size_t>(u)]) continue;
      if (state.tr_trigger_contains(snap, v, u, snap.index(), w)) {
        fresh.push_back(v);
        break;
      }
    }
  }
  for (NodeId v : fresh) state.mark_influenced(v);
  return fresh;
}

// Runs one snapshot to quiescence (or hop_cap hops). The initial frontier is
// every influenced present node, so carried-over influence keeps diffusing.
inline void run_snapshot(const Snapshot& snap, DiffusionState& state) {
  std::vector<NodeId> frontier;
  for (NodeId v : snap.nodes())
    if (state.influenced(v)) frontier.push_back(v);
  const int cap = state.spec().hop_cap.value_or(-1);
  for (int hop = 0; cap < 0 || hop < cap; ++hop) {
    std::vector<NodeId> fresh;
    switch (state.spec().kind) {
      case DiffusionKind::IC: fresh = step_ic(snap, state, frontier); break;
      case DiffusionKind::LT: fresh = step_lt(snap, state); break;
      case DiffusionKind::TR: fresh = step_tr(snap, state, frontier); break;
    }
    if (fresh.empty()) break;
    frontier = std::move(fresh);
  }
}

// Full dynamic run; returns the influenced set after each snapshot. Nodes
// absent from a snapshot keep their state but neither send nor receive there.
inline std::vector<std::vector<NodeId>> run_dynamic(const DynamicGraph& g,
                                                    const DiffusionModelSpec& spec,
                                                    const std::vector<NodeId>& seeds,
                                                    RandomStream rng) {
  DiffusionState state(g, spec, seeds, rng);
  std::vector<std::vector<NodeId>> trajectory;
  trajectory.reserve(static_cast<std::size_t>(g.n_snapshots()));
  for (int t = 0; t < g.n_snapshots(); ++t) {
    run_snapshot(g.snapshot(t), state);
    trajectory.push_back(state.influenced_set());
  }
  return trajectory;
}

}  // namespace dysuse
