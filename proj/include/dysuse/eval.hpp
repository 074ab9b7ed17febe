#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>
#include <string>
#include <sys/utsname.h>
#include <thread>
#include <unordered_set>
#include <vector>

#include "dysuse/exact.hpp"
#include "dysuse/mc.hpp"
#include "dysuse/model.hpp"

namespace dysuse {

// Per-node mean absolute error (Table-2 scale).
inline double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw ValidationError("mae: length mismatch");
  if (pred.empty()) throw ValidationError("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

// Top-k node ids by value, excluded ids skipped, ties to the lower id.
inline std::vector<NodeId> top_k(const std::vector<double>& values, std::size_t k,
                                 const std::vector<NodeId>& exclude = {}) {
  std::unordered_set<NodeId> skip(exclude.begin(), exclude.end());
  std::vector<NodeId> ids;
  for (std::size_t v = 0; v < values.size(); ++v)
    if (!skip.count(static_cast<NodeId>(v))) ids.push_back(static_cast<NodeId>(v));
  if (k > ids.size()) throw ValidationError("top_k: k exceeds the candidate count");
  std::sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) {
    const double va = values[static_cast<std::size_t>(a)];
    const double vb = values[static_cast<std::size_t>(b)];
    return va != vb ? va > vb : a < b;
  });
  ids.resize(k);
  return ids;
}

// |top-k(pred) ∩ top-k(truth)| / k with seeds excluded from both rankings.
inline double precision_at_k(const std::vector<double>& pred, const std::vector<double>& truth,
                             std::size_t k, const std::vector<NodeId>& exclude = {}) {
  const auto p = top_k(pred, k, exclude);
  const auto t = top_k(truth, k, exclude);
  std::unordered_set<NodeId> ts(t.begin(), t.end());
  std::size_t hits = 0;
  for (NodeId v : p) hits += ts.count(v);
  return static_cast<double>(hits) / static_cast<double>(k);
}

// Case-study table: both rankings plus overlap marks.
struct TopKOverlapReport {
  std::vector<NodeId> pred_ids, truth_ids;
  std::vector<bool> pred_overlap, truth_overlap;
};

inline TopKOverlapReport topk_overlap_report(const std::vector<double>& pred,
                                             const std::vector<double>& truth, std::size_t k,
                                             const std::vector<NodeId>& exclude = {}) {
  TopKOverlapReport rep;
  rep.pred_ids = top_k(pred, k, exclude);
  rep.truth_ids = top_k(truth, k, exclude);
  std::unordered_set<NodeId> ps(rep.pred_ids.begin(), rep.pred_ids.end());
  std::unordered_set<NodeId> ts(rep.truth_ids.begin(), rep.truth_ids.end());
  for (NodeId v : rep.pred_ids) rep.pred_overlap.push_back(ts.count(v) != 0);
  for (NodeId v : rep.truth_ids) rep.truth_overlap.push_back(ps.count(v) != 0);
  return rep;
}

// Overlapping ids are starred, mirroring the paper's bolding.
inline std::string format_topk_report(const TopKOverlapReport& rep) {
  auto row = [](const char* label, const std::vector<NodeId>& ids,
                const std::vector<bool>& marks) {
    std::string out = label;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out += " #" + std::to_string(ids[i]);
      if (marks[i]) out += "*";
    }
    return out + "\n";
  };
  return row("truth:", rep.truth_ids, rep.truth_overlap) +
         row("model:", rep.pred_ids, rep.pred_overlap);
}

// ---- timing ------------------------------------------------------------------

struct BenchmarkResult {
  double model_forward_seconds = 0.0;  // median
  double mc_seconds = 0.0;             // median, n_sims simulations
  double speedup = 0.0;
  std::size_t n_sims = 0;
  int runs = 0;
  std::string machine;
};

inline std::string machine_descriptor() {
  utsname u{};
  uname(&u);
  return std::string(u.sysname) + " " + u.machine + ", " +
         std::to_string(std::thread::hardware_concurrency()) + " hw threads";
}

namespace eval_detail {
template <class Fn>
double median_seconds(int runs, Fn&& fn) {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    times.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}
}  // namespace eval_detail

// Wall-clock medians over `runs` repetitions of (a) one model forward and
// (b) an n_sims MC estimate, plus their ratio.
inline BenchmarkResult benchmark(const DynamicGraph& g, const DySuseModel& model,
                                 const DiffusionModelSpec& spec, const std::vector<NodeId>& seeds,
                                 std::size_t n_sims, int runs = 5, unsigned workers = 0,
                                 std::uint64_t master_seed = 1) {
  if (runs < 1) throw ValidationError("benchmark: runs must be >= 1");
  BenchmarkResult res;
  res.n_sims = n_sims;
  res.runs = runs;
  res.machine = machine_descriptor();
  volatile double sink = 0.0;
  res.model_forward_seconds = eval_detail::median_seconds(runs, [&] {
    const auto y = model.predict(g, seeds);
    sink = sink + y[0];
  });
  res.mc_seconds = eval_detail::median_seconds(runs, [&] {
    const auto table = estimate_susceptibility(g, spec, seeds, n_sims, master_seed, workers);
    sink = sink + table.values[0][0];
  });
  res.speedup = res.mc_seconds / res.model_forward_seconds;
  return res;
}

// The static-comparison protocol: the same model architecture restricted to
// the final snapshot (T = 1).
inline DynamicGraph last_snapshot_graph(const DynamicGraph& g) {
  const Snapshot& s = g.snapshot(g.n_snapshots() - 1);
  std::vector<Snapshot> one;
  one.emplace_back(0, g.n_global(), s.nodes(), s.edges());
  return DynamicGraph(g.n_global(), std::move(one));
}

}  // namespace dysuse
