#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dysuse/diffusion.hpp"
#include "dysuse/graph.hpp"
#include "dysuse/graph_gen.hpp"
#include "dysuse/graph_io.hpp"
#include "dysuse/parallel.hpp"
#include "dysuse/susceptibility.hpp"

namespace dysuse {

// Monte-Carlo susceptibility: values[t][v] = fraction of simulations with v
// influenced by the end of snapshot t. Simulation d draws from the stream
// keyed (master_seed, d), so the table is bit-identical for any worker count.
inline SusceptibilityTable estimate_susceptibility(const DynamicGraph& g,
                                                   const DiffusionModelSpec& spec,
                                                   const std::vector<NodeId>& seeds,
                                                   std::size_t n_sims,
                                                   std::uint64_t master_seed,
                                                   unsigned workers = 0) {
  if (n_sims < 1) throw ValidationError("estimate_susceptibility: n_sims must be >= 1");
  spec.validate();
  const auto t_count = static_cast<std::size_t>(g.n_snapshots());
  const auto n = static_cast<std::size_t>(g.n_global());

  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_sims));
  std::vector<std::vector<std::uint64_t>> counts(
      workers, std::vector<std::uint64_t>(t_count * n, 0));

  parallel_ranges(n_sims, workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    std::vector<std::uint64_t>& local = counts[w];
    for (std::size_t d = begin; d < end; ++d) {
      DiffusionState state(g, spec, seeds, RandomStream(master_seed, d));
      for (std::size_t t = 0; t < t_count; ++t) {
        run_snapshot(g.snapshot(static_cast<int>(t)), state);
        const auto& flags = state.influenced_flags();
        std::uint64_t* row = local.data() + t * n;
        for (std::size_t v = 0; v < n; ++v) row[v] += flags[v];
      }
    }
  });

  SusceptibilityTable table;
  table.n_simulations = n_sims;
  table.seeds = seeds;
  table.values.assign(t_count, std::vector<double>(n, 0.0));
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t v = 0; v < n; ++v) {
      std::uint64_t c = 0;
      for (unsigned w = 0; w < workers; ++w) c += counts[w][t * n + v];
      table.values[t][v] = static_cast<double>(c) / static_cast<double>(n_sims);
    }
  }
  return table;
}

struct GroundTruthRecord {
  std::vector<NodeId> seeds;
  SusceptibilityTable table;
};

struct GroundTruthDataset {
  std::vector<GroundTruthRecord> records;
  std::uint64_t graph_fingerprint = 0;
  DiffusionModelSpec spec;
  std::size_t n_simulations = 0;
  std::uint64_t master_seed = 0;
};

// One MC table per (size, set), sets drawn by seed_sets (count-1 random plus
// one top-degree set per size). Per-record simulation streams are offset so
// no two records share randomness.
inline GroundTruthDataset generate_ground_truth(const DynamicGraph& g,
                                                const DiffusionModelSpec& spec,
                                                const std::vector<std::size_t>& seed_sizes,
                                                std::size_t sets_per_size, std::size_t n_sims,
                                                std::uint64_t master_seed, unsigned workers = 0) {
  GroundTruthDataset ds;
  ds.graph_fingerprint = graph_fingerprint(g);
  ds.spec = spec;
  ds.n_simulations = n_sims;
  ds.master_seed = master_seed;
  std::uint64_t record_index = 0;
  for (std::size_t size_idx = 0; size_idx < seed_sizes.size(); ++size_idx) {
    const auto sets =
        seed_sets(g, seed_sizes[size_idx], sets_per_size, master_seed + 1 + size_idx);
    for (const auto& s : sets) {
      const std::uint64_t record_seed =
          master_seed ^ (0x9E3779B97F4A7C15ull * (record_index + 1));
      ds.records.push_back({s, estimate_susceptibility(g, spec, s, n_sims, record_seed, workers)});
      ++record_index;
    }
  }
  return ds;
}

// ---- CSV serialization -----------------------------------------------------
//
// Values file: header `seed_set_id,t,node,value`, one row per (record, t, v).
// Sidecar metadata: `key = value` lines plus one `seed_set` line per record.

inline std::string ground_truth_csv(const GroundTruthDataset& ds) {
  std::string out = "seed_set_id,t,node,value\n";
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& table = ds.records[i].table;
    for (int t = 0; t < table.n_timestamps(); ++t)
      for (NodeId v = 0; v < table.n_nodes(); ++v)
        out += std::to_string(i) + "," + std::to_string(t) + "," + std::to_string(v) + "," +
               detail::format_g17(table.values[static_cast<std::size_t>(t)]
                                              [static_cast<std::size_t>(v)]) +
               "\n";
  }
  return out;
}

inline std::string ground_truth_meta(const GroundTruthDataset& ds) {
  std::ostringstream out;
  out << "format = dysuse-truth v1\n";
  out << "graph_hash = " << ds.graph_fingerprint << "\n";
  out << "model = " << to_string(ds.spec.kind) << "\n";
  out << "attempt_policy = "
      << (ds.spec.attempt_policy == AttemptPolicy::PerSnapshot ? "per-snapshot" : "once-ever")
      << "\n";
  out << "hop_cap = " << (ds.spec.hop_cap ? std::to_string(*ds.spec.hop_cap) : "none") << "\n";
  out << "n_sims = " << ds.n_simulations << "\n";
  out << "master_seed = " << ds.master_seed << "\n";
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    out << "seed_set " << i << " " << ds.records[i].seeds.size();
    for (NodeId v : ds.records[i].seeds) out << " " << v;
    out << "\n";
  }
  return out.str();
}

inline void save_ground_truth(const GroundTruthDataset& ds, const std::string& csv_path,
                              const std::string& meta_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write ground truth csv: " + csv_path);
  csv << ground_truth_csv(ds);
  std::ofstream meta(meta_path, std::ios::binary);
  if (!meta) throw IoError("cannot write ground truth metadata: " + meta_path);
  meta << ground_truth_meta(ds);
}

inline GroundTruthDataset load_ground_truth(const std::string& csv_path,
                                            const std::string& meta_path) {
  GroundTruthDataset ds;
  std::ifstream meta(meta_path);
  if (!meta) throw IoError("cannot open ground truth metadata: " + meta_path);
  std::string line;
  while (std::getline(meta, line)) {
    std::istringstream row(line);
    std::string key;
    row >> key;
    if (key == "seed_set") {
      std::size_t id = 0, sz = 0;
      if (!(row >> id >> sz)) throw ParseError(meta_path + ": malformed seed_set line");
      if (id != ds.records.size()) throw ParseError(meta_path + ": seed_set ids out of order");
      GroundTruthRecord rec;
      rec.seeds.resize(sz);
      for (auto& v : rec.seeds)
        if (!(row >> v)) throw ParseError(meta_path + ": truncated seed_set line");
      ds.records.push_back(std::move(rec));
    } else if (key == "graph_hash") {
      std::string eq;
      row >> eq >> ds.graph_fingerprint;
    } else if (key == "model") {
      std::string eq, kind;
      row >> eq >> kind;
      ds.spec.kind = diffusion_kind_from_string(kind);
    } else if (key == "attempt_policy") {
      std::string eq, pol;
      row >> eq >> pol;
      ds.spec.attempt_policy =
          pol == "once-ever" ? AttemptPolicy::OnceEver : AttemptPolicy::PerSnapshot;
    } else if (key == "hop_cap") {
      std::string eq, cap;
      row >> eq >> cap;
      if (cap != "none" && !cap.empty()) ds.spec.hop_cap = std::stoi(cap);
    } else if (key == "n_sims") {
      std::string eq;
      row >> eq >> ds.n_simulations;
    } else if (key == "master_seed") {
      std::string eq;
      row >> eq >> ds.master_seed;
    }
  }

  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot open ground truth csv: " + csv_path);
  if (!std::getline(csv, line) || line != "seed_set_id,t,node,value")
    throw ParseError(csv_path + ": missing ground-truth CSV header");
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t id = 0;
    int t = 0;
    NodeId v = 0;
    double value = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> id >> c1 >> t >> c2 >> v >> c3 >> value) || c1 != ',' || c2 != ',' || c3 != ',')
      throw ParseError(csv_path + ":" + std::to_string(line_no) + ": malformed row");
    if (id >= ds.records.size())
      throw ParseError(csv_path + ":" + std::to_string(line_no) + ": unknown seed_set_id");
    auto& table = ds.records[id].table;
    if (table.values.size() <= static_cast<std::size_t>(t))
      table.values.resize(static_cast<std::size_t>(t) + 1);
    auto& roww = table.values[static_cast<std::size_t>(t)];
    if (roww.size() <= static_cast<std::size_t>(v)) roww.resize(static_cast<std::size_t>(v) + 1);
    roww[static_cast<std::size_t>(v)] = value;
  }
  for (auto& rec : ds.records) {
    rec.table.n_simulations = ds.n_simulations;
    rec.table.seeds = rec.seeds;
  }
  return ds;
}

}  // namespace dysuse
