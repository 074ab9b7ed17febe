#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dysuse/graph.hpp"

namespace dysuse {

// Parses whitespace-separated `src dst time [weight]` rows; `#` starts a
// comment, blank lines are skipped. Undirected inputs emit both directions,
// reverse immediately after forward.
inline std::vector<TemporalEdgeRecord> load_temporal_edgelist(std::istream& in, bool directed,
                                                              const std::string& origin = "input") {
  std::vector<TemporalEdgeRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    long long src = 0, dst = 0;
    double time = 0.0;
    if (!(row >> src)) continue;  // blank or comment-only line
    if (!(row >> dst >> time))
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected `src dst time [weight]`");
    TemporalEdgeRecord rec;
    double w = 0.0;
    if (row >> w) rec.weight = w;
    std::string trailing;
    if (row >> trailing)
      throw ParseError(origin + ":" + std::to_string(line_no) + ": trailing token `" +
                       trailing + "`");
    if (src < 0 || dst < 0)
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": negative node id");
    rec.src = static_cast<NodeId>(src);
    rec.dst = static_cast<NodeId>(dst);
    rec.time = time;
    records.push_back(rec);
    if (!directed) {
      TemporalEdgeRecord rev = rec;
      rev.src = rec.dst;
      rev.dst = rec.src;
      records.push_back(rev);
    }
  }
  return records;
}

inline std::vector<TemporalEdgeRecord> load_temporal_edgelist(const std::string& path,
                                                              bool directed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list: " + path);
  return load_temporal_edgelist(in, directed, path);
}

namespace detail {
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}
}  // namespace detail

// Self-describing text archive:
//   dysuse-graph v1 N T
//   snapshot t |V| |E|
//   <|V| node ids> <|E| lines `u v w`>
// Weights use 17 significant digits so the round-trip is bit-faithful.
inline std::string write_graph_archive(const DynamicGraph& g) {
  std::string out;
  out += "dysuse-graph v1 " + std::to_string(g.n_global()) + " " +
         std::to_string(g.n_snapshots()) + "\n";
  for (int t = 0; t < g.n_snapshots(); ++t) {
    const Snapshot& s = g.snapshot(t);
    out += "snapshot " + std::to_string(t) + " " + std::to_string(s.nodes().size()) + " " +
           std::to_string(s.edges().size()) + "\n";
    for (std::size_t i = 0; i < s.nodes().size(); ++i) {
      out += std::to_string(s.nodes()[i]);
      out += (i + 1 == s.nodes().size()) ? '\n' : ' ';
    }
    if (s.nodes().empty()) out += '\n';
    for (const Edge& e : s.edges())
      out += std::to_string(e.src) + " " + std::to_string(e.dst) + " " +
             detail::format_g17(e.weight) + "\n";
  }
  return out;
}

inline void save_graph_archive(const DynamicGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write graph archive: " + path);
  out << write_graph_archive(g);
  if (!out) throw IoError("failed writing graph archive: " + path);
}

inline DynamicGraph read_graph_archive(std::istream& in, const std::string& origin = "archive") {
  std::string magic, version;
  long long n = 0, t_count = 0;
  if (!(in >> magic >> version >> n >> t_count) || magic != "dysuse-graph")
    throw ParseError(origin + ": not a dysuse-graph archive");
  if (version != "v1") throw ParseError(origin + ": unsupported archive version " + version);
  if (n < 0 || t_count <= 0) throw ParseError(origin + ": bad header counts");
  std::vector<Snapshot> snaps;
  for (long long t = 0; t < t_count; ++t) {
    std::string kw;
    long long idx = 0, nv = 0, ne = 0;
    if (!(in >> kw >> idx >> nv >> ne) || kw != "snapshot" || idx != t)
      throw ParseError(origin + ": malformed snapshot header at t=" + std::to_string(t));
    std::vector<NodeId> nodes(static_cast<std::size_t>(nv));
    for (auto& v : nodes)
      if (!(in >> v)) throw ParseError(origin + ": truncated node list at t=" + std::to_string(t));
    std::vector<Edge> edges(static_cast<std::size_t>(ne));
    for (auto& e : edges)
      if (!(in >> e.src >> e.dst >> e.weight))
        throw ParseError(origin + ": truncated edge list at t=" + std::to_string(t));
    snaps.emplace_back(static_cast<int>(t), static_cast<NodeId>(n), std::move(nodes),
                       std::move(edges));
  }
  return DynamicGraph(static_cast<NodeId>(n), std::move(snaps));
}

inline DynamicGraph load_graph_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open graph archive: " + path);
  return read_graph_archive(in, path);
}

inline std::uint64_t graph_fingerprint(const DynamicGraph& g) {
  return fnv1a64(write_graph_archive(g));
}

}  // namespace dysuse
