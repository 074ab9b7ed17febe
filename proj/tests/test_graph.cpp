#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "dysuse/graph.hpp"
#include "dysuse/graph_gen.hpp"
#include "dysuse/graph_io.hpp"

using namespace dysuse;

TEST_CASE("edge list parsing") {
  SECTION("directed rows in file order") {
    std::istringstream in("0 1 3\n1 2 5\n");
    const auto recs = load_temporal_edgelist(in, true);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].src == 0);
    CHECK(recs[0].dst == 1);
    CHECK(recs[0].time == 3.0);
    CHECK(recs[1].src == 1);
    CHECK(recs[1].dst == 2);
    CHECK(recs[1].time == 5.0);
  }
  SECTION("undirected emits both directions") {
    std::istringstream in("0 1 3\n");
    const auto recs = load_temporal_edgelist(in, false);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].src == 0);
    CHECK(recs[0].dst == 1);
    CHECK(recs[1].src == 1);
    CHECK(recs[1].dst == 0);
    CHECK(recs[1].time == 3.0);
  }
  SECTION("malformed line reports the line number") {
    std::istringstream in("0 1 2\n0 x 3\n");
    try {
      load_temporal_edgelist(in, true, "f");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("f:2") != std::string::npos);
    }
  }
  SECTION("negative ids rejected") {
    std::istringstream in("0 -1 2\n");
    CHECK_THROWS_AS(load_temporal_edgelist(in, true), ValidationError);
  }
  SECTION("comments and weights") {
    std::istringstream in("# header\n0 1 2 0.25\n\n");
    const auto recs = load_temporal_edgelist(in, true);
    REQUIRE(recs.size() == 1);
    REQUIRE(recs[0].weight.has_value());
    CHECK(*recs[0].weight == 0.25);
  }
}

TEST_CASE("snapshot invariants") {
  CHECK_THROWS_AS(Snapshot(0, 3, {0, 1}, {{0, 2, 0.5}}), ValidationError);   // endpoint absent
  CHECK_THROWS_AS(Snapshot(0, 3, {0, 1}, {{0, 1, 1.5}}), ValidationError);   // weight range
  CHECK_THROWS_AS(Snapshot(0, 3, {0, 1}, {{0, 1, 0.5}, {0, 1, 0.5}}), ValidationError);
  CHECK_THROWS_AS(Snapshot(0, 3, {0, 1}, {{0, 0, 0.5}}), ValidationError);   // self loop
  CHECK_THROWS_AS(Snapshot(0, 2, {0, 5}, {}), ValidationError);              // id beyond N
}

TEST_CASE("build_snapshots splits edges evenly and cumulatively") {
  std::vector<TemporalEdgeRecord> recs;
  // a 10-edge path, times 0..9
  for (NodeId i = 0; i < 10; ++i) recs.push_back({i, i + 1, static_cast<double>(i), std::nullopt});
  const auto g = build_snapshots(recs, 2, 0.5);
  CHECK(g.n_snapshots() == 2);
  CHECK(g.snapshot(0).edges().size() == 5);
  CHECK(g.snapshot(1).edges().size() == 10);
  // edge-monotone before perturbation
  for (const Edge& e : g.snapshot(0).edges()) {
    bool found = false;
    for (const Edge& f : g.snapshot(1).edges()) found = found || (e.src == f.src && e.dst == f.dst);
    CHECK(found);
  }
}

TEST_CASE("build_snapshots keeps only the largest initial component") {
  // Earliest half: component A = path 0-1-2-3 (3 edges), component B = path
  // 10-11-12 (2 edges). Later edges attach B to A.
  std::vector<TemporalEdgeRecord> recs = {
      {0, 1, 0.0, std::nullopt},  {1, 2, 1.0, std::nullopt},   {2, 3, 2.0, std::nullopt},
      {10, 11, 3.0, std::nullopt}, {11, 12, 4.0, std::nullopt},
      {3, 10, 5.0, std::nullopt}, {10, 0, 6.0, std::nullopt},  {12, 0, 7.0, std::nullopt},
      {1, 12, 8.0, std::nullopt}, {2, 11, 9.0, std::nullopt},
  };
  const auto g = build_snapshots(recs, 2, 0.5);
  // computed by hand via union-find on the first 5 records
  CHECK(g.snapshot(0).edges().size() == 3);
  CHECK(g.snapshot(0).nodes() == std::vector<NodeId>{0, 1, 2, 3});
  CHECK(g.snapshot(1).edges().size() == 8);
  SECTION("degenerate T=1 keeps only the initial component") {
    const auto g1 = build_snapshots(recs, 1, 0.5);
    CHECK(g1.n_snapshots() == 1);
    CHECK(g1.snapshot(0).edges().size() == 3);
  }
}

TEST_CASE("assign_weights sets 1/d_in per snapshot") {
  auto g = make_graph(4, {{{0, 2, 1.0}, {1, 2, 1.0}, {0, 1, 1.0}},
                          {{0, 2, 1.0}, {1, 2, 1.0}, {3, 2, 1.0}, {0, 1, 1.0}, {0, 3, 1.0}}});
  g = assign_weights(g);
  const auto& s0 = g.snapshot(0);
  for (const auto& [u, w] : s0.in_neighbors(2)) CHECK(w == 0.5);
  for (const auto& [u, w] : s0.in_neighbors(1)) CHECK(w == 1.0);
  const auto& s1 = g.snapshot(1);
  for (const auto& [u, w] : s1.in_neighbors(2)) CHECK(w == Catch::Approx(1.0 / 3.0).epsilon(0));
  // in-weights of every node sum to 1
  for (int t = 0; t < g.n_snapshots(); ++t)
    for (NodeId v : g.snapshot(t).nodes()) {
      if (g.snapshot(t).in_degree(v) == 0) continue;
      double sum = 0.0;
      for (const auto& [u, w] : g.snapshot(t).in_neighbors(v)) sum += w;
      CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("perturb_snapshots") {
  std::vector<TemporalEdgeRecord> recs;
  for (NodeId i = 0; i < 10; ++i) recs.push_back({i, i + 1, static_cast<double>(i), std::nullopt});
  const auto g = build_snapshots(recs, 3, 0.4);

  SECTION("zero fractions are the identity") {
    const auto p = perturb_snapshots(g, 0.0, 0.0, 0.0, 0.0, 9);
    REQUIRE(p.n_snapshots() == g.n_snapshots());
    for (int t = 0; t < g.n_snapshots(); ++t) {
      CHECK(p.snapshot(t).edges() == g.snapshot(t).edges());
      CHECK(p.snapshot(t).nodes() == g.snapshot(t).nodes());
    }
  }
  SECTION("fractions >= 1 are rejected") {
    CHECK_THROWS_AS(perturb_snapshots(g, 0.0, 1.0, 0.0, 0.0, 9), ValidationError);
  }
  SECTION("determinism under a fixed seed") {
    const auto a = perturb_snapshots(g, 0.2, 0.2, 0.2, 0.2, 1234);
    const auto b = perturb_snapshots(g, 0.2, 0.2, 0.2, 0.2, 1234);
    REQUIRE(a.n_snapshots() == b.n_snapshots());
    for (int t = 0; t < a.n_snapshots(); ++t) CHECK(a.snapshot(t).edges() == b.snapshot(t).edges());
  }
  SECTION("deletion counts stay within ceil(f*n) and drop incident edges") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto p = perturb_snapshots(g, 0.0, 0.5, 0.0, 0.0, seed);
      for (int t = 1; t < g.n_snapshots(); ++t) {
        const auto& before = g.snapshot(t);
        const auto& after = p.snapshot(t);
        const std::size_t removed = before.nodes().size() - after.nodes().size();
        CHECK(removed <= static_cast<std::size_t>(
                             std::ceil(0.5 * static_cast<double>(before.nodes().size()))));
        for (const Edge& e : after.edges()) {
          CHECK(after.contains(e.src));
          CHECK(after.contains(e.dst));
        }
      }
    }
  }
  SECTION("reserved nodes are never deleted") {
    PerturbOptions opt;
    opt.node_del = 0.9;
    opt.reserved = {0, 1, 2};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = perturb_snapshots(g, opt, seed);
      for (int t = 0; t < p.n_snapshots(); ++t)
        for (NodeId v : {0, 1, 2})
          if (g.snapshot(t).contains(v)) CHECK(p.snapshot(t).contains(v));
    }
  }
  SECTION("added nodes get fresh ids connected to the previous snapshot") {
    // seed 3 draws a positive addition count at t=1 (checked by running).
    const auto p = perturb_snapshots(g, 0.25, 0.0, 0.0, 0.0, 3);
    CHECK(p.n_global() > g.n_global());
    bool saw_added_edge = false;
    for (int t = 1; t < p.n_snapshots(); ++t) {
      for (NodeId v : p.snapshot(t).nodes()) {
        if (v < g.n_global()) continue;
        CHECK(!p.snapshot(0).contains(v));
        const std::size_t deg = p.snapshot(t).in_degree(v) + p.snapshot(t).out_degree(v);
        if (deg > 0) saw_added_edge = true;
      }
    }
    CHECK(saw_added_edge);
  }
}

TEST_CASE("generate_ba") {
  SECTION("m=1 yields a connected tree") {
    const auto recs = generate_ba(5, 1, 7);
    CHECK(recs.size() == 4);
    const auto g = build_snapshots(recs, 1, 1.0);
    CHECK(g.snapshot(0).nodes().size() == 5);  // all nodes in one component
  }
  SECTION("no self loops or duplicate pairs, heavy-tailed degrees") {
    const auto recs = generate_ba(100, 3, 42);
    CHECK(recs.size() == 3 * 97 + 3);
    std::set<std::pair<NodeId, NodeId>> seen;
    std::map<NodeId, int> degree;
    for (const auto& r : recs) {
      CHECK(r.src != r.dst);
      CHECK(seen.insert({r.src, r.dst}).second);
      CHECK(!seen.count({r.dst, r.src}));
      ++degree[r.src];
      ++degree[r.dst];
    }
    std::vector<int> degs;
    for (auto& [v, d] : degree) degs.push_back(d);
    std::sort(degs.begin(), degs.end());
    const int median = degs[degs.size() / 2];
    CHECK(degs.back() > 3 * median);
  }
  SECTION("validation") { CHECK_THROWS_AS(generate_ba(3, 3, 0), ValidationError); }
}

TEST_CASE("seed_sets") {
  // star: center 0 with out-edges to leaves 1..5
  auto star = make_graph(6, {{{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}, {0, 4, 1.0}, {0, 5, 1.0}}});
  SECTION("count=1 returns only the top-degree set") {
    const auto sets = seed_sets(star, 1, 1, 5);
    REQUIRE(sets.size() == 1);
    CHECK(sets[0] == std::vector<NodeId>{0});
  }
  SECTION("degree ties break to the lower id") {
    const auto sets = seed_sets(star, 2, 1, 5);
    CHECK(sets[0] == std::vector<NodeId>{0, 1});
  }
  SECTION("random sets are deterministic, sized k, within V0") {
    const auto a = seed_sets(star, 3, 10, 77);
    const auto b = seed_sets(star, 3, 10, 77);
    REQUIRE(a.size() == 10);
    CHECK(a == b);
    for (const auto& s : a) {
      CHECK(s.size() == 3);
      std::set<NodeId> uniq(s.begin(), s.end());
      CHECK(uniq.size() == 3);
      for (NodeId v : s) CHECK(star.snapshot(0).contains(v));
    }
  }
  SECTION("k too large") { CHECK_THROWS_AS(seed_sets(star, 7, 1, 0), ValidationError); }
}

TEST_CASE("graph archive round trip") {
  std::vector<TemporalEdgeRecord> recs;
  for (NodeId i = 0; i < 12; ++i)
    recs.push_back({i % 7, (i + 3) % 7, static_cast<double>(i), std::nullopt});
  auto g = assign_weights(build_snapshots(recs, 3, 0.5));
  const std::string text = write_graph_archive(g);
  std::istringstream in(text);
  const auto h = read_graph_archive(in);
  CHECK(h.n_global() == g.n_global());
  REQUIRE(h.n_snapshots() == g.n_snapshots());
  for (int t = 0; t < g.n_snapshots(); ++t) {
    CHECK(h.snapshot(t).nodes() == g.snapshot(t).nodes());
    CHECK(h.snapshot(t).edges() == g.snapshot(t).edges());  // bit-faithful weights
  }
  CHECK(write_graph_archive(h) == text);
  CHECK(graph_fingerprint(h) == graph_fingerprint(g));

  SECTION("corrupt archive") {
    std::istringstream bad(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_graph_archive(bad), ParseError);
  }
}
