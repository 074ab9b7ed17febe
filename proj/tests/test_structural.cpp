#include <catch2/catch_amalgamated.hpp>

#include "dysuse/structural.hpp"
#include "grad_check.hpp"

using namespace dysuse;

namespace {

std::vector<double> forward_values(const StructuralModule& m, const Snapshot& snap,
                                   const std::vector<double>& x0,
                                   const std::vector<NodeId>& seeds) {
  Tape tape(false);
  const Tensor x = make_constant({x0.size(), 1}, x0);
  return m.forward(tape, snap, x, seeds).value();
}

std::uint64_t param_checksum(const StructuralModule& m) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Tensor& p : m.parameters())
    h = fnv1a64(p.value().data(), p.value().size() * sizeof(double), h);
  return h;
}

CoupledGnn make_coupled(int layers = 2, std::size_t h = 3, std::uint64_t seed = 11) {
  StructuralConfig cfg;
  cfg.layers = layers;
  cfg.rep_dim = h;
  cfg.gate_hidden = 4;
  SeqRng rng(seed, 0, rng_tag::kParamInit);
  return CoupledGnn(cfg, seed, rng);
}

}  // namespace

TEST_CASE("influ_gate") {
  Tape tape;
  SECTION("hand arithmetic with identity projection") {
    const Tensor r_u = make_constant({1, 1}, {2.0});
    const Tensor r_v = make_constant({1, 1}, {3.0});
    const Tensor w = make_constant({1, 1}, {1.0});
    const Tensor beta = make_constant({2, 1}, {1.0, 1.0});
    CHECK(influ_gate(tape, r_u, r_v, w, beta).scalar() == 5.0);
  }
  SECTION("zero beta gives zero gate") {
    const Tensor r_u = make_constant({1, 2}, {0.4, -0.7});
    const Tensor r_v = make_constant({1, 2}, {0.1, 0.9});
    const Tensor w = make_constant({2, 2}, {1.0, 0.5, -0.5, 1.0});
    const Tensor beta = make_constant({4, 1}, {0.0, 0.0, 0.0, 0.0});
    CHECK(influ_gate(tape, r_u, r_v, w, beta).scalar() == 0.0);
  }
  SECTION("gate is linear in beta") {
    const Tensor r_u = make_constant({1, 2}, {0.4, -0.7});
    const Tensor r_v = make_constant({1, 2}, {0.1, 0.9});
    const Tensor w = make_constant({2, 2}, {1.0, 0.5, -0.5, 1.0});
    const Tensor beta = make_constant({4, 1}, {0.3, -0.2, 0.8, 0.1});
    const Tensor beta2 = make_constant({4, 1}, {0.6, -0.4, 1.6, 0.2});
    const double g1 = influ_gate(tape, r_u, r_v, w, beta).scalar();
    const double g2 = influ_gate(tape, r_u, r_v, w, beta2).scalar();
    CHECK(g2 == Catch::Approx(2.0 * g1).margin(1e-14));
  }
}

TEST_CASE("state aggregate and combine") {
  Tape tape;
  // edges into node 2 from 0 and 1
  auto g = make_graph(3, {{{0, 2, 1.0}, {1, 2, 1.0}}});
  const auto idx = structural_detail::edge_index(g.snapshot(0));

  SECTION("zero features aggregate to zero") {
    const Tensor x = make_constant({3, 1}, {0.0, 0.0, 0.0});
    const Tensor gate = make_constant({2, 1}, {0.7, 0.4});
    const auto a = state_aggregate(tape, idx, x, gate, 3).value();
    CHECK(a == std::vector<double>{0.0, 0.0, 0.0});
  }
  SECTION("gates sum over in-neighbors with unit features") {
    const Tensor x = make_constant({3, 1}, {1.0, 1.0, 0.0});
    const Tensor gate = make_constant({2, 1}, {0.2, 0.3});
    const auto a = state_aggregate(tape, idx, x, gate, 3).value();
    CHECK(a[2] == Catch::Approx(0.5).margin(1e-15));
    CHECK(a[0] == 0.0);
  }
  SECTION("combine clamps seeds and passes sigma(0)=0.5 for zero weights") {
    const auto masks = structural_detail::seed_masks(3, {0});
    const Tensor x = make_constant({3, 1}, {0.3, 0.9, 0.2});
    const Tensor a = make_constant({3, 1}, {5.0, -2.0, 0.4});
    const Tensor zero = make_scalar(0.0);
    const auto out = state_combine(tape, x, a, zero, zero, masks).value();
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 0.5);
    CHECK(out[2] == 0.5);
  }
  SECTION("combine is increasing in a for positive mu_a") {
    const auto masks = structural_detail::seed_masks(3, {});
    const Tensor x = make_constant({3, 1}, {0.3, 0.3, 0.3});
    const Tensor a_lo = make_constant({3, 1}, {0.1, 0.2, 0.3});
    const Tensor a_hi = make_constant({3, 1}, {0.2, 0.3, 0.4});
    const Tensor one = make_scalar(1.0);
    const auto lo = state_combine(tape, x, a_lo, one, one, masks).value();
    const auto hi = state_combine(tape, x, a_hi, one, one, masks).value();
    for (std::size_t i = 0; i < 3; ++i) CHECK(hi[i] > lo[i]);
  }
}

TEST_CASE("influence aggregate and combine") {
  Tape tape;
  SECTION("zero edge weights give zero aggregation") {
    auto g = make_graph(3, {{{0, 2, 0.0}, {1, 2, 0.0}}});
    const auto idx = structural_detail::edge_index(g.snapshot(0));
    const Tensor sg = make_constant({3, 1}, {0.9, 0.8, 0.7});
    const Tensor wr = make_constant({3, 2}, {1, 2, 3, 4, 5, 6});
    const auto b = influence_aggregate(tape, idx, sg, wr, 3).value();
    for (double v : b) CHECK(v == 0.0);
  }
  SECTION("single in-neighbor product") {
    auto g = make_graph(2, {{{0, 1, 0.25}}});
    const auto idx = structural_detail::edge_index(g.snapshot(0));
    const Tensor sg = make_constant({2, 1}, {0.5, 0.9});
    const Tensor wr = make_constant({2, 2}, {2.0, 4.0, 1.0, 1.0});
    const auto b = influence_aggregate(tape, idx, sg, wr, 2).value();
    // b_1 = 0.5 * 0.25 * (2, 4)
    CHECK(b[2] == Catch::Approx(0.25).margin(1e-15));
    CHECK(b[3] == Catch::Approx(0.5).margin(1e-15));
  }
  SECTION("zeta_b = 0 decouples from b; finite differences agree") {
    const Tensor wr = make_param({2, 2}, {0.3, -0.4, 0.8, 0.2});
    const Tensor b = make_param({2, 2}, {0.5, 0.5, -0.1, 0.7});
    const Tensor zr = make_param({1}, {0.9});
    const Tensor zb = make_param({1}, {0.0});
    Tape t0(false);
    const auto only_r = influence_combine(t0, wr, b, zr, zb, 0.01).value();
    const Tensor b2 = make_constant({2, 2}, {9.0, -9.0, 9.0, -9.0});
    const auto only_r2 = influence_combine(t0, wr, b2, zr, zb, 0.01).value();
    CHECK(only_r == only_r2);
    check_gradients({wr, b, zr, zb}, [&](Tape& t) {
      return t.sum(influence_combine(t, wr, b, zr, zb, 0.01));
    });
  }
}

TEST_CASE("coupledgnn forward contracts") {
  auto g = make_graph(5, {{{0, 1, 0.5}, {1, 2, 0.5}, {0, 2, 0.5}, {3, 4, 1.0}},
                          {{0, 1, 0.25}, {1, 2, 0.75}, {3, 4, 0.5}, {4, 3, 0.5}}});
  auto model = make_coupled(3, 3, 21);
  const std::vector<NodeId> seeds = {0};
  std::vector<double> x0(5, 0.0);
  x0[0] = 1.0;

  SECTION("outputs in [0,1], seeds exactly 1 at every layer") {
    Tape tape(false);
    std::vector<Tensor> layer_xs;
    const Tensor x = make_constant({5, 1}, x0);
    model.forward(tape, g.snapshot(0), x, seeds, &layer_xs);
    REQUIRE(layer_xs.size() == 3);
    for (const Tensor& lx : layer_xs) {
      CHECK(lx.value()[0] == 1.0);
      for (double v : lx.value()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  SECTION("parameter sharing across snapshots") {
    const std::uint64_t before = param_checksum(model);
    forward_values(model, g.snapshot(0), x0, seeds);
    forward_values(model, g.snapshot(1), x0, seeds);
    CHECK(param_checksum(model) == before);
  }
  SECTION("all-zero parameters give 0.5 for non-seeds") {
    auto zeroed = make_coupled(2, 3, 5);
    for (const Tensor& p : zeroed.parameters())
      std::fill(p.raw()->value.begin(), p.raw()->value.end(), 0.0);
    const auto out = forward_values(zeroed, g.snapshot(0), x0, seeds);
    CHECK(out[0] == 1.0);
    for (std::size_t v = 1; v < out.size(); ++v) CHECK(out[v] == 0.5);
  }
  SECTION("locality: a disconnected component does not change the rest, bit-exact") {
    auto g1 = make_graph(5, {{{0, 1, 0.5}, {3, 4, 0.2}}});
    auto g2 = make_graph(5, {{{0, 1, 0.5}, {4, 3, 0.9}}});
    const auto o1 = forward_values(model, g1.snapshot(0), x0, seeds);
    const auto o2 = forward_values(model, g2.snapshot(0), x0, seeds);
    CHECK(o1[0] == o2[0]);
    CHECK(o1[1] == o2[1]);
    CHECK(o1[2] == o2[2]);
  }
  SECTION("no edges: every non-seed follows the same sigma chain") {
    std::vector<std::vector<NodeId>> nodes = {{0, 1, 2, 3, 4}};
    auto empty = make_graph(5, {{}}, &nodes);
    const auto out = forward_values(model, empty.snapshot(0), x0, seeds);
    CHECK(out[0] == 1.0);
    for (std::size_t v = 2; v < out.size(); ++v) CHECK(out[v] == out[1]);
  }
  SECTION("influence pre-embedding is deterministic and bounded") {
    const auto r1 = make_coupled(2, 4, 9).influence_init(6);
    const auto r2 = make_coupled(2, 4, 9).influence_init(6);
    CHECK(r1.value() == r2.value());
    for (double v : r1.value()) CHECK(std::abs(v) <= 0.5 / 4.0);
  }
}

TEST_CASE("coupledgnn gradients match finite differences") {
  auto g = make_graph(4, {{{0, 1, 0.5}, {1, 2, 0.7}, {2, 3, 0.3}, {0, 3, 0.9}}});
  auto model = make_coupled(2, 3, 31);
  const std::vector<NodeId> seeds = {0};
  std::vector<double> x0(4, 0.0);
  x0[0] = 1.0;
  const std::vector<double> target = {1.0, 0.6, 0.4, 0.3};
  check_gradients(model.parameters(), [&](Tape& t) {
    const Tensor x = make_constant({4, 1}, x0);
    const Tensor out = model.forward(t, g.snapshot(0), x, seeds);
    return t.mae(out, make_constant({4, 1}, target));
  });
}

TEST_CASE("gcn variant") {
  StructuralConfig cfg;
  cfg.layers = 2;
  SeqRng rng(3, 0, rng_tag::kParamInit);
  GcnModule gcn(cfg, rng);
  auto g = make_graph(3, {{{0, 1, 1.0}, {1, 2, 0.5}}});
  std::vector<double> x0 = {1.0, 0.0, 0.0};

  SECTION("zero params give 0.5 for non-seeds, seeds clamped") {
    GcnModule zeroed(cfg, rng);
    for (const Tensor& p : zeroed.parameters())
      std::fill(p.raw()->value.begin(), p.raw()->value.end(), 0.0);
    const auto out = forward_values(zeroed, g.snapshot(0), x0, {0});
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 0.5);
    CHECK(out[2] == 0.5);
  }
  SECTION("positive edge from the seed lifts the target above 0.5") {
    const auto out = forward_values(gcn, g.snapshot(0), x0, {0});
    CHECK(out[0] == 1.0);
    CHECK(out[1] > 0.5);
    for (double v : out) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  SECTION("gradients match finite differences") {
    check_gradients(gcn.parameters(), [&](Tape& t) {
      const Tensor x = make_constant({3, 1}, x0);
      const Tensor out = gcn.forward(t, g.snapshot(0), x, {0});
      return t.mae(out, make_constant({3, 1}, {1.0, 0.8, 0.4}));
    });
  }
}
