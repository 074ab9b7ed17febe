#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "dysuse/temporal.hpp"
#include "grad_check.hpp"

using namespace dysuse;

namespace {
TemporalBlock make_block(int t_count, int layers = 1,
                         MaskOrientation o = MaskOrientation::Causal) {
  TemporalConfig cfg;
  cfg.t_count = t_count;
  cfg.layers = layers;
  cfg.orientation = o;
  SeqRng rng(5, 0, rng_tag::kParamInit);
  return TemporalBlock(cfg, rng);
}
}  // namespace

TEST_CASE("attention masks") {
  const double inf = std::numeric_limits<double>::infinity();
  SECTION("causal opens j <= i") {
    const auto m = attention_mask(3, MaskOrientation::Causal).value();
    CHECK(m == std::vector<double>{0, -inf, -inf, 0, 0, -inf, 0, 0, 0});
  }
  SECTION("paper-literal opens i <= j") {
    const auto m = attention_mask(3, MaskOrientation::PaperLiteral).value();
    CHECK(m == std::vector<double>{0, 0, 0, -inf, 0, 0, -inf, -inf, 0});
  }
}

TEST_CASE("progressive_update") {
  Tape tape;
  const std::vector<double> seed_mask = {1, 0, 0, 0};
  SECTION("carries previous output for nodes present before") {
    const Tensor x_init = make_constant({4, 1}, {1.0, 0.0, 0.0, 0.0});
    const Tensor prev = make_constant({4, 1}, {1.0, 0.7, 0.3, 0.9});
    const std::vector<double> prev_present = {1, 1, 0, 1};
    const auto out = progressive_update(tape, x_init, prev, prev_present, seed_mask).value();
    CHECK(out[0] == 1.0);  // seed clamp
    CHECK(out[1] == 0.7);  // carried forward
    CHECK(out[2] == 0.0);  // newly added: back to x~
    CHECK(out[3] == 0.9);
  }
  SECTION("seed never moves off 1 even when the previous output differs") {
    const Tensor x_init = make_constant({4, 1}, {1.0, 0.0, 0.0, 0.0});
    const Tensor prev = make_constant({4, 1}, {0.4, 0.7, 0.3, 0.9});
    const std::vector<double> prev_present = {1, 1, 1, 1};
    const auto out = progressive_update(tape, x_init, prev, prev_present, seed_mask).value();
    CHECK(out[0] == 1.0);
  }
  SECTION("fixed point: identity structural output keeps x unchanged") {
    const Tensor x_init = make_constant({4, 1}, {1.0, 0.0, 0.0, 0.0});
    const std::vector<double> all_present = {1, 1, 1, 1};
    Tensor x_bar = make_constant({4, 1}, {1.0, 0.55, 0.25, 0.8});
    const auto next =
        progressive_update(tape, x_init, x_bar, all_present, seed_mask).value();
    CHECK(next == x_bar.value());
  }
  SECTION("gradient flows through the carried entries only") {
    const Tensor prev = make_param({3, 1}, {0.3, 0.6, 0.9});
    const Tensor x_init = make_constant({3, 1}, {0.0, 0.0, 0.0});
    const std::vector<double> prev_present = {1, 0, 1};
    const std::vector<double> no_seeds = {0, 0, 0};
    Tape t;
    const Tensor out = progressive_update(t, x_init, prev, prev_present, no_seeds);
    t.backward(t.sum(out));
    CHECK(prev.grad() == std::vector<double>{1.0, 0.0, 1.0});
  }
}

TEST_CASE("masked self-attention block") {
  SECTION("causal row 0 sees only timestamp 0") {
    auto block = make_block(4);
    const std::vector<double> x = {0.3, 0.9, -0.4, 2.0};
    const auto z = block.forward_sequence(x);
    REQUIRE(z.size() == 4);
    CHECK(z[0] == Catch::Approx(0.3).margin(1e-15));  // wv=1, p=0
  }
  SECTION("paper-literal: the final timestamp attends only to itself") {
    auto block = make_block(4, 1, MaskOrientation::PaperLiteral);
    const std::vector<double> x = {0.3, 0.9, -0.4, 2.0};
    const auto z = block.forward_sequence(x);
    CHECK(z[3] == Catch::Approx(2.0).margin(1e-15));
  }
  SECTION("zero query/key weights give uniform attention over unmasked keys") {
    auto block = make_block(3);
    auto params = block.parameters();
    // zero wq and wk, keep wv = 1
    for (const Tensor& p : params)
      if (p.name().find("wq") != std::string::npos || p.name().find("wk") != std::string::npos)
        p.raw()->value[0] = 0.0;
    const std::vector<double> x = {0.6, 0.0, 0.9};
    const auto z = block.forward_sequence(x);
    CHECK(z[0] == Catch::Approx(0.6).margin(1e-14));
    CHECK(z[1] == Catch::Approx(0.3).margin(1e-14));
    CHECK(z[2] == Catch::Approx(0.5).margin(1e-14));
  }
  SECTION("attention weights: masked entries exactly zero, rows sum to one") {
    auto block = make_block(4);
    Tape tape;
    const Tensor x = make_constant({3, 4}, {0.1, 0.5, 0.9, 0.2, 0.0, 0.0, 0.7, 0.3, 1.0, 1.0, 1.0, 1.0});
    std::vector<Tensor> weights;
    block.forward(tape, x, &weights);
    REQUIRE(weights.size() == 1);
    const auto& b = weights[0];  // [3,4,4]
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t i = 0; i < 4; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
          const double w = b.value()[(n * 4 + i) * 4 + j];
          if (j > i) CHECK(w == 0.0);
          row += w;
        }
        CHECK(row == Catch::Approx(1.0).margin(1e-12));
      }
  }
  SECTION("causal outputs are bit-exact invariant to future inputs") {
    auto block = make_block(5, 2);
    std::vector<double> x = {0.2, 0.4, 0.6, 0.8, 1.0};
    const auto z = block.forward_sequence(x);
    std::vector<double> x2 = x;
    x2[3] = -3.7;
    x2[4] = 42.0;
    const auto z2 = block.forward_sequence(x2);
    for (std::size_t t = 0; t < 3; ++t) CHECK(z[t] == z2[t]);
    auto paper = make_block(3, 1, MaskOrientation::PaperLiteral);
    std::vector<double> y = {0.5, 0.25, 0.75};
    std::vector<double> y2 = {9.0, 0.25, 0.75};  // past perturbation
    const auto w1 = paper.forward_sequence(y);
    const auto w2 = paper.forward_sequence(y2);
    CHECK(w1[2] == w2[2]);  // future-only rows unaffected by the past
  }
  SECTION("gradients match finite differences, including positions") {
    auto block = make_block(4, 2);
    // move params off the trivial init point
    SeqRng rng(77, 0);
    for (const Tensor& p : block.parameters())
      for (auto& v : p.raw()->value) v += rng.next_range(-0.3, 0.3);
    const Tensor x = make_param({2, 4}, {0.1, 0.4, 0.7, 0.9, 0.8, 0.6, 0.2, 0.0}, "x");
    std::vector<Tensor> params = block.parameters();
    params.push_back(x);
    check_gradients(params, [&](Tape& t) { return t.sum(t.sigmoid(block.forward(t, x))); });
  }
  SECTION("t_count mismatch rejected") {
    auto block = make_block(4);
    Tape tape(false);
    const Tensor x = make_constant({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(block.forward(tape, x), ValidationError);
  }
}
