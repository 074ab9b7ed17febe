#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dysuse/rng.hpp"
#include "dysuse/tensor.hpp"

namespace dysuse {

// Causal: query i attends to keys j <= i (diffusion is unidirectional in
// time). PaperLiteral keeps the transposed variant for ablation, where the
// final timestamp attends only to itself.
enum class MaskOrientation { Causal, PaperLiteral };

inline const char* to_string(MaskOrientation m) {
  return m == MaskOrientation::Causal ? "causal" : "paper-literal";
}

inline MaskOrientation mask_orientation_from_string(const std::string& s) {
  if (s == "causal") return MaskOrientation::Causal;
  if (s == "paper-literal") return MaskOrientation::PaperLiteral;
  throw ValidationError("unknown mask orientation: " + s);
}

inline Tensor attention_mask(int t_count, MaskOrientation orientation) {
  const auto t = static_cast<std::size_t>(t_count);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> m(t * t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      const bool open = orientation == MaskOrientation::Causal ? j <= i : i <= j;
      m[i * t + j] = open ? 0.0 : -inf;
    }
  return make_constant({t, t}, std::move(m));
}

struct TemporalConfig {
  int t_count = 1;  // fixed at model build; graphs must match
  int layers = 1;
  MaskOrientation orientation = MaskOrientation::Causal;
};

// Progressive mechanism: the initial feature at t is replaced by the previous
// snapshot's structural output for nodes present at t-1; seeds re-clamp to 1.
inline Tensor progressive_update(Tape& tape, const Tensor& x_init_t, const Tensor& prev_output,
                                 const std::vector<double>& prev_present_mask,
                                 const std::vector<double>& seed_mask) {
  const std::size_t n = x_init_t.size();
  if (prev_output.size() != n || prev_present_mask.size() != n || seed_mask.size() != n)
    throw ValidationError("progressive_update: size mismatch");
  std::vector<double> keep_prev = prev_present_mask;
  std::vector<double> keep_init(n);
  for (std::size_t i = 0; i < n; ++i) keep_init[i] = 1.0 - keep_prev[i];
  std::vector<double> seed(n), keep_seed(n);
  for (std::size_t i = 0; i < n; ++i) {
    seed[i] = seed_mask[i];
    keep_seed[i] = 1.0 - seed_mask[i];
  }
  const auto shape = x_init_t.shape();
  const Tensor mixed =
      tape.add(tape.mul(prev_output, make_constant(shape, std::move(keep_prev))),
               tape.mul(x_init_t, make_constant(shape, std::move(keep_init))));
  return tape.add(tape.mul(mixed, make_constant(shape, std::move(keep_seed))),
                  make_constant(shape, std::move(seed)));
}

// Scaled dot-product self-attention over each node's T-long scalar sequence,
// with learned scalar projections (D = F = 1), learned scalar position
// embeddings added before the first layer, and a {0,-inf} mask. Stacked
// layers repeat the block on z.
class TemporalBlock {
 public:
  TemporalBlock(const TemporalConfig& cfg, SeqRng&) : cfg_(cfg) {
    if (cfg_.t_count < 1) throw ValidationError("temporal: t_count must be >= 1");
    if (cfg_.layers < 1) throw ValidationError("temporal: needs at least one layer");
    mask_ = attention_mask(cfg_.t_count, cfg_.orientation);
    positions_ = make_param({static_cast<std::size_t>(cfg_.t_count)},
                            std::vector<double>(static_cast<std::size_t>(cfg_.t_count), 0.0),
                            "positions");
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string p = "attn" + std::to_string(l) + "/";
      layers_.push_back({make_param({1}, {1.0}, p + "wq"), make_param({1}, {1.0}, p + "wk"),
                         make_param({1}, {1.0}, p + "wv")});
    }
  }

  // X: [N,T] per-node temporal sequences; returns Z: [N,T].
  // attention_weights, when non-null, receives each layer's [N,T,T] weights.
  Tensor forward(Tape& tape, const Tensor& x,
                 std::vector<Tensor>* attention_weights = nullptr) const {
    if (x.rank() != 2 || x.shape()[1] != static_cast<std::size_t>(cfg_.t_count))
      throw ValidationError("temporal: input must be [N," + std::to_string(cfg_.t_count) + "]");
    const double scale = 1.0 / std::sqrt(1.0);  // F = 1
    Tensor z = tape.add(x, positions_);
    for (const Layer& l : layers_) {
      const Tensor q = tape.mul(z, l.wq);
      const Tensor k = tape.mul(z, l.wk);
      const Tensor v = tape.mul(z, l.wv);
      const Tensor logits = tape.scale(tape.batch_outer(q, k), scale);
      const Tensor beta = tape.softmax_masked(logits, mask_);
      if (attention_weights) attention_weights->push_back(beta);
      z = tape.batch_matvec(beta, v);
    }
    return z;
  }

  // Single-sequence convenience: one node's T scalars in, z out.
  std::vector<double> forward_sequence(const std::vector<double>& x_v) const {
    Tape tape(false);
    const Tensor x = make_constant({1, x_v.size()}, x_v);
    return forward(tape, x).value();
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out = {positions_};
    for (const Layer& l : layers_) {
      out.push_back(l.wq);
      out.push_back(l.wk);
      out.push_back(l.wv);
    }
    return out;
  }

  void named_parameters(std::vector<std::pair<std::string, Tensor>>& out,
                        const std::string& prefix) const {
    for (const Tensor& t : parameters()) out.emplace_back(prefix + t.name(), t);
  }

  const TemporalConfig& config() const { return cfg_; }
  const Tensor& mask() const { return mask_; }

 private:
  struct Layer {
    Tensor wq, wk, wv;
  };
  TemporalConfig cfg_;
  Tensor mask_;
  Tensor positions_;
  std::vector<Layer> layers_;
};

}  // namespace dysuse
