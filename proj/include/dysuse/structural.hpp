#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dysuse/graph.hpp"
#include "dysuse/rng.hpp"
#include "dysuse/tensor.hpp"

namespace dysuse {

struct StructuralConfig {
  int layers = 3;               // L
  std::size_t rep_dim = 8;      // influence-representation width
  std::size_t gate_hidden = 8;  // StateGate MLP hidden width
  double leaky_slope = 0.01;
};

namespace structural_detail {

inline Tensor glorot(SeqRng& rng, std::size_t fan_in, std::size_t fan_out, std::string name) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = rng.next_range(-limit, limit);
  return make_param({fan_in, fan_out}, std::move(v), std::move(name));
}

struct EdgeIndex {
  std::vector<std::size_t> srcs, dsts;
  Tensor weights;  // [E,1] constant
};

inline EdgeIndex edge_index(const Snapshot& snap) {
  EdgeIndex idx;
  std::vector<double> w;
  idx.srcs.reserve(snap.edges().size());
  idx.dsts.reserve(snap.edges().size());
  w.reserve(snap.edges().size());
  for (const Edge& e : snap.edges()) {
    idx.srcs.push_back(static_cast<std::size_t>(e.src));
    idx.dsts.push_back(static_cast<std::size_t>(e.dst));
    w.push_back(e.weight);
  }
  const std::size_t n_edges = w.size();
  idx.weights = make_constant({n_edges, 1}, std::move(w));
  return idx;
}

struct SeedMasks {
  Tensor seed;  // [N,1] 1 at seeds
  Tensor keep;  // [N,1] 1 - seed
};

inline SeedMasks seed_masks(NodeId n, const std::vector<NodeId>& seeds) {
  const auto size = static_cast<std::size_t>(n);
  std::vector<double> m(size, 0.0);
  for (NodeId s : seeds) m[static_cast<std::size_t>(s)] = 1.0;
  std::vector<double> keep(size);
  for (std::size_t i = 0; i < size; ++i) keep[i] = 1.0 - m[i];
  return {make_constant({size, 1}, std::move(m)), make_constant({size, 1}, std::move(keep))};
}

}  // namespace structural_detail

// InfluGate: beta . [W r_u || W r_v]. wr_u/wr_v are the already projected
// representations [E, h'] for edge endpoints; beta is [2h', 1].
inline Tensor influ_gate(Tape& tape, const Tensor& wr_u, const Tensor& wr_v,
                         const Tensor& beta) {
  return tape.matmul(tape.concat_cols(wr_u, wr_v), beta);  // [E,1]
}

inline Tensor influ_gate(Tape& tape, const Tensor& r_u, const Tensor& r_v, const Tensor& w,
                         const Tensor& beta) {
  return influ_gate(tape, tape.matmul(r_u, w), tape.matmul(r_v, w), beta);
}

// a_v = sum_{u in N_in(v)} gate(u,v) * x_u; in-isolated nodes get 0.
inline Tensor state_aggregate(Tape& tape, const structural_detail::EdgeIndex& idx,
                              const Tensor& x, const Tensor& gate, NodeId n) {
  return tape.scatter_weighted_rows(x, gate, idx.srcs, idx.dsts, static_cast<std::size_t>(n));
}

// x' = sigmoid(mu_x * x + mu_a * a), clamped to 1 at seeds.
inline Tensor state_combine(Tape& tape, const Tensor& x, const Tensor& a, const Tensor& mu_x,
                            const Tensor& mu_a, const structural_detail::SeedMasks& masks) {
  const Tensor s = tape.axpby_sigmoid(x, a, mu_x, mu_a);
  return tape.add(tape.mul(s, masks.keep), masks.seed);
}

// b_v = sum_{u in N_in(v)} StateGate(x_u) * p_uv * (W r_u)
inline Tensor influence_aggregate(Tape& tape, const structural_detail::EdgeIndex& idx,
                                  const Tensor& state_gate_out, const Tensor& wr, NodeId n) {
  const Tensor sg_u = tape.gather_rows(state_gate_out, idx.srcs);
  const Tensor coeff = tape.mul(sg_u, idx.weights);  // [E,1]
  return tape.scatter_weighted_rows(wr, coeff, idx.srcs, idx.dsts, static_cast<std::size_t>(n));
}

// r' = leaky_relu(zeta_r * (W r) + zeta_b * b)
inline Tensor influence_combine(Tape& tape, const Tensor& wr, const Tensor& b,
                                const Tensor& zeta_r, const Tensor& zeta_b, double slope) {
  return tape.axpby_leaky(wr, b, zeta_r, zeta_b, slope);
}

// Per-snapshot structural feature module: parameters are shared across every
// snapshot fed through it. layer_xs, when non-null, receives the node-scalar
// output of every layer.
class StructuralModule {
 public:
  virtual ~StructuralModule() = default;
  virtual Tensor forward(Tape& tape, const Snapshot& snap, const Tensor& x_bar,
                         const std::vector<NodeId>& seeds,
                         std::vector<Tensor>* layer_xs = nullptr) const = 0;
  virtual std::vector<Tensor> parameters() const = 0;
  virtual void named_parameters(std::vector<std::pair<std::string, Tensor>>& out,
                                const std::string& prefix) const = 0;
  virtual const char* variant() const = 0;
};

// CoupledGNN: a node-state network (scalar susceptibility per node) coupled
// with an influence-representation network, alternating per layer. The
// influence representations start from a fixed pseudo-random pre-embedding
// regenerated per node id from rep_seed, so the module is graph-size
// agnostic.
class CoupledGnn final : public StructuralModule {
 public:
  CoupledGnn(const StructuralConfig& cfg, std::uint64_t rep_seed, SeqRng& init_rng)
      : cfg_(cfg), rep_seed_(rep_seed) {
    if (cfg_.layers < 1) throw ValidationError("coupledgnn: needs at least one layer");
    const std::size_t h = cfg_.rep_dim, g = cfg_.gate_hidden;
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + "/";
      Layer layer;
      layer.w = structural_detail::glorot(init_rng, h, h, p + "W");
      layer.beta = make_param({2 * h, 1}, std::vector<double>(2 * h, 0.0), p + "beta");
      layer.mu_x = make_param({1}, {1.0}, p + "mu_x");
      layer.mu_a = make_param({1}, {1.0}, p + "mu_a");
      layer.zeta_r = make_param({1}, {1.0}, p + "zeta_r");
      layer.zeta_b = make_param({1}, {1.0}, p + "zeta_b");
      layer.gate_w1 = structural_detail::glorot(init_rng, 1, g, p + "gate_w1");
      layer.gate_b1 = make_param({g}, std::vector<double>(g, 0.0), p + "gate_b1");
      layer.gate_w2 = structural_detail::glorot(init_rng, g, g, p + "gate_w2");
      layer.gate_b2 = make_param({g}, std::vector<double>(g, 0.0), p + "gate_b2");
      layer.gate_w3 = structural_detail::glorot(init_rng, g, 1, p + "gate_w3");
      layer.gate_b3 = make_param({1}, {0.0}, p + "gate_b3");
      layers_.push_back(std::move(layer));
    }
  }

  // Pre-embedding r~ for the first n node ids: Uniform(-0.5/h, 0.5/h),
  // sampled once per (node, component) and reused at every snapshot. Cached
  // per node count; the cache only ever holds identical recomputable values.
  Tensor influence_init(NodeId n) const {
    {
      std::lock_guard<std::mutex> lock(rep_mutex_);
      const auto it = rep_cache_.find(n);
      if (it != rep_cache_.end()) return it->second;
    }
    const std::size_t h = cfg_.rep_dim;
    RandomStream s(rep_seed_, rng_tag::kInfluenceRep);
    std::vector<double> v(static_cast<std::size_t>(n) * h);
    const double half = 0.5 / static_cast<double>(h);
    for (NodeId i = 0; i < n; ++i)
      for (std::size_t j = 0; j < h; ++j)
        v[static_cast<std::size_t>(i) * h + j] =
            (s.u01(static_cast<std::uint64_t>(i), j) * 2.0 - 1.0) * half;
    Tensor t = make_constant({static_cast<std::size_t>(n), h}, std::move(v));
    std::lock_guard<std::mutex> lock(rep_mutex_);
    rep_cache_.emplace(n, t);
    return t;
  }

  Tensor forward(Tape& tape, const Snapshot& snap, const Tensor& x_bar,
                 const std::vector<NodeId>& seeds,
                 std::vector<Tensor>* layer_xs = nullptr) const override {
    const NodeId n = snap.n_global();
    const auto idx = structural_detail::edge_index(snap);
    const auto masks = structural_detail::seed_masks(n, seeds);
    Tensor x = x_bar;
    Tensor r = influence_init(n);
    for (const Layer& layer : layers_) {
      const Tensor wr = tape.matmul(r, layer.w);  // [N,h']
      // InfluGate(u,v) = beta . [W r_u || W r_v], fused over the edge list.
      const Tensor gate = tape.edge_gate(wr, layer.beta, idx.srcs, idx.dsts);
      const Tensor a = state_aggregate(tape, idx, x, gate, n);
      const Tensor x_next = state_combine(tape, x, a, layer.mu_x, layer.mu_a, masks);
      const Tensor sg = state_gate(tape, x, layer);
      const Tensor b = influence_aggregate(tape, idx, sg, wr, n);
      r = influence_combine(tape, wr, b, layer.zeta_r, layer.zeta_b, cfg_.leaky_slope);
      x = x_next;
      if (layer_xs) layer_xs->push_back(x);
    }
    return x;
  }

  std::vector<Tensor> parameters() const override {
    std::vector<Tensor> out;
    for (const Layer& l : layers_)
      for (const Tensor& t : {l.w, l.beta, l.mu_x, l.mu_a, l.zeta_r, l.zeta_b, l.gate_w1,
                              l.gate_b1, l.gate_w2, l.gate_b2, l.gate_w3, l.gate_b3})
        out.push_back(t);
    return out;
  }

  void named_parameters(std::vector<std::pair<std::string, Tensor>>& out,
                        const std::string& prefix) const override {
    for (const Tensor& t : parameters()) out.emplace_back(prefix + t.name(), t);
  }

  const char* variant() const override { return "coupledgnn"; }
  const StructuralConfig& config() const { return cfg_; }

 private:
  struct Layer {
    Tensor w, beta, mu_x, mu_a, zeta_r, zeta_b;
    Tensor gate_w1, gate_b1, gate_w2, gate_b2, gate_w3, gate_b3;
  };

  // 3-layer MLP 1 -> g -> g -> 1, leaky hidden activations, sigmoid output.
  Tensor state_gate(Tape& tape, const Tensor& x, const Layer& l) const {
    Tensor h = tape.leaky_relu(tape.affine(x, l.gate_w1, l.gate_b1), cfg_.leaky_slope);
    h = tape.leaky_relu(tape.affine(h, l.gate_w2, l.gate_b2), cfg_.leaky_slope);
    return tape.sigmoid(tape.affine(h, l.gate_w3, l.gate_b3));
  }

  StructuralConfig cfg_;
  std::uint64_t rep_seed_;
  std::vector<Layer> layers_;
  mutable std::mutex rep_mutex_;
  mutable std::map<NodeId, Tensor> rep_cache_;
};

// Plain GCN baseline: h_v = sum_{u in N_in(v)} w_uv x_u,
// x' = sigmoid(theta1 * x + theta2 * h), seeds clamped each layer.
class GcnModule final : public StructuralModule {
 public:
  GcnModule(const StructuralConfig& cfg, SeqRng&) : cfg_(cfg) {
    if (cfg_.layers < 1) throw ValidationError("gcn: needs at least one layer");
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + "/";
      layers_.push_back({make_param({1}, {1.0}, p + "theta1"), make_param({1}, {1.0}, p + "theta2")});
    }
  }

  Tensor forward(Tape& tape, const Snapshot& snap, const Tensor& x_bar,
                 const std::vector<NodeId>& seeds,
                 std::vector<Tensor>* layer_xs = nullptr) const override {
    const NodeId n = snap.n_global();
    const auto idx = structural_detail::edge_index(snap);
    const auto masks = structural_detail::seed_masks(n, seeds);
    Tensor x = x_bar;
    for (const Layer& layer : layers_) {
      const Tensor h =
          tape.scatter_weighted_rows(x, idx.weights, idx.srcs, idx.dsts, static_cast<std::size_t>(n));
      const Tensor s =
          tape.sigmoid(tape.add(tape.mul(x, layer.theta1), tape.mul(h, layer.theta2)));
      x = tape.add(tape.mul(s, masks.keep), masks.seed);
      if (layer_xs) layer_xs->push_back(x);
    }
    return x;
  }

  std::vector<Tensor> parameters() const override {
    std::vector<Tensor> out;
    for (const Layer& l : layers_) {
      out.push_back(l.theta1);
      out.push_back(l.theta2);
    }
    return out;
  }

  void named_parameters(std::vector<std::pair<std::string, Tensor>>& out,
                        const std::string& prefix) const override {
    for (const Tensor& t : parameters()) out.emplace_back(prefix + t.name(), t);
  }

  const char* variant() const override { return "gcn"; }

 private:
  struct Layer {
    Tensor theta1, theta2;
  };
  StructuralConfig cfg_;
  std::vector<Layer> layers_;
};

}  // namespace dysuse
