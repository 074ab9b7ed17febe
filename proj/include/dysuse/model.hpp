#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "dysuse/adam.hpp"
#include "dysuse/checkpoint.hpp"
#include "dysuse/graph.hpp"
#include "dysuse/mc.hpp"
#include "dysuse/structural.hpp"
#include "dysuse/temporal.hpp"
#include "dysuse/tensor.hpp"

namespace dysuse {

enum class StructuralVariant { CoupledGnn, Gcn };

inline const char* to_string(StructuralVariant v) {
  return v == StructuralVariant::CoupledGnn ? "coupledgnn" : "gcn";
}

inline StructuralVariant structural_variant_from_string(const std::string& s) {
  if (s == "coupledgnn") return StructuralVariant::CoupledGnn;
  if (s == "gcn") return StructuralVariant::Gcn;
  throw ValidationError("unknown structural variant: " + s);
}

struct ModelConfig {
  StructuralVariant variant = StructuralVariant::CoupledGnn;
  StructuralConfig structural;
  int t_count = 1;  // attention length; graphs must match
  int attention_layers = 1;
  MaskOrientation mask_orientation = MaskOrientation::Causal;
  bool use_attention = true;    // off: relu1(x_{T-1}) directly
  bool use_progressive = true;  // off: every snapshot starts from x~_t
  std::uint64_t init_seed = 1;
};

// Per-snapshot internals exposed for contract checks and ablation studies.
struct ForwardTrace {
  std::vector<std::vector<Tensor>> layer_xs;     // [T][L] structural layer outputs [N,1]
  std::vector<Tensor> structural_out;            // [T] final structural outputs [N,1]
  std::vector<Tensor> attention_weights;         // per attention layer [N,T,T]
};

// Initial feature x~_t: 1 at seeds present in the snapshot, else 0.
inline std::vector<double> initial_features(const Snapshot& snap,
                                            const std::vector<NodeId>& seeds) {
  std::vector<double> x(static_cast<std::size_t>(snap.n_global()), 0.0);
  for (NodeId s : seeds)
    if (snap.contains(s)) x[static_cast<std::size_t>(s)] = 1.0;
  return x;
}

class DySuseModel {
 public:
  explicit DySuseModel(const ModelConfig& cfg) : cfg_(cfg) {
    SeqRng init(cfg_.init_seed, 0, rng_tag::kParamInit);
    if (cfg_.variant == StructuralVariant::CoupledGnn)
      structural_ = std::make_unique<CoupledGnn>(cfg_.structural, cfg_.init_seed, init);
    else
      structural_ = std::make_unique<GcnModule>(cfg_.structural, init);
    TemporalConfig tc;
    tc.t_count = cfg_.t_count;
    tc.layers = cfg_.attention_layers;
    tc.orientation = cfg_.mask_orientation;
    temporal_ = std::make_unique<TemporalBlock>(tc, init);
  }

  const ModelConfig& config() const { return cfg_; }
  const StructuralModule& structural() const { return *structural_; }
  const TemporalBlock& temporal() const { return *temporal_; }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out = structural_->parameters();
    if (cfg_.use_attention)
      for (const Tensor& t : temporal_->parameters()) out.push_back(t);
    return out;
  }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    structural_->named_parameters(out, "structural/");
    temporal_->named_parameters(out, "temporal/");
    return out;
  }

  // Full pipeline: progressive-updated structural pass per snapshot, stacked
  // temporal attention, relu1 head on the final timestamp. Returns [N,1].
  Tensor forward(Tape& tape, const DynamicGraph& g, const std::vector<NodeId>& seeds,
                 ForwardTrace* trace = nullptr) const {
    if (g.n_snapshots() != cfg_.t_count)
      throw ValidationError("model: graph has T=" + std::to_string(g.n_snapshots()) +
                            " but the model was built for T=" + std::to_string(cfg_.t_count));
    const auto n = static_cast<std::size_t>(g.n_global());
    for (NodeId s : seeds)
      if (s < 0 || s >= g.n_global()) throw ValidationError("model: seed outside node universe");

    std::vector<double> seed_mask(n, 0.0);
    for (NodeId s : seeds) seed_mask[static_cast<std::size_t>(s)] = 1.0;

    std::vector<Tensor> xs;
    Tensor prev_out;
    const Snapshot* prev_snap = nullptr;
    for (int t = 0; t < cfg_.t_count; ++t) {
      const Snapshot& snap = g.snapshot(t);
      const Tensor x_init = make_constant({n, 1}, initial_features(snap, seeds));
      Tensor x_bar;
      if (t == 0 || !cfg_.use_progressive || !prev_out.defined()) {
        x_bar = clamp_seeds(tape, x_init, seed_mask);
      } else {
        std::vector<double> prev_present(n, 0.0);
        for (NodeId v : prev_snap->nodes()) prev_present[static_cast<std::size_t>(v)] = 1.0;
        x_bar = progressive_update(tape, x_init, prev_out, prev_present, seed_mask);
      }
      std::vector<Tensor> layer_xs;
      const Tensor x_t =
          structural_->forward(tape, snap, x_bar, seeds, trace ? &layer_xs : nullptr);
      if (trace) {
        trace->layer_xs.push_back(std::move(layer_xs));
        trace->structural_out.push_back(x_t);
      }
      xs.push_back(x_t);
      prev_out = x_t;
      prev_snap = &snap;
    }

    const Tensor stacked = tape.stack_cols(xs);  // [N,T]
    if (!cfg_.use_attention)
      return tape.relu1(tape.select_col(stacked, static_cast<std::size_t>(cfg_.t_count - 1)));
    const Tensor z =
        temporal_->forward(tape, stacked, trace ? &trace->attention_weights : nullptr);
    return tape.relu1(tape.select_col(z, static_cast<std::size_t>(cfg_.t_count - 1)));
  }

  // No-grad forward returning plain values.
  std::vector<double> predict(const DynamicGraph& g, const std::vector<NodeId>& seeds) const {
    Tape tape(false);
    return forward(tape, g, seeds).value();
  }

  // Eq.-15-style loss for one seed set: sum over nodes of |y - y_hat|.
  Tensor loss(Tape& tape, const Tensor& y_hat, const std::vector<double>& target) const {
    if (y_hat.size() != target.size()) throw ValidationError("loss: length mismatch");
    const Tensor y = make_constant(y_hat.shape(), target);
    return tape.scale(tape.mae(y_hat, y), static_cast<double>(target.size()));
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.config = {{"variant", to_string(cfg_.variant)},
                 {"layers", std::to_string(cfg_.structural.layers)},
                 {"rep_dim", std::to_string(cfg_.structural.rep_dim)},
                 {"gate_hidden", std::to_string(cfg_.structural.gate_hidden)},
                 {"leaky_slope", detail::format_g17(cfg_.structural.leaky_slope)},
                 {"t_count", std::to_string(cfg_.t_count)},
                 {"attention_layers", std::to_string(cfg_.attention_layers)},
                 {"mask_orientation", to_string(cfg_.mask_orientation)},
                 {"use_attention", cfg_.use_attention ? "1" : "0"},
                 {"use_progressive", cfg_.use_progressive ? "1" : "0"},
                 {"init_seed", std::to_string(cfg_.init_seed)}};
    ck.params = named_parameters();
    return ck;
  }

  static DySuseModel from_checkpoint(const Checkpoint& ck) {
    ModelConfig cfg;
    cfg.variant = structural_variant_from_string(ck.config_value("variant"));
    cfg.structural.layers = std::stoi(ck.config_value("layers"));
    cfg.structural.rep_dim = static_cast<std::size_t>(std::stoul(ck.config_value("rep_dim")));
    cfg.structural.gate_hidden =
        static_cast<std::size_t>(std::stoul(ck.config_value("gate_hidden")));
    cfg.structural.leaky_slope = std::stod(ck.config_value("leaky_slope"));
    cfg.t_count = std::stoi(ck.config_value("t_count"));
    cfg.attention_layers = std::stoi(ck.config_value("attention_layers"));
    cfg.mask_orientation = mask_orientation_from_string(ck.config_value("mask_orientation"));
    cfg.use_attention = ck.config_value("use_attention") == "1";
    cfg.use_progressive = ck.config_value("use_progressive") == "1";
    cfg.init_seed = std::stoull(ck.config_value("init_seed"));
    DySuseModel model(cfg);
    auto params = model.named_parameters();
    for (auto& [name, tensor] : params) {
      bool found = false;
      for (const auto& [ck_name, ck_tensor] : ck.params) {
        if (ck_name != name) continue;
        if (ck_tensor.shape() != tensor.shape())
          throw ValidationError("checkpoint: shape mismatch for " + name);
        tensor.raw()->value = ck_tensor.value();
        found = true;
        break;
      }
      if (!found) throw ValidationError("checkpoint: missing parameter " + name);
    }
    return model;
  }

  void save(const std::string& path) const { save_checkpoint(to_checkpoint(), path); }
  static DySuseModel load(const std::string& path) {
    return from_checkpoint(load_checkpoint(path));
  }

 private:
  static Tensor clamp_seeds(Tape& tape, const Tensor& x, const std::vector<double>& seed_mask) {
    std::vector<double> keep(seed_mask.size());
    for (std::size_t i = 0; i < seed_mask.size(); ++i) keep[i] = 1.0 - seed_mask[i];
    return tape.add(tape.mul(x, make_constant(x.shape(), std::move(keep))),
                    make_constant(x.shape(), seed_mask));
  }

  ModelConfig cfg_;
  std::unique_ptr<StructuralModule> structural_;
  std::unique_ptr<TemporalBlock> temporal_;
};

// ---- training ---------------------------------------------------------------

struct TrainRecord {
  std::vector<NodeId> seeds;
  std::vector<double> target;  // y_{T-1,v}, length N
};

inline std::vector<TrainRecord> to_train_records(const GroundTruthDataset& ds) {
  std::vector<TrainRecord> out;
  out.reserve(ds.records.size());
  for (const auto& rec : ds.records) out.push_back({rec.seeds, rec.table.final_values()});
  return out;
}

struct TrainOptions {
  int epochs = 200;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 4;        // seed sets per optimizer step
  int patience = 20;         // early stopping on validation MAE
  double val_fraction = 0.2;
  std::uint64_t rng_seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // summed Eq.-15 loss over the train split
  double val_mae = 0.0;     // mean per-node MAE over the validation split
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_mae = 0.0;
};

inline double per_node_mae(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("mae: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Minibatch-accumulated Adam on the Eq.-15 loss with an 80/20 train/val split
// and best-checkpoint-by-validation early stopping. Deterministic under
// opt.rng_seed; single-threaded over the tape.
inline TrainResult train(DySuseModel& model, const DynamicGraph& g,
                         const std::vector<TrainRecord>& records, const TrainOptions& opt) {
  if (records.empty()) throw ValidationError("train: empty dataset");
  for (const auto& r : records)
    if (r.target.size() != static_cast<std::size_t>(g.n_global()))
      throw ValidationError("train: target length does not match the graph");

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  {
    SeqRng rng(opt.rng_seed, 0, rng_tag::kShuffle);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next_int(order.size() - i));
      std::swap(order[i], order[j]);
    }
  }
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(opt.val_fraction * static_cast<double>(records.size())));
  n_val = std::min(std::max<std::size_t>(n_val, records.size() > 1 ? 1 : 0),
                   records.size() - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (val_idx.empty()) val_idx = train_idx;  // single-record degenerate split

  const std::vector<Tensor> params = model.parameters();
  AdamOptimizer adam(opt.lr, opt.beta1, opt.beta2, opt.eps);

  auto validation_mae = [&] {
    double s = 0.0;
    for (std::size_t i : val_idx)
      s += per_node_mae(model.predict(g, records[i].seeds), records[i].target);
    return s / static_cast<double>(val_idx.size());
  };

  TrainResult result;
  std::vector<std::vector<double>> best_values;
  auto snapshot_params = [&] {
    best_values.clear();
    for (const Tensor& p : params) best_values.push_back(p.value());
  };
  result.best_val_mae = validation_mae();
  result.best_epoch = 0;
  snapshot_params();

  int since_best = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    SeqRng rng(opt.rng_seed, static_cast<std::uint64_t>(epoch) + 1, rng_tag::kShuffle);
    std::vector<std::size_t> sched = train_idx;
    for (std::size_t i = 0; i + 1 < sched.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next_int(sched.size() - i));
      std::swap(sched[i], sched[j]);
    }

    double epoch_loss = 0.0;
    std::size_t in_batch = 0;
    zero_grad(params);
    for (std::size_t k = 0; k < sched.size(); ++k) {
      const TrainRecord& rec = records[sched[k]];
      Tape tape;
      const Tensor y_hat = model.forward(tape, g, rec.seeds);
      const Tensor l = model.loss(tape, y_hat, rec.target);
      epoch_loss += l.scalar();
      tape.backward(l);
      if (++in_batch == static_cast<std::size_t>(opt.batch_size) || k + 1 == sched.size()) {
        adam.step(params);
        zero_grad(params);
        in_batch = 0;
      }
    }

    const double vmae = validation_mae();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back({epoch, epoch_loss, vmae, secs});
    if (vmae < result.best_val_mae) {
      result.best_val_mae = vmae;
      result.best_epoch = epoch + 1;
      snapshot_params();
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i].raw()->value = best_values[i];
  return result;
}

// Training log CSV; the wall-clock column is optional so that reruns can be
// compared byte-for-byte.
inline std::string train_log_csv(const TrainResult& result, bool include_timing = true) {
  std::string out =
      include_timing ? "epoch,train_loss,val_mae,seconds\n" : "epoch,train_loss,val_mae\n";
  char buf[64];
  for (const EpochLog& e : result.log) {
    out += std::to_string(e.epoch);
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", e.train_loss, e.val_mae);
    out += buf;
    if (include_timing) {
      std::snprintf(buf, sizeof(buf), ",%.3f", e.seconds);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace dysuse
