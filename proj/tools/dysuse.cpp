// dysuse: build dynamic graphs, run influence-diffusion simulations, generate
// Monte-Carlo ground truth, and train/evaluate the susceptibility estimator.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dysuse/eval.hpp"
#include "dysuse/exact.hpp"
#include "dysuse/graph_gen.hpp"
#include "dysuse/graph_io.hpp"
#include "dysuse/mc.hpp"
#include "dysuse/model.hpp"

namespace fs = std::filesystem;
using namespace dysuse;

namespace {

// ---- flat `key = value` config files ----------------------------------------

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected `key = value`");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty config key");
    out[key] = value;
  }
  return out;
}

// Binds CLI flags to config keys: an explicitly passed flag wins, otherwise
// the config file value applies, otherwise the compiled default stands.
class KeyedOptions {
 public:
  explicit KeyedOptions(CLI::App* cmd) : cmd_(cmd) {}

  template <class T>
  CLI::Option* add(const std::string& flag, const std::string& key, T& var,
                   const std::string& desc, bool required = false) {
    CLI::Option* opt = cmd_->add_option(flag, var, desc + " [config: " + key + "]");
    bindings_.push_back({opt, key, required,
                         [&var, key](const std::string& text) {
                           T parsed{};
                           if (!CLI::detail::lexical_cast(text, parsed))
                             throw ValidationError("bad config value for " + key + ": " + text);
                           var = parsed;
                         },
                         [&var] { return to_text(var); }});
    return opt;
  }

  CLI::Option* add_flag(const std::string& flag, const std::string& key, bool& var,
                        const std::string& desc) {
    CLI::Option* opt = cmd_->add_flag(flag, var, desc + " [config: " + key + "]");
    bindings_.push_back({opt, key, false,
                         [&var](const std::string& text) {
                           var = (text == "1" || text == "true" || text == "yes");
                         },
                         [&var] { return std::string(var ? "1" : "0"); }});
    return opt;
  }

  void apply(const std::map<std::string, std::string>& file_cfg) {
    for (auto& b : bindings_) {
      if (b.opt->count() == 0) {
        const auto it = file_cfg.find(b.key);
        if (it != file_cfg.end()) b.set_from(it->second);
        else if (b.required)
          throw ValidationError("missing required option " + b.opt->get_name() +
                                " (config key " + b.key + ")");
      }
    }
  }

  std::vector<std::pair<std::string, std::string>> effective() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& b : bindings_) out.emplace_back(b.key, b.get_text());
    return out;
  }

 private:
  template <class T>
  static std::string to_text(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) return v;
    else if constexpr (std::is_floating_point_v<T>) return detail::format_g17(v);
    else return std::to_string(v);
  }

  struct Binding {
    CLI::Option* opt;
    std::string key;
    bool required;
    std::function<void(const std::string&)> set_from;
    std::function<std::string()> get_text;
  };
  CLI::App* cmd_;
  std::vector<Binding> bindings_;
};

// ---- artifact directory with rollback on failure ----------------------------

class ArtifactSink {
 public:
  explicit ArtifactSink(const std::string& dir) : dir_(dir) { fs::create_directories(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write artifact: " + p.string());
    out << content;
    if (!out) throw IoError("failed writing artifact: " + p.string());
    track(name);
  }

  void track(const std::string& name) {
    const auto p = dir_ / name;
    for (const auto& q : written_)
      if (q == p) return;
    written_.push_back(p);
  }

  // Manifest: config echo plus content hashes of every artifact.
  void write_manifest(const std::vector<std::pair<std::string, std::string>>& config) {
    std::ostringstream m;
    for (const auto& [k, v] : config) m << "config." << k << " = " << v << "\n";
    for (const auto& p : written_) {
      std::ifstream in(p, std::ios::binary);
      std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      char buf[20];
      std::snprintf(buf, sizeof(buf), "%016llx",
                    static_cast<unsigned long long>(fnv1a64(content)));
      m << "hash." << p.filename().string() << " = " << buf << "\n";
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    m << "timestamp = " << now << "\n";
    write("manifest.txt", m.str());
  }

  void rollback() {
    for (const auto& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    written_.clear();
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
};

// Verifies a previously written artifact against the manifest in its
// directory, when one exists.
void verify_against_manifest(const std::string& artifact_path) {
  const fs::path p(artifact_path);
  const fs::path manifest = p.parent_path() / "manifest.txt";
  if (!fs::exists(manifest)) return;
  const auto entries = load_config_file(manifest.string());
  const auto it = entries.find("hash." + p.filename().string());
  if (it == entries.end()) return;
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open artifact: " + artifact_path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(content)));
  if (it->second != buf)
    throw ValidationError("manifest hash mismatch for " + artifact_path +
                          " (artifact modified after creation?)");
}

// ---- shared option bundles ---------------------------------------------------

struct DiffusionOptions {
  std::string model = "ic";
  std::string policy = "per-snapshot";
  int hop_cap = 0;  // 0 = unset, run to quiescence

  void bind(KeyedOptions& ko) {
    ko.add("--model", "diffusion.model", model, "diffusion model: ic|lt|tr");
    ko.add("--policy", "diffusion.policy", policy, "attempt policy: per-snapshot|once-ever");
    ko.add("--hop-cap", "diffusion.hop_cap", hop_cap, "max hops per snapshot (0 = quiescence)");
  }
  DiffusionModelSpec spec() const {
    DiffusionModelSpec s;
    s.kind = diffusion_kind_from_string(model);
    if (policy == "once-ever") s.attempt_policy = AttemptPolicy::OnceEver;
    else if (policy != "per-snapshot")
      throw ValidationError("unknown attempt policy: " + policy);
    if (hop_cap > 0) s.hop_cap = hop_cap;
    return s;
  }
};

struct ModelOptions {
  std::string variant = "coupledgnn";
  int layers = 3;
  std::size_t rep_dim = 8;
  std::size_t gate_hidden = 8;
  int attention_layers = 1;
  std::string mask = "causal";
  bool no_attention = false;
  bool no_progressive = false;

  void bind(KeyedOptions& ko) {
    ko.add("--variant", "model.variant", variant, "structural module: coupledgnn|gcn");
    ko.add("--layers", "model.layers", layers, "structural layer count");
    ko.add("--rep-dim", "model.rep_dim", rep_dim, "influence representation width");
    ko.add("--gate-hidden", "model.gate_hidden", gate_hidden, "StateGate hidden width");
    ko.add("--attention-layers", "model.attention_layers", attention_layers,
           "self-attention layer count");
    ko.add("--mask", "model.mask", mask, "attention mask orientation: causal|paper-literal");
    ko.add_flag("--no-attention", "model.no_attention", no_attention,
                "ablation: drop the self-attention block");
    ko.add_flag("--no-progressive", "model.no_progressive", no_progressive,
                "ablation: drop the progressive mechanism");
  }
  ModelConfig config(int t_count, std::uint64_t init_seed) const {
    ModelConfig cfg;
    cfg.variant = structural_variant_from_string(variant);
    cfg.structural.layers = layers;
    cfg.structural.rep_dim = rep_dim;
    cfg.structural.gate_hidden = gate_hidden;
    cfg.t_count = t_count;
    cfg.attention_layers = attention_layers;
    cfg.mask_orientation = mask_orientation_from_string(mask);
    cfg.use_attention = !no_attention;
    cfg.use_progressive = !no_progressive;
    cfg.init_seed = init_seed;
    return cfg;
  }
};

struct TrainHyperOptions {
  int epochs = 200;
  double lr = 1e-3;
  int batch = 4;
  int patience = 20;
  double val_fraction = 0.2;
  bool no_timing = false;

  void bind(KeyedOptions& ko) {
    ko.add("--epochs", "train.epochs", epochs, "training epochs");
    ko.add("--lr", "train.lr", lr, "learning rate");
    ko.add("--batch", "train.batch", batch, "seed sets per optimizer step");
    ko.add("--patience", "train.patience", patience, "early-stopping patience");
    ko.add("--val-fraction", "train.val_fraction", val_fraction, "validation split fraction");
    ko.add_flag("--no-timing", "train.timing_off", no_timing,
                "omit wall-clock columns for byte-reproducible logs");
  }
  TrainOptions options(std::uint64_t seed) const {
    TrainOptions o;
    o.epochs = epochs;
    o.lr = lr;
    o.batch_size = batch;
    o.patience = patience;
    o.val_fraction = val_fraction;
    o.rng_seed = seed;
    return o;
  }
};

unsigned resolve_workers(int flag_value) {
  if (flag_value > 0) return static_cast<unsigned>(flag_value);
  if (const char* env = std::getenv("DYSUSE_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 0;  // all hardware threads
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoul(item)));
  if (out.empty()) throw ValidationError("empty list: " + text);
  return out;
}

std::vector<NodeId> parse_node_list(const std::string& text) {
  std::vector<NodeId> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(static_cast<NodeId>(std::stol(item)));
  return out;
}

std::string meta_path_for(const std::string& csv_path, const std::string& explicit_meta) {
  if (!explicit_meta.empty()) return explicit_meta;
  const fs::path p(csv_path);
  return (p.parent_path() / (p.stem().string() + ".meta")).string();
}

std::string susceptibility_csv(const SusceptibilityTable& table) {
  std::string out = "t,node,value\n";
  for (int t = 0; t < table.n_timestamps(); ++t)
    for (NodeId v = 0; v < table.n_nodes(); ++v)
      out += std::to_string(t) + "," + std::to_string(v) + "," +
             detail::format_g17(table.values[static_cast<std::size_t>(t)]
                                            [static_cast<std::size_t>(v)]) +
             "\n";
  return out;
}

double dataset_mean_mae(const DySuseModel& model, const DynamicGraph& g,
                        const GroundTruthDataset& ds) {
  double s = 0.0;
  for (const auto& rec : ds.records)
    s += mae(model.predict(g, rec.seeds), rec.table.final_values());
  return s / static_cast<double>(ds.records.size());
}

void check_fingerprint(const GroundTruthDataset& ds, const DynamicGraph& g, bool inductive,
                       const std::string& what) {
  if (ds.graph_fingerprint != graph_fingerprint(g) && !inductive)
    throw ValidationError(what +
                          " was generated from a different graph (pass --inductive to allow)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DySuse: susceptibility estimation in dynamic social networks"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "key = value config file (flags override)");

  struct Common {
    std::uint64_t seed = 0;
    std::string out;
    int workers = 0;
    KeyedOptions* ko = nullptr;
  };
  std::map<std::string, Common> common;
  std::map<std::string, KeyedOptions> keyed;
  auto add_common = [&](CLI::App* cmd) -> KeyedOptions& {
    auto [it, ok] = keyed.emplace(cmd->get_name(), KeyedOptions(cmd));
    KeyedOptions& ko = it->second;
    Common& c = common[cmd->get_name()];
    ko.add("--seed", "run.seed", c.seed, "master seed (mandatory)", true);
    ko.add("--out", "run.out", c.out, "output directory", true);
    ko.add("--workers", "run.workers", c.workers,
           "worker threads (0 = all; env DYSUSE_WORKERS)");
    c.ko = &ko;
    return ko;
  };

  // graph ----------------------------------------------------------------
  CLI::App* cmd_graph = app.add_subcommand("graph", "build, perturb, weight and save a graph");
  std::string g_source = "ba", g_path;
  NodeId g_n = 100;
  int g_m = 3, g_t = 5;
  bool g_directed = false;
  double g_initial_fraction = 0.5, g_node_add = 0, g_node_del = 0, g_edge_add = 0, g_edge_del = 0;
  {
    KeyedOptions& ko = add_common(cmd_graph);
    ko.add("--generate", "graph.source", g_source, "generator: ba (or `ingest`)");
    ko.add("--ingest", "graph.path", g_path, "edge-list file to ingest (sets source=ingest)");
    ko.add("--n", "graph.n", g_n, "BA node count");
    ko.add("--m", "graph.m", g_m, "BA attachment count");
    ko.add("--t", "graph.t", g_t, "snapshot count T");
    ko.add_flag("--directed", "graph.directed", g_directed,
                "treat edges as directed (default: symmetrize)");
    ko.add("--initial-fraction", "graph.initial_fraction", g_initial_fraction,
           "fraction of earliest edges forming snapshot 0");
    ko.add("--node-add", "graph.node_add", g_node_add, "max node-addition fraction per snapshot");
    ko.add("--node-del", "graph.node_del", g_node_del, "max node-deletion fraction per snapshot");
    ko.add("--edge-add", "graph.edge_add", g_edge_add, "max edge-addition fraction per snapshot");
    ko.add("--edge-del", "graph.edge_del", g_edge_del, "max edge-deletion fraction per snapshot");
  }

  // simulate ---------------------------------------------------------------
  CLI::App* cmd_sim = app.add_subcommand("simulate", "Monte-Carlo susceptibility for a seed set");
  std::string s_graph, s_seeds;
  std::size_t s_sims = 1000;
  bool s_exact = false;
  DiffusionOptions s_diff;
  {
    KeyedOptions& ko = add_common(cmd_sim);
    ko.add("--graph", "graph.archive", s_graph, "graph archive path", true);
    ko.add("--seeds", "simulate.seeds", s_seeds, "comma-separated seed node ids", true);
    ko.add("--sims", "simulate.sims", s_sims, "simulation count");
    ko.add_flag("--exact", "simulate.exact", s_exact, "exact enumeration instead of MC");
    s_diff.bind(ko);
  }

  // truth ------------------------------------------------------------------
  CLI::App* cmd_truth = app.add_subcommand("truth", "generate a ground-truth dataset");
  std::string t_graph, t_sizes = "5,10,15,20,25";
  std::size_t t_sets = 20, t_sims = 1000;
  DiffusionOptions t_diff;
  {
    KeyedOptions& ko = add_common(cmd_truth);
    ko.add("--graph", "graph.archive", t_graph, "graph archive path", true);
    ko.add("--sizes", "truth.sizes", t_sizes, "comma-separated seed-set sizes");
    ko.add("--sets", "truth.sets", t_sets, "seed sets per size (incl. one top-degree set)");
    ko.add("--sims", "truth.sims", t_sims, "MC simulations per seed set");
    t_diff.bind(ko);
  }

  // train --------------------------------------------------------------------
  CLI::App* cmd_train = app.add_subcommand("train", "train the susceptibility estimator");
  std::string tr_graph, tr_truth, tr_truth_meta;
  bool tr_inductive = false;
  ModelOptions tr_model;
  TrainHyperOptions tr_hyper;
  {
    KeyedOptions& ko = add_common(cmd_train);
    ko.add("--graph", "graph.archive", tr_graph, "graph archive path", true);
    ko.add("--truth", "train.truth", tr_truth, "ground-truth CSV", true);
    ko.add("--truth-meta", "train.truth_meta", tr_truth_meta,
           "ground-truth metadata (default: <truth>.meta)");
    ko.add_flag("--inductive", "train.inductive", tr_inductive,
                "allow a truth dataset from another graph");
    tr_model.bind(ko);
    tr_hyper.bind(ko);
  }

  // eval ----------------------------------------------------------------------
  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint against ground truth");
  std::string e_graph, e_ckpt, e_truth, e_truth_meta, e_klist = "5,10";
  std::size_t e_topk = 10;
  bool e_inductive = false;
  {
    KeyedOptions& ko = add_common(cmd_eval);
    ko.add("--graph", "graph.archive", e_graph, "graph archive path", true);
    ko.add("--checkpoint", "eval.checkpoint", e_ckpt, "trained model checkpoint", true);
    ko.add("--truth", "eval.truth", e_truth, "test ground-truth CSV", true);
    ko.add("--truth-meta", "eval.truth_meta", e_truth_meta, "test metadata path");
    ko.add("--k", "eval.k", e_klist, "comma-separated precision@k cutoffs");
    ko.add("--topk", "eval.topk", e_topk, "top-k size for the overlap table");
    ko.add_flag("--inductive", "eval.inductive", e_inductive,
                "allow a truth dataset from another graph");
  }

  // bench -----------------------------------------------------------------------
  CLI::App* cmd_bench = app.add_subcommand("bench", "time model forward vs MC simulation");
  std::string b_graph, b_ckpt, b_seeds;
  std::size_t b_sims = 1000;
  int b_runs = 5;
  DiffusionOptions b_diff;
  {
    KeyedOptions& ko = add_common(cmd_bench);
    ko.add("--graph", "graph.archive", b_graph, "graph archive path", true);
    ko.add("--checkpoint", "bench.checkpoint", b_ckpt,
           "checkpoint (optional: untrained if absent)");
    ko.add("--seeds", "bench.seeds", b_seeds, "seed ids (default: top-degree 5)");
    ko.add("--sims", "bench.sims", b_sims, "MC simulation count");
    ko.add("--runs", "bench.runs", b_runs, "timing repetitions (median)");
    b_diff.bind(ko);
  }

  // ablate -------------------------------------------------------------------------
  CLI::App* cmd_ablate =
      app.add_subcommand("ablate", "train full/no-attention/no-progressive and compare");
  std::string a_graph, a_truth, a_truth_meta, a_test_truth, a_test_meta;
  ModelOptions a_model;
  TrainHyperOptions a_hyper;
  {
    KeyedOptions& ko = add_common(cmd_ablate);
    ko.add("--graph", "graph.archive", a_graph, "graph archive path", true);
    ko.add("--truth", "ablate.truth", a_truth, "training ground-truth CSV", true);
    ko.add("--truth-meta", "ablate.truth_meta", a_truth_meta, "training metadata path");
    ko.add("--test-truth", "ablate.test_truth", a_test_truth, "held-out ground-truth CSV", true);
    ko.add("--test-meta", "ablate.test_meta", a_test_meta, "held-out metadata path");
    a_model.bind(ko);
    a_hyper.bind(ko);
  }

  // case-study -----------------------------------------------------------------------
  CLI::App* cmd_case = app.add_subcommand("case-study", "top-k overlap table for one seed set");
  std::string c_graph, c_ckpt, c_truth, c_truth_meta;
  std::size_t c_record = 0, c_k = 10;
  {
    KeyedOptions& ko = add_common(cmd_case);
    ko.add("--graph", "graph.archive", c_graph, "graph archive path", true);
    ko.add("--checkpoint", "case.checkpoint", c_ckpt, "trained model checkpoint", true);
    ko.add("--truth", "case.truth", c_truth, "ground-truth CSV with the case seed set", true);
    ko.add("--truth-meta", "case.truth_meta", c_truth_meta, "metadata path");
    ko.add("--record", "case.record", c_record, "record index within the dataset");
    ko.add("--k", "case.k", c_k, "table size");
  }

  CLI11_PARSE(app, argc, argv);

  CLI::App* active = app.get_subcommands().front();
  const std::string name = active->get_name();
  std::unique_ptr<ArtifactSink> sink;
  try {
    std::map<std::string, std::string> file_cfg;
    if (!config_path.empty()) file_cfg = load_config_file(config_path);
    keyed.at(name).apply(file_cfg);
    const Common& c = common.at(name);
    const unsigned workers = resolve_workers(c.workers);
    const std::uint64_t seed = c.seed;
    sink = std::make_unique<ArtifactSink>(c.out);

    if (name == "graph") {
      std::vector<TemporalEdgeRecord> records;
      if (cmd_graph->count("--ingest") || g_source == "ingest") {
        if (g_path.empty()) throw ValidationError("graph: ingest needs --ingest PATH");
        records = load_temporal_edgelist(g_path, g_directed);
      } else if (g_source == "ba") {
        records = generate_ba(g_n, g_m, seed);
        if (!g_directed) {
          const std::size_t n_rec = records.size();
          for (std::size_t i = 0; i < n_rec; ++i) {
            TemporalEdgeRecord rev = records[i];
            std::swap(rev.src, rev.dst);
            records.push_back(rev);
          }
        }
      } else {
        throw ValidationError("graph: unknown source " + g_source);
      }
      auto g = build_snapshots(records, g_t, g_initial_fraction);
      g = perturb_snapshots(g, g_node_add, g_node_del, g_edge_add, g_edge_del, seed);
      g = assign_weights(g);
      sink->write("graph.txt", write_graph_archive(g));
      std::cout << "graph: N=" << g.n_global() << " T=" << g.n_snapshots() << " |E_T|="
                << g.snapshot(g.n_snapshots() - 1).edges().size() << "\n";
    } else if (name == "simulate") {
      verify_against_manifest(s_graph);
      const auto g = load_graph_archive(s_graph);
      const auto seeds = parse_node_list(s_seeds);
      const auto spec = s_diff.spec();
      const SusceptibilityTable table =
          s_exact ? exact_susceptibility(g, spec, seeds)
                  : estimate_susceptibility(g, spec, seeds, s_sims, seed, workers);
      sink->write("susceptibility.csv", susceptibility_csv(table));
      std::cout << "simulate: spread=" << table.influence_spread() << "\n";
    } else if (name == "truth") {
      verify_against_manifest(t_graph);
      const auto g = load_graph_archive(t_graph);
      const auto ds = generate_ground_truth(g, t_diff.spec(), parse_size_list(t_sizes), t_sets,
                                            t_sims, seed, workers);
      sink->write("truth.csv", ground_truth_csv(ds));
      sink->write("truth.meta", ground_truth_meta(ds));
      std::cout << "truth: " << ds.records.size() << " seed sets, " << t_sims << " sims each\n";
    } else if (name == "train") {
      verify_against_manifest(tr_graph);
      verify_against_manifest(tr_truth);
      const auto g = load_graph_archive(tr_graph);
      const auto ds = load_ground_truth(tr_truth, meta_path_for(tr_truth, tr_truth_meta));
      check_fingerprint(ds, g, tr_inductive, "training truth");
      DySuseModel model(tr_model.config(g.n_snapshots(), seed));
      const auto result = train(model, g, to_train_records(ds), tr_hyper.options(seed));
      model.save(sink->path("model.ckpt"));
      sink->track("model.ckpt");
      sink->write("train_log.csv", train_log_csv(result, !tr_hyper.no_timing));
      std::cout << "train: best val MAE " << result.best_val_mae << " at epoch "
                << result.best_epoch << " (" << result.log.size() << " epochs run)\n";
    } else if (name == "eval") {
      verify_against_manifest(e_graph);
      verify_against_manifest(e_ckpt);
      verify_against_manifest(e_truth);
      const auto g = load_graph_archive(e_graph);
      const auto model = DySuseModel::load(e_ckpt);
      const auto ds = load_ground_truth(e_truth, meta_path_for(e_truth, e_truth_meta));
      check_fingerprint(ds, g, e_inductive, "test truth");
      const auto ks = parse_size_list(e_klist);

      // per-seed-size MAE plus precision@k, seeds excluded from rankings
      std::map<std::size_t, std::pair<double, int>> by_size;
      std::string csv = "seed_size,seed_set_id,mae";
      for (std::size_t k : ks) csv += ",p_at_" + std::to_string(k);
      csv += "\n";
      for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& rec = ds.records[i];
        const auto pred = model.predict(g, rec.seeds);
        const double m = mae(pred, rec.table.final_values());
        auto& acc = by_size[rec.seeds.size()];
        acc.first += m;
        acc.second += 1;
        char num[40];
        std::snprintf(num, sizeof(num), "%.6f", m);
        csv += std::to_string(rec.seeds.size()) + "," + std::to_string(i) + "," + num;
        for (std::size_t k : ks) {
          const double p = precision_at_k(pred, rec.table.final_values(), k, rec.seeds);
          std::snprintf(num, sizeof(num), ",%.6f", p);
          csv += num;
        }
        csv += "\n";
      }
      sink->write("report.csv", csv);

      std::ostringstream txt;
      txt << "seed size | mean MAE (" << to_string(ds.spec.kind) << ", " << ds.records.size()
          << " sets)\n";
      double total = 0.0;
      int count = 0;
      for (const auto& [size, acc] : by_size) {
        char num[40];
        std::snprintf(num, sizeof(num), "%.3f", acc.first / acc.second);
        txt << std::setw(9) << size << " | " << num << "\n";
        total += acc.first;
        count += acc.second;
      }
      char num[40];
      std::snprintf(num, sizeof(num), "%.3f", total / count);
      txt << "  overall | " << num << "\n";
      sink->write("report.txt", txt.str());
      std::cout << txt.str();
    } else if (name == "bench") {
      verify_against_manifest(b_graph);
      const auto g = load_graph_archive(b_graph);
      std::optional<DySuseModel> model;
      if (!b_ckpt.empty()) {
        verify_against_manifest(b_ckpt);
        model.emplace(DySuseModel::load(b_ckpt));
      } else {
        ModelConfig cfg;
        cfg.t_count = g.n_snapshots();
        cfg.init_seed = seed;
        model.emplace(cfg);
      }
      std::vector<NodeId> seeds = parse_node_list(b_seeds);
      if (seeds.empty()) seeds = seed_sets(g, 5, 1, seed).front();
      const auto res = benchmark(g, *model, b_diff.spec(), seeds, b_sims, b_runs, workers, seed);
      std::ostringstream csv;
      csv << "what,seconds\n";
      csv << "model_forward," << detail::format_g17(res.model_forward_seconds) << "\n";
      csv << "mc_" << res.n_sims << "_sims," << detail::format_g17(res.mc_seconds) << "\n";
      csv << "speedup," << detail::format_g17(res.speedup) << "\n";
      csv << "machine," << res.machine << "\n";
      sink->write("timing.csv", csv.str());
      std::cout << "bench: forward " << res.model_forward_seconds << "s, MC " << res.mc_seconds
                << "s, speedup " << res.speedup << "x (" << res.machine << ")\n";
    } else if (name == "ablate") {
      verify_against_manifest(a_graph);
      const auto g = load_graph_archive(a_graph);
      const auto ds_train = load_ground_truth(a_truth, meta_path_for(a_truth, a_truth_meta));
      const auto ds_test =
          load_ground_truth(a_test_truth, meta_path_for(a_test_truth, a_test_meta));
      const auto records = to_train_records(ds_train);
      std::string csv = "config,test_mae\n";
      std::ostringstream report;
      for (const std::string which : {"full", "no-attention", "no-progressive"}) {
        ModelOptions mo = a_model;
        mo.no_attention = which == "no-attention";
        mo.no_progressive = which == "no-progressive";
        DySuseModel model(mo.config(g.n_snapshots(), seed));
        train(model, g, records, a_hyper.options(seed));
        const double m = dataset_mean_mae(model, g, ds_test);
        char num[40];
        std::snprintf(num, sizeof(num), "%.6f", m);
        csv += which + std::string(",") + num + "\n";
        report << which << ": test MAE " << num << "\n";
      }
      sink->write("ablation.csv", csv);
      std::cout << report.str();
    } else if (name == "case-study") {
      verify_against_manifest(c_graph);
      verify_against_manifest(c_ckpt);
      const auto g = load_graph_archive(c_graph);
      const auto model = DySuseModel::load(c_ckpt);
      const auto ds = load_ground_truth(c_truth, meta_path_for(c_truth, c_truth_meta));
      if (c_record >= ds.records.size())
        throw ValidationError("case-study: record index out of range");
      const auto& rec = ds.records[c_record];
      const auto pred = model.predict(g, rec.seeds);
      const auto rep = topk_overlap_report(pred, rec.table.final_values(), c_k, rec.seeds);
      const auto text = format_topk_report(rep);
      sink->write("case_study.txt", text);
      std::cout << text;
    }

    sink->write_manifest(common.at(name).ko->effective());
    return 0;
  } catch (const std::exception& e) {
    if (sink) sink->rollback();
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
