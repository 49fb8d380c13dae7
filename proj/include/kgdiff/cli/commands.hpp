#pragma once

// Command implementations behind the kgdiff CLI. Each command declares its
// config schema (unknown keys are rejected by name before any compute),
// honors --seed/--out overrides, and writes its outputs atomically.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgdiff/ddpo/policy.hpp"
#include "kgdiff/io/checkpoint.hpp"
#include "kgdiff/io/config.hpp"
#include "kgdiff/kge/eval.hpp"
#include "kgdiff/kge/train.hpp"
#include "kgdiff/mol/corpus.hpp"
#include "kgdiff/mol/generate.hpp"
#include "kgdiff/pin/guidance.hpp"
#include "kgdiff/pin/train.hpp"

namespace kgdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out;
  std::string profile;
  bool dry_run = false;
  bool print_config = false;
};

inline io::Config load_command_config(const CommonFlags& flags, const std::vector<io::ConfigEntry>& schema) {
  io::Config cfg = flags.config_path.empty() ? io::Config::empty() : io::Config::from_file(flags.config_path);
  cfg.validate_against(schema);
  return cfg;
}

inline uint64_t effective_seed(const CommonFlags& flags, const io::Config& cfg, const char* key = "seed") {
  if (flags.seed) return *flags.seed;
  return cfg.get_u64(key, 0);
}

inline std::string effective_out(const CommonFlags& flags, const io::Config& cfg, const std::string& dflt) {
  if (!flags.out.empty()) return flags.out;
  return cfg.get("out", dflt);
}

// ---------------------------------------------------------------- train-kge

inline const std::vector<io::ConfigEntry>& train_kge_schema() {
  static const std::vector<io::ConfigEntry> schema = {
      {"triples", "", "triple file: subject<TAB>relation<TAB>object"},
      {"types", "", "optional entity typing file: entity<TAB>type"},
      {"constraints", "", "optional relation signature file: relation<TAB>subject_type<TAB>object_type"},
      {"model", "transe", "embedding model: transe | rotate"},
      {"mode", "slcwa", "training mode: slcwa | mle"},
      {"dim", "32", "embedding dimension"},
      {"learning_rate", "0.0001", "Adam learning rate"},
      {"margin", "0.2", "margin gamma for slcwa mode"},
      {"epochs", "100", "training epochs"},
      {"batch_size", "256", "slcwa minibatch size"},
      {"negatives", "1", "negative samples per positive"},
      {"respect_constraints", "true", "draw corruptions inside relation signatures"},
      {"train_frac", "0.8", "train split fraction"},
      {"valid_frac", "0.1", "valid split fraction"},
      {"split_seed", "1234", "seed for the dataset split"},
      {"seeds", "0", "comma-separated training seeds, one model per seed"},
      {"filtered", "true", "filtered ranking during evaluation"},
      {"eval_split", "test", "which split to evaluate: test | valid"},
      {"seed", "0", "fallback training seed when 'seeds' is absent"},
      {"out", "kge_out", "output directory"},
  };
  return schema;
}

struct TrainKgeResult {
  std::vector<std::string> checkpoint_paths;
  std::string report_path;
  kge::EvalReport report;
};

inline TrainKgeResult run_train_kge(const CommonFlags& flags) {
  io::Config cfg = load_command_config(flags, train_kge_schema());
  const std::string triples = cfg.get("triples", "");
  if (triples.empty()) throw std::invalid_argument("train-kge: config key 'triples' is required");
  if (!fs::exists(triples)) throw std::runtime_error("train-kge: missing triple file " + triples);
  const std::string types = cfg.get("types", "");
  const std::string constraints = cfg.get("constraints", "");
  for (const std::string& p : {types, constraints})
    if (!p.empty() && !fs::exists(p)) throw std::runtime_error("train-kge: missing file " + p);

  const std::string out_dir = effective_out(flags, cfg, "kge_out");
  std::vector<uint64_t> seeds;
  if (flags.seed)
    seeds = {*flags.seed};
  else
    for (auto s : cfg.get_u64_list("seeds", {cfg.get_u64("seed", 0)})) seeds.push_back(s);

  if (flags.dry_run) {
    std::cout << "train-kge: would train " << seeds.size() << " seed(s) on " << triples << "\n";
    return {};
  }

  kg::LoadReport load_rep;
  kg::KnowledgeGraph graph = kg::load_triples(triples, types, constraints, &load_rep);
  for (const std::string& w : load_rep.warnings) std::cerr << "warning: " << w << "\n";
  kg::Splits splits = kg::split(graph, cfg.get_double("train_frac", 0.8), cfg.get_double("valid_frac", 0.1),
                                cfg.get_u64("split_seed", 1234));

  kge::KgeConfig kcfg;
  kcfg.kind = cfg.get("model", "transe") == "rotate" ? kge::ModelKind::RotatE : kge::ModelKind::TransE;
  kcfg.mode = cfg.get("mode", "slcwa") == "mle" ? kge::TrainingMode::exact_mle : kge::TrainingMode::slcwa_margin;
  kcfg.dim = int(cfg.get_int("dim", 32));
  kcfg.learning_rate = cfg.get_double("learning_rate", 1e-4);
  kcfg.margin = cfg.get_double("margin", 0.2);
  kcfg.epochs = int(cfg.get_int("epochs", 100));
  kcfg.batch_size = int(cfg.get_int("batch_size", 256));
  kcfg.negatives_per_positive = int(cfg.get_int("negatives", 1));
  kcfg.respect_constraints = cfg.get_bool("respect_constraints", true);

  TrainKgeResult result;
  std::vector<kge::EmbeddingTable> tables;
  for (uint64_t s : seeds) {
    kcfg.seed = s;
    kge::KgeTrainResult tr = kge::train_kge(graph, splits.train, kcfg);
    const std::string path = out_dir + "/embeddings_seed" + std::to_string(s) + ".kgdf";
    io::save_embedding(path, tr.table, graph.dict_hash(),
                       json{{"seed", s}, {"final_loss", tr.loss_trace.back()}});
    result.checkpoint_paths.push_back(path);
    tables.push_back(std::move(tr.table));
  }

  const auto& eval_split = cfg.get("eval_split", "test") == "valid" ? splits.valid : splits.test;
  result.report = kge::evaluate(tables, seeds, graph, eval_split, graph.constraints,
                                cfg.get_bool("filtered", true));
  result.report.dataset = triples;
  result.report.model = cfg.get("model", "transe");
  json rep = kge::report_to_json(result.report);
  rep["split"] = {{"train", splits.train.size()},
                  {"valid", splits.valid.size()},
                  {"test", splits.test.size()},
                  {"reassigned_to_train", splits.reassigned_to_train}};
  result.report_path = out_dir + "/report.json";
  io::write_text_atomic(result.report_path, rep.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------- train-diffusion

inline const std::vector<io::ConfigEntry>& train_diffusion_schema() {
  static const std::vector<io::ConfigEntry> schema = {
      {"corpus", "", "training molecules, one SMILES per line"},
      {"T", "200", "diffusion steps (desk profile; 1000 reproduces the reference schedule)"},
      {"beta_min", "0.0001", "linear schedule start at the reference step count"},
      {"beta_max", "0.02", "linear schedule end at the reference step count"},
      {"steps", "2000", "optimizer steps"},
      {"batch_size", "16", "molecules per step"},
      {"learning_rate", "0.001", "Adam learning rate"},
      {"hidden", "32", "node feature width"},
      {"layers", "3", "message-passing layers"},
      {"time_dim", "16", "sinusoidal time embedding width"},
      {"edge_hidden", "16", "edge head projection width"},
      {"checkpoint_interval", "0", "write an intermediate checkpoint every k steps (0 = off)"},
      {"seed", "0", "training seed"},
      {"out", "diffusion_out", "output directory"},
  };
  return schema;
}

struct TrainDiffusionResult {
  std::string checkpoint_path;
  std::vector<double> loss_trace;
};

inline TrainDiffusionResult run_train_diffusion(const CommonFlags& flags) {
  io::Config cfg = load_command_config(flags, train_diffusion_schema());
  const std::string corpus_path = cfg.get("corpus", "");
  if (corpus_path.empty()) throw std::invalid_argument("train-diffusion: config key 'corpus' is required");
  if (!fs::exists(corpus_path)) throw std::runtime_error("train-diffusion: missing corpus " + corpus_path);
  const std::string out_dir = effective_out(flags, cfg, "diffusion_out");

  if (flags.dry_run) {
    std::cout << "train-diffusion: would train " << cfg.get_int("steps", 2000) << " steps on "
              << corpus_path << "\n";
    return {};
  }

  mol::AtomVocabulary vocab = mol::AtomVocabulary::qm9();
  std::vector<mol::CorpusLoadIssue> issues;
  mol::Corpus corpus = mol::load_corpus(corpus_path, vocab, &issues);
  for (const auto& i : issues)
    std::cerr << "warning: " << corpus_path << ":" << i.line << ": " << i.error << "\n";
  if (corpus.graphs.empty()) throw std::runtime_error("train-diffusion: corpus is empty");

  diffusion::DiffusionTrainConfig tcfg;
  tcfg.net.atom_types = vocab.size();
  tcfg.net.hidden = int(cfg.get_int("hidden", 32));
  tcfg.net.layers = int(cfg.get_int("layers", 3));
  tcfg.net.time_dim = int(cfg.get_int("time_dim", 16));
  tcfg.net.edge_hidden = int(cfg.get_int("edge_hidden", 16));
  tcfg.T = int(cfg.get_int("T", 200));
  tcfg.beta_min = cfg.get_double("beta_min", 1e-4);
  tcfg.beta_max = cfg.get_double("beta_max", 0.02);
  tcfg.steps = int(cfg.get_int("steps", 2000));
  tcfg.batch_size = int(cfg.get_int("batch_size", 16));
  tcfg.learning_rate = cfg.get_double("learning_rate", 1e-3);
  tcfg.seed = effective_seed(flags, cfg);
  tcfg.checkpoint_interval = int(cfg.get_int("checkpoint_interval", 0));

  const uint64_t vhash = io::vocab_hash(vocab);
  auto sink = [&](int step, const diffusion::ScoreNet& net, const diffusion::DiffusionSchedule& sched) {
    io::save_score_net(out_dir + "/score_net_step" + std::to_string(step) + ".kgdf", net, sched, vhash);
  };
  diffusion::DiffusionTrainResult tr =
      diffusion::train_diffusion(corpus.graphs, tcfg, std::nullopt,
                                 tcfg.checkpoint_interval > 0 ? diffusion::CheckpointSink(sink) : nullptr);

  TrainDiffusionResult result;
  result.checkpoint_path = out_dir + "/score_net.kgdf";
  io::save_score_net(result.checkpoint_path, tr.net, tr.schedule, vhash,
                     json{{"steps", tcfg.steps}, {"seed", tcfg.seed}});
  json trace = json::array();
  for (double v : tr.loss_trace) trace.push_back(v);
  io::write_text_atomic(out_dir + "/loss_trace.json", trace.dump() + "\n");
  result.loss_trace = std::move(tr.loss_trace);
  return result;
}

// ---------------------------------------------------------------- train-pin

inline const std::vector<io::ConfigEntry>& train_pin_schema() {
  static const std::vector<io::ConfigEntry> schema = {
      {"pairs", "", "entity<TAB>smiles pairing file"},
      {"kge_checkpoint", "", "trained embedding table"},
      {"triples", "", "triple file (entity dictionary source)"},
      {"types", "", "optional entity typing file"},
      {"constraints", "", "optional constraint file"},
      {"diffusion_checkpoint", "", "score net checkpoint providing the noising schedule"},
      {"hidden", "64", "PIN hidden width"},
      {"attention_layers", "3", "attention layer count"},
      {"steps", "2000", "optimizer steps"},
      {"batch_size", "16", "pairs per step"},
      {"learning_rate", "0.001", "Adam learning rate"},
      {"seed", "0", "training seed"},
      {"out", "pin_out", "output directory"},
  };
  return schema;
}

struct PairedExample {
  std::string entity;
  std::string smiles;
};

inline std::vector<PairedExample> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pairs file: " + path);
  std::vector<PairedExample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected entity<TAB>smiles");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

struct TrainPinResult {
  std::string checkpoint_path;
  std::vector<double> loss_trace;
};

inline TrainPinResult run_train_pin(const CommonFlags& flags) {
  io::Config cfg = load_command_config(flags, train_pin_schema());
  for (const char* key : {"pairs", "kge_checkpoint", "triples", "diffusion_checkpoint"})
    if (cfg.get(key, "").empty())
      throw std::invalid_argument(std::string("train-pin: config key '") + key + "' is required");

  const std::string out_dir = effective_out(flags, cfg, "pin_out");
  if (flags.dry_run) {
    std::cout << "train-pin: would train on " << cfg.get("pairs", "") << "\n";
    return {};
  }

  mol::AtomVocabulary vocab = mol::AtomVocabulary::qm9();
  io::EmbeddingCheckpoint emb = io::load_embedding(cfg.get("kge_checkpoint", ""));
  kg::KnowledgeGraph graph =
      kg::load_triples(cfg.get("triples", ""), cfg.get("types", ""), cfg.get("constraints", ""));
  if (graph.dict_hash() != emb.dict_hash)
    throw std::runtime_error("train-pin: embedding checkpoint was trained on different dictionaries");
  io::ScoreNetCheckpoint diff = io::load_score_net(cfg.get("diffusion_checkpoint", ""));

  std::vector<pin::PinExample> examples;
  for (const PairedExample& p : load_pairs(cfg.get("pairs", ""))) {
    auto ent = graph.entities.find(p.entity);
    if (!ent) throw std::runtime_error("train-pin: pairs file names unknown entity '" + p.entity + "'");
    pin::PinExample ex;
    mol::MolecularGraph g = mol::encode_continuous(mol::parse_smiles(p.smiles, vocab));
    ex.g0 = {std::move(g.X), std::move(g.A)};
    ex.context = pin::embedding_row(emb.table, *ent);
    examples.push_back(std::move(ex));
  }

  pin::PinTrainConfig pcfg;
  pcfg.net.atom_types = vocab.size();
  pcfg.net.hidden = int(cfg.get_int("hidden", 64));
  pcfg.net.attention_layers = int(cfg.get_int("attention_layers", 3));
  pcfg.net.context_dim = emb.table.dim;
  pcfg.steps = int(cfg.get_int("steps", 2000));
  pcfg.batch_size = int(cfg.get_int("batch_size", 16));
  pcfg.learning_rate = cfg.get_double("learning_rate", 1e-3);
  pcfg.seed = effective_seed(flags, cfg);

  pin::PinTrainResult tr = pin::pin_train(examples, diff.schedule, pcfg);

  TrainPinResult result;
  result.checkpoint_path = out_dir + "/pin.kgdf";
  io::save_pin(result.checkpoint_path, tr.net, io::vocab_hash(vocab),
               json{{"kge_dim", emb.table.dim}, {"seed", pcfg.seed}});
  json trace = json::array();
  for (double v : tr.loss_trace) trace.push_back(v);
  io::write_text_atomic(out_dir + "/loss_trace.json", trace.dump() + "\n");
  result.loss_trace = std::move(tr.loss_trace);
  return result;
}

// ------------------------------------------------------------------ metrics

inline const std::vector<io::ConfigEntry>& metrics_schema() {
  static const std::vector<io::ConfigEntry> schema = {
      {"smiles", "", "generated molecules, one SMILES per line"},
      {"corpus", "", "training corpus for the novelty reference"},
      {"novelty_threshold", "0.4", "max training-set similarity still counted novel"},
      {"out", "", "optional output path for the metrics JSON"},
  };
  return schema;
}

struct MetricsResult {
  json metrics;
};

// shared by generate (inline) and metrics (offline recomputation)
inline json metrics_json_from_graphs(const std::vector<mol::MolecularGraph>& graphs,
                                     const mol::AtomVocabulary& vocab,
                                     const std::vector<mol::BitVector>& training_fps,
                                     double novelty_threshold,
                                     std::vector<mol::MoleculeFlags>* flags_out = nullptr) {
  mol::GenerationMetrics m =
      mol::generation_metrics(graphs, vocab, training_fps, flags_out, novelty_threshold);
  return json{{"total", m.total},
              {"valid", m.valid},
              {"validity", m.validity()},
              {"uniqueness", m.uniqueness()},
              {"novelty", m.novelty()},
              {"fcd", nullptr},
              {"fcd_reason", "requires external pretrained network"}};
}

inline MetricsResult run_metrics(const CommonFlags& flags) {
  io::Config cfg = load_command_config(flags, metrics_schema());
  const std::string smiles_path = cfg.get("smiles", "");
  const std::string corpus_path = cfg.get("corpus", "");
  if (smiles_path.empty() || corpus_path.empty())
    throw std::invalid_argument("metrics: config keys 'smiles' and 'corpus' are required");

  mol::AtomVocabulary vocab = mol::AtomVocabulary::qm9();
  mol::Corpus corpus = mol::load_corpus(corpus_path, vocab);

  // every non-comment line counts; unparseable lines become invalid entries
  std::ifstream in(smiles_path);
  if (!in) throw std::runtime_error("metrics: cannot open " + smiles_path);
  std::vector<mol::MolecularGraph> graphs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      graphs.push_back(mol::parse_smiles(line, vocab));
    } catch (const mol::SmilesError& e) {
      std::cerr << "note: " << smiles_path << ":" << line_no << ": counted invalid (" << e.what() << ")\n";
      mol::MolecularGraph empty;
      empty.X = Mat(0, vocab.size());
      empty.A = Mat(0, 0);
      graphs.push_back(std::move(empty));
    }
  }

  MetricsResult res;
  res.metrics = metrics_json_from_graphs(graphs, vocab, corpus.fingerprints(),
                                         cfg.get_double("novelty_threshold", 0.4));
  const std::string out = effective_out(flags, cfg, "");
  if (!out.empty()) io::write_text_atomic(out, res.metrics.dump(2) + "\n");
  return res;
}

// ----------------------------------------------------------------- generate

inline const std::vector<io::ConfigEntry>& generate_schema() {
  static const std::vector<io::ConfigEntry> schema = {
      {"checkpoint", "", "score net checkpoint"},
      {"corpus", "", "training corpus (size distribution + novelty reference)"},
      {"n", "1000", "molecules to sample (10000 reproduces the reference count)"},
      {"fixed_atoms", "0", "pin the node count (> 0) instead of drawing from the corpus"},
      {"prior_noise_scale", "1.0", "out-of-distribution knob scaling the t = T prior draw"},
      {"novelty_threshold", "0.4", "max training-set similarity still counted novel"},
      {"pin_checkpoint", "", "PIN checkpoint; enables guided sampling"},
      {"kge_checkpoint", "", "embedding checkpoint used to resolve the context"},
      {"triples", "", "triple file (dictionary source for the context lookup)"},
      {"types", "", "optional typing file"},
      {"constraints", "", "optional constraint file"},
      {"context_entity", "", "context = this entity's embedding"},
      {"context_relation", "", "context pattern relation"},
      {"context_fixed", "", "context pattern fixed entity"},
      {"context_blank", "head", "which slot is blank in the pattern: head | tail"},
      {"context_composite", "false", "use the translated/rotated composite instead of the top completion"},
      {"guidance_lambda", "1.0", "guidance strength"},
      {"guidance_alpha", "1.0", "alpha scaling inside log p(c|G)"},
      {"seed", "0", "sampling seed"},
      {"out", "generate_out", "output directory"},
  };
  return schema;
}

struct GenerateResult {
  std::string smiles_path;
  std::string metrics_path;
  std::string sidecar_path;
  json metrics;
  std::vector<mol::MolecularGraph> molecules;
  std::vector<diffusion::GraphState> terminal_states;
};

inline GenerateResult run_generate(const CommonFlags& flags) {
  io::Config cfg = load_command_config(flags, generate_schema());
  const std::string ckpt_path = cfg.get("checkpoint", "");
  const std::string corpus_path = cfg.get("corpus", "");
  if (ckpt_path.empty() || corpus_path.empty())
    throw std::invalid_argument("generate: config keys 'checkpoint' and 'corpus' are required");

  const bool wants_guidance = !cfg.get("context_entity", "").empty() ||
                              !cfg.get("context_relation", "").empty();
  if (wants_guidance && cfg.get("pin_checkpoint", "").empty())
    throw std::invalid_argument("generate: guidance requested but 'pin_checkpoint' is missing");
  if (wants_guidance && cfg.get("kge_checkpoint", "").empty())
    throw std::invalid_argument("generate: guidance requested but 'kge_checkpoint' is missing");

  const std::string out_dir = effective_out(flags, cfg, "generate_out");
  if (flags.dry_run) {
    std::cout << "generate: would sample " << cfg.get_int("n", 1000) << " molecules\n";
    return {};
  }

  mol::AtomVocabulary vocab = mol::AtomVocabulary::qm9();
  io::ScoreNetCheckpoint ckpt = io::load_score_net(ckpt_path);
  if (ckpt.vocab_hash != io::vocab_hash(vocab))
    throw std::runtime_error("generate: checkpoint was trained with a different atom vocabulary");
  mol::Corpus corpus = mol::load_corpus(corpus_path, vocab);
  if (corpus.graphs.empty()) throw std::runtime_error("generate: corpus is empty");

  std::vector<int> size_pool;
  for (const auto& g : corpus.graphs) size_pool.push_back(g.num_atoms());

  // context + PIN guidance
  std::optional<diffusion::Guidance> guidance;
  io::PinCheckpoint pin_ckpt;
  json context_info;
  if (wants_guidance) {
    pin_ckpt = io::load_pin(cfg.get("pin_checkpoint", ""));
    io::EmbeddingCheckpoint emb = io::load_embedding(cfg.get("kge_checkpoint", ""));
    kg::KnowledgeGraph graph =
        kg::load_triples(cfg.get("triples", ""), cfg.get("types", ""), cfg.get("constraints", ""));
    pin::ContextSpec spec;
    if (!cfg.get("context_entity", "").empty()) {
      spec.entity_label = cfg.get("context_entity", "");
    } else {
      spec.is_pattern = true;
      spec.relation_label = cfg.get("context_relation", "");
      spec.fixed_label = cfg.get("context_fixed", "");
      spec.blank = cfg.get("context_blank", "head") == "tail" ? kg::Slot::tail : kg::Slot::head;
      spec.composite = cfg.get_bool("context_composite", false);
    }
    pin::ContextVector ctx = pin::context_from_kge(emb.table, graph, spec);
    if (ctx.c.cols != pin_ckpt.net.cfg.context_dim)
      throw std::runtime_error("generate: context dimension does not match the PIN checkpoint");
    context_info = {{"provenance", ctx.provenance}};
    guidance = pin::pin_guidance(pin_ckpt.net, ctx.c, cfg.get_double("guidance_lambda", 1.0),
                                 cfg.get_double("guidance_alpha", 1.0));
  }

  diffusion::SampleOptions opts;
  opts.fixed_atoms = int(cfg.get_int("fixed_atoms", 0));
  opts.prior_noise_scale = cfg.get_double("prior_noise_scale", 1.0);

  Rng root(effective_seed(flags, cfg));
  diffusion::SampleResult samples =
      diffusion::sample(diffusion::network_score_fn(ckpt.net, ckpt.schedule), int(cfg.get_int("n", 1000)),
                        ckpt.schedule, vocab, size_pool, root, guidance, opts);

  // one line per requested molecule; invalid samples emit a marker no
  // parser accepts, so offline recomputation sees the same counts
  const std::vector<mol::BitVector> training_fps = corpus.fingerprints();
  const double threshold = cfg.get_double("novelty_threshold", 0.4);
  std::vector<mol::MoleculeFlags> per_mol;
  json metrics = metrics_json_from_graphs(samples.molecules, vocab, training_fps, threshold, &per_mol);

  std::string lines;
  for (const auto& g : samples.molecules) {
    if (mol::validity_check(g, vocab).valid)
      lines += mol::write_smiles(g, vocab) + "\n";
    else
      lines += "*invalid*\n";
  }

  GenerateResult result;
  result.smiles_path = out_dir + "/samples.smi";
  result.metrics_path = out_dir + "/metrics.json";
  result.sidecar_path = out_dir + "/samples_meta.json";
  io::write_text_atomic(result.smiles_path, lines);
  if (!context_info.is_null()) metrics["context"] = context_info;
  io::write_text_atomic(result.metrics_path, metrics.dump(2) + "\n");

  json sidecar = json::array();
  for (size_t i = 0; i < per_mol.size(); ++i)
    sidecar.push_back({{"index", i},
                       {"valid", per_mol[i].valid},
                       {"unique", per_mol[i].unique},
                       {"novel", per_mol[i].novel}});
  io::write_text_atomic(result.sidecar_path, sidecar.dump(2) + "\n");

  result.metrics = std::move(metrics);
  result.molecules = std::move(samples.molecules);
  result.terminal_states = std::move(samples.terminal_states);
  return result;
}

// ----------------------------------------------------------------- finetune

inline const std::vector<io::ConfigEntry>& finetune_schema() {
  static const std::vector<io::ConfigEntry> schema = {
      {"checkpoint", "", "base score net checkpoint"},
      {"corpus", "", "training corpus (size pool + novelty fingerprints)"},
      {"profile", "unconditional", "reward profile: unconditional | targeted | custom"},
      {"kappa_file", "", "custom kappa weights (flat config) when profile = custom"},
      {"kappa4", "1.0", "invalidity penalty"},
      {"iterations", "200", "fine-tune iterations"},
      {"batch", "64", "trajectories per iteration"},
      {"eta", "0.00001", "gradient-ascent learning rate"},
      {"timestep_stride", "10", "every k-th timestep enters the estimator"},
      {"estimator", "modified", "policy gradient kind: modified | stepwise"},
      {"sigma2_weighted", "true", "sigma^2 weighting of the modified estimator"},
      {"clamp_negative_advantages", "true", "attraction-only stabilization"},
      {"fixed_atoms", "0", "pin the node count during rollouts"},
      {"seed", "0", "fine-tune seed"},
      {"out", "finetune_out", "run directory"},
  };
  return schema;
}

struct FinetuneResult {
  std::string checkpoint_path;
  std::string trace_path;
  ddpo::DdpoResult ddpo;
};

inline ddpo::RewardWeights resolve_profile(const io::Config& cfg, const std::string& profile_name) {
  ddpo::RewardWeights w;
  if (profile_name == "custom") {
    const std::string kappa_file = cfg.get("kappa_file", "");
    if (kappa_file.empty()) throw std::invalid_argument("finetune: profile 'custom' needs 'kappa_file'");
    io::Config kc = io::Config::from_file(kappa_file);
    w.kappa1 = kc.get_double("kappa1", 0.0);
    w.kappa2 = kc.get_double("kappa2", 0.0);
    w.kappa3 = kc.get_double("kappa3", 1.0);
    w.kappa4 = kc.get_double("kappa4", 1.0);
    w.c_validity_weight = kc.get_double("c_validity_weight", 0.7);
    w.c_novelty_weight = kc.get_double("c_novelty_weight", 0.2);
  } else {
    auto named = ddpo::RewardWeights::named_profile(profile_name);
    if (!named)
      throw std::invalid_argument("finetune: unknown profile '" + profile_name +
                                  "'; available: unconditional, targeted, custom");
    w = *named;
    w.kappa4 = cfg.get_double("kappa4", 1.0);
  }
  w.validate();
  return w;
}

inline FinetuneResult run_finetune(const CommonFlags& flags) {
  io::Config cfg = load_command_config(flags, finetune_schema());
  const std::string ckpt_path = cfg.get("checkpoint", "");
  const std::string corpus_path = cfg.get("corpus", "");
  if (ckpt_path.empty() || corpus_path.empty())
    throw std::invalid_argument("finetune: config keys 'checkpoint' and 'corpus' are required");
  if (!fs::exists(ckpt_path)) throw std::runtime_error("finetune: missing checkpoint " + ckpt_path);

  const std::string profile_name = flags.profile.empty() ? cfg.get("profile", "unconditional") : flags.profile;
  const ddpo::RewardWeights weights = resolve_profile(cfg, profile_name);
  const std::string out_dir = effective_out(flags, cfg, "finetune_out");

  if (flags.dry_run) {
    std::cout << "finetune: would run " << cfg.get_int("iterations", 200) << " iterations with profile "
              << profile_name << "\n";
    return {};
  }

  mol::AtomVocabulary vocab = mol::AtomVocabulary::qm9();
  mol::Corpus corpus = mol::load_corpus(corpus_path, vocab);
  const std::vector<mol::BitVector> fps = corpus.fingerprints();
  std::vector<int> size_pool;
  for (const auto& g : corpus.graphs) size_pool.push_back(g.num_atoms());

  // resume: continue from the previous run's checkpoint and trace
  const std::string resumed_ckpt = out_dir + "/finetuned.kgdf";
  const std::string trace_path = out_dir + "/reward_trace.jsonl";
  std::string base_path = ckpt_path;
  int iteration_offset = 0;
  if (fs::exists(resumed_ckpt) && fs::exists(trace_path)) {
    base_path = resumed_ckpt;
    std::ifstream trace_in(trace_path);
    std::string line;
    while (std::getline(trace_in, line))
      if (!line.empty()) ++iteration_offset;
    std::cout << "finetune: resuming from iteration " << iteration_offset << "\n";
  }

  io::ScoreNetCheckpoint base = io::load_score_net(base_path);
  const int fixed_atoms = int(cfg.get_int("fixed_atoms", 0));

  ddpo::RewardFn reward_fn = [&](const mol::MolecularGraph& g) {
    return ddpo::reward(g, weights, vocab, fps);
  };

  ddpo::DdpoConfig dcfg;
  dcfg.iterations = int(cfg.get_int("iterations", 200));
  dcfg.batch = int(cfg.get_int("batch", 64));
  dcfg.eta = cfg.get_double("eta", 1e-5);
  dcfg.timestep_stride = int(cfg.get_int("timestep_stride", 10));
  dcfg.kind = cfg.get("estimator", "modified") == "stepwise" ? ddpo::PolicyGradientKind::stepwise
                                                             : ddpo::PolicyGradientKind::modified;
  dcfg.sigma2_weighted = cfg.get_bool("sigma2_weighted", true);
  dcfg.clamp_negative_advantages = cfg.get_bool("clamp_negative_advantages", true);
  dcfg.seed = effective_seed(flags, cfg) + uint64_t(iteration_offset) * 0x9e3779b9ull;

  const std::vector<int> sizes = fixed_atoms > 0 ? std::vector<int>{fixed_atoms} : size_pool;
  ddpo::DdpoResult res = ddpo::ddpo_finetune(base.net, base.schedule, vocab, sizes, reward_fn, dcfg);

  FinetuneResult result;
  result.checkpoint_path = resumed_ckpt;
  result.trace_path = trace_path;
  io::save_score_net(result.checkpoint_path, res.net, base.schedule, base.vocab_hash,
                     json{{"profile", profile_name}, {"iterations", res.iterations_run + iteration_offset}});

  // config snapshot + appended reward trace
  std::string snapshot = "# finetune run snapshot\nprofile = " + profile_name + "\n";
  for (const auto& [k, v] : cfg.values()) snapshot += k + " = " + v + "\n";
  io::write_text_atomic(out_dir + "/config_snapshot.cfg", snapshot);

  std::ostringstream trace_append;
  for (int i = 0; i < res.iterations_run; ++i) {
    json line = {{"iteration", iteration_offset + i},
                 {"mean_reward", res.reward_trace[size_t(i)]},
                 {"validity", res.validity_trace[size_t(i)]}};
    trace_append << line.dump() << "\n";
  }
  {
    fs::create_directories(out_dir);
    std::ofstream trace_out(trace_path, std::ios::app);
    trace_out << trace_append.str();
  }
  result.ddpo = std::move(res);
  return result;
}

}  // namespace kgdiff::cli
