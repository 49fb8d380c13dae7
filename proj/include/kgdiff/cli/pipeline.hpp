#pragma once

// End-to-end pipeline: KGE train -> context extraction -> PIN train ->
// diffusion train -> DDPO fine-tune -> guided generation. Every stage
// persists its artifact under <out>/<stage>/ and the manifest records
// content hashes of each stage's inputs and artifact; a rerun with
// unchanged inputs skips completed stages by hash match. Any stage failure
// halts with the stage name; earlier artifacts stay on disk.
//
// Also: the corpus and synthetic-KG generators that produce the bundled
// desk-scale data files.

#include "kgdiff/cli/commands.hpp"

namespace kgdiff::cli {

inline const std::vector<io::ConfigEntry>& pipeline_schema() {
  static std::vector<io::ConfigEntry> schema = [] {
    std::vector<io::ConfigEntry> s = {
        {"corpus", "", "molecule corpus, one SMILES per line"},
        {"triples", "", "knowledge graph triples"},
        {"types", "", "entity typing file"},
        {"constraints", "", "relation signature file"},
        {"pairs", "", "entity<TAB>smiles pairing file"},
        {"out", "pipeline_out", "run directory"},
        {"seed", "0", "master seed; stages derive named substreams"},
    };
    auto prefix = [&s](const std::string& p, const std::vector<io::ConfigEntry>& sub,
                       const std::vector<std::string>& skip) {
      for (const io::ConfigEntry& e : sub) {
        bool skipped = false;
        for (const std::string& k : skip)
          if (e.key == k) skipped = true;
        if (!skipped) s.push_back({p + e.key, e.default_value, e.description});
      }
    };
    prefix("kge.", train_kge_schema(), {"triples", "types", "constraints", "out", "seed", "seeds"});
    prefix("diffusion.", train_diffusion_schema(), {"corpus", "out", "seed"});
    prefix("pin.", train_pin_schema(),
           {"pairs", "kge_checkpoint", "triples", "types", "constraints", "diffusion_checkpoint", "out", "seed"});
    prefix("ddpo.", finetune_schema(), {"checkpoint", "corpus", "out", "seed"});
    prefix("generate.", generate_schema(),
           {"checkpoint", "corpus", "pin_checkpoint", "kge_checkpoint", "triples", "types", "constraints",
            "out", "seed"});
    return s;
  }();
  return schema;
}

namespace detail_pipeline {

// sub-config view: strips "<stage>." prefixed keys into a fresh config
inline io::Config stage_config(const io::Config& cfg, const std::string& stage) {
  io::Config out = io::Config::empty();
  const std::string prefix = stage + ".";
  for (const auto& [k, v] : cfg.values())
    if (k.rfind(prefix, 0) == 0) out.set(k.substr(prefix.size()), v);
  return out;
}

struct StageRecord {
  std::string name;
  json inputs = json::array();
  std::string artifact;
  uint64_t artifact_hash = 0;
};

inline json manifest_entry(const StageRecord& r) {
  return json{{"stage", r.name},
              {"inputs", r.inputs},
              {"artifact", r.artifact},
              {"artifact_hash", r.artifact_hash}};
}

inline json hash_inputs(const std::vector<std::string>& paths) {
  json arr = json::array();
  for (const std::string& p : paths) arr.push_back({{"path", p}, {"hash", io::file_hash(p)}});
  return arr;
}

inline bool stage_is_current(const json& manifest, const std::string& stage, const json& inputs,
                             const std::string& artifact) {
  if (!fs::exists(artifact)) return false;
  for (const auto& entry : manifest)
    if (entry.value("stage", "") == stage) {
      if (entry["inputs"] != inputs) return false;
      return entry.value("artifact_hash", uint64_t(0)) == io::file_hash(artifact);
    }
  return false;
}

}  // namespace detail_pipeline

struct PipelineResult {
  std::string manifest_path;
  json manifest;
  std::vector<std::string> skipped;
  std::vector<std::string> executed;
};

inline PipelineResult run_pipeline(const CommonFlags& flags) {
  using namespace detail_pipeline;
  io::Config cfg = load_command_config(flags, pipeline_schema());
  for (const char* key : {"corpus", "triples", "pairs"})
    if (cfg.get(key, "").empty())
      throw std::invalid_argument(std::string("pipeline: config key '") + key + "' is required");

  const std::string out_dir = effective_out(flags, cfg, "pipeline_out");
  const uint64_t master_seed = effective_seed(flags, cfg);
  Rng master(master_seed);

  const std::string corpus = cfg.get("corpus", "");
  const std::string triples = cfg.get("triples", "");
  const std::string types = cfg.get("types", "");
  const std::string constraints = cfg.get("constraints", "");
  const std::string pairs = cfg.get("pairs", "");
  for (const std::string& p : {corpus, triples, pairs})
    if (!fs::exists(p)) throw std::runtime_error("pipeline: missing input file " + p);
  for (const std::string& p : {types, constraints})
    if (!p.empty() && !fs::exists(p)) throw std::runtime_error("pipeline: missing input file " + p);

  if (flags.dry_run) {
    std::cout << "pipeline: 6 stages validated (kge, context, pin, diffusion, ddpo, generate); "
              << "outputs under " << out_dir << "\n";
    return {};
  }

  const std::string manifest_path = out_dir + "/manifest.json";
  json manifest = json::array();
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    manifest = json::parse(std::string(std::istreambuf_iterator<char>(in), {}));
  }

  PipelineResult result;
  json new_manifest = json::array();
  std::string current_stage;

  auto run_stage = [&](const std::string& stage, const std::vector<std::string>& inputs,
                       const std::string& artifact, auto&& body) {
    current_stage = stage;
    json input_hashes = hash_inputs(inputs);
    if (stage_is_current(manifest, stage, input_hashes, artifact)) {
      result.skipped.push_back(stage);
      for (const auto& entry : manifest)
        if (entry.value("stage", "") == stage) new_manifest.push_back(entry);
      return;
    }
    body();
    if (!fs::exists(artifact))
      throw std::runtime_error("pipeline stage '" + stage + "' did not produce " + artifact);
    StageRecord rec;
    rec.name = stage;
    rec.inputs = std::move(input_hashes);
    rec.artifact = artifact;
    rec.artifact_hash = io::file_hash(artifact);
    new_manifest.push_back(manifest_entry(rec));
    result.executed.push_back(stage);
  };

  try {
    // 1. KGE training
    const std::string kge_ckpt_dir = out_dir + "/kge";
    const uint64_t kge_seed = master.seed_for("stage-kge");
    const std::string kge_ckpt = kge_ckpt_dir + "/embeddings_seed" + std::to_string(kge_seed) + ".kgdf";
    run_stage("kge", {triples}, kge_ckpt, [&] {
      CommonFlags f;
      f.seed = kge_seed;
      f.out = kge_ckpt_dir;
      io::Config sub = stage_config(cfg, "kge");
      sub.set("triples", triples);
      if (!types.empty()) sub.set("types", types);
      if (!constraints.empty()) sub.set("constraints", constraints);
      std::string tmp = out_dir + "/kge_stage.cfg";
      std::string body;
      for (const auto& [k, v] : sub.values()) body += k + " = " + v + "\n";
      io::write_text_atomic(tmp, body);
      f.config_path = tmp;
      run_train_kge(f);
    });

    // 2. context extraction
    const std::string context_path = out_dir + "/context/context.json";
    run_stage("context", {triples, kge_ckpt}, context_path, [&] {
      io::EmbeddingCheckpoint emb = io::load_embedding(kge_ckpt);
      kg::KnowledgeGraph graph = kg::load_triples(triples, types, constraints);
      io::Config gen = stage_config(cfg, "generate");
      pin::ContextSpec spec;
      if (!gen.get("context_entity", "").empty()) {
        spec.entity_label = gen.get("context_entity", "");
      } else if (!gen.get("context_relation", "").empty()) {
        spec.is_pattern = true;
        spec.relation_label = gen.get("context_relation", "");
        spec.fixed_label = gen.get("context_fixed", "");
        spec.blank = gen.get("context_blank", "head") == "tail" ? kg::Slot::tail : kg::Slot::head;
        spec.composite = gen.get_bool("context_composite", false);
      } else {
        throw std::invalid_argument(
            "pipeline: set generate.context_entity or generate.context_relation for the context stage");
      }
      pin::ContextVector ctx = pin::context_from_kge(emb.table, graph, spec);
      json j = {{"provenance", ctx.provenance}, {"dim", ctx.c.cols}, {"values", ctx.c.a}};
      io::write_text_atomic(context_path, j.dump(2) + "\n");
    });

    // 3. diffusion training (needed before PIN for the noising schedule)
    const std::string diffusion_ckpt = out_dir + "/diffusion/score_net.kgdf";
    run_stage("diffusion", {corpus}, diffusion_ckpt, [&] {
      CommonFlags f;
      f.seed = master.seed_for("stage-diffusion");
      f.out = out_dir + "/diffusion";
      io::Config sub = stage_config(cfg, "diffusion");
      sub.set("corpus", corpus);
      std::string tmp = out_dir + "/diffusion_stage.cfg";
      std::string body;
      for (const auto& [k, v] : sub.values()) body += k + " = " + v + "\n";
      io::write_text_atomic(tmp, body);
      f.config_path = tmp;
      run_train_diffusion(f);
    });

    // 4. PIN training
    const std::string pin_ckpt = out_dir + "/pin/pin.kgdf";
    run_stage("pin", {pairs, kge_ckpt, diffusion_ckpt}, pin_ckpt, [&] {
      CommonFlags f;
      f.seed = master.seed_for("stage-pin");
      f.out = out_dir + "/pin";
      io::Config sub = stage_config(cfg, "pin");
      sub.set("pairs", pairs);
      sub.set("kge_checkpoint", kge_ckpt);
      sub.set("triples", triples);
      if (!types.empty()) sub.set("types", types);
      if (!constraints.empty()) sub.set("constraints", constraints);
      sub.set("diffusion_checkpoint", diffusion_ckpt);
      std::string tmp = out_dir + "/pin_stage.cfg";
      std::string body;
      for (const auto& [k, v] : sub.values()) body += k + " = " + v + "\n";
      io::write_text_atomic(tmp, body);
      f.config_path = tmp;
      run_train_pin(f);
    });

    // 5. DDPO fine-tuning
    const std::string ddpo_ckpt = out_dir + "/ddpo/finetuned.kgdf";
    run_stage("ddpo", {diffusion_ckpt, corpus}, ddpo_ckpt, [&] {
      CommonFlags f;
      f.seed = master.seed_for("stage-ddpo");
      f.out = out_dir + "/ddpo";
      io::Config sub = stage_config(cfg, "ddpo");
      sub.set("checkpoint", diffusion_ckpt);
      sub.set("corpus", corpus);
      std::string tmp = out_dir + "/ddpo_stage.cfg";
      std::string body;
      for (const auto& [k, v] : sub.values()) body += k + " = " + v + "\n";
      io::write_text_atomic(tmp, body);
      f.config_path = tmp;
      run_finetune(f);
    });

    // 6. guided generation
    const std::string samples = out_dir + "/generate/samples.smi";
    run_stage("generate", {ddpo_ckpt, pin_ckpt, kge_ckpt, corpus}, samples, [&] {
      CommonFlags f;
      f.seed = master.seed_for("stage-generate");
      f.out = out_dir + "/generate";
      io::Config sub = stage_config(cfg, "generate");
      sub.set("checkpoint", ddpo_ckpt);
      sub.set("corpus", corpus);
      sub.set("pin_checkpoint", pin_ckpt);
      sub.set("kge_checkpoint", kge_ckpt);
      sub.set("triples", triples);
      if (!types.empty()) sub.set("types", types);
      if (!constraints.empty()) sub.set("constraints", constraints);
      std::string tmp = out_dir + "/generate_stage.cfg";
      std::string body;
      for (const auto& [k, v] : sub.values()) body += k + " = " + v + "\n";
      io::write_text_atomic(tmp, body);
      f.config_path = tmp;
      run_generate(f);
    });
  } catch (const std::exception& e) {
    throw std::runtime_error("pipeline halted at stage '" + current_stage + "': " + e.what());
  }

  result.manifest = std::move(new_manifest);
  result.manifest_path = manifest_path;
  io::write_text_atomic(manifest_path, result.manifest.dump(2) + "\n");
  return result;
}

// -------------------------------------------------------------- make-corpus

inline const std::vector<io::ConfigEntry>& make_corpus_schema() {
  static const std::vector<io::ConfigEntry> schema = {
      {"count", "1200", "distinct molecules to generate"},
      {"min_atoms", "4", "minimum heavy atoms"},
      {"max_atoms", "9", "maximum heavy atoms"},
      {"seed", "20240901", "generator seed"},
      {"out", "data/qm9_subset.smi", "output SMILES file"},
  };
  return schema;
}

inline std::string run_make_corpus(const CommonFlags& flags) {
  io::Config cfg = load_command_config(flags, make_corpus_schema());
  const std::string out = effective_out(flags, cfg, "data/qm9_subset.smi");
  const uint64_t seed = flags.seed ? *flags.seed : cfg.get_u64("seed", 20240901);
  mol::AtomVocabulary vocab = mol::AtomVocabulary::qm9();
  std::vector<std::string> smiles =
      mol::generate_corpus(vocab, int(cfg.get_int("count", 1200)), int(cfg.get_int("min_atoms", 4)),
                           int(cfg.get_int("max_atoms", 9)), seed);
  std::string body = "# synthetic desk-scale corpus: random valence-respecting CNOF molecules\n";
  body += "# generated by: kgdiff make-corpus (seed " + std::to_string(seed) + ", count " +
          std::to_string(smiles.size()) + ")\n";
  for (const std::string& s : smiles) body += s + "\n";
  io::write_text_atomic(out, body);
  return out;
}

// ------------------------------------------------------------------ make-kg

inline const std::vector<io::ConfigEntry>& make_kg_schema() {
  static const std::vector<io::ConfigEntry> schema = {
      {"corpus", "", "molecule corpus whose entries become drug entities"},
      {"families", "12", "drug/protein family count"},
      {"drugs_per_family", "5", "drugs per family"},
      {"proteins_per_family", "3", "proteins per family"},
      {"seed", "7", "generator seed"},
      {"out", "data/kg", "output prefix; writes triples/types/constraints/pairs .tsv"},
  };
  return schema;
}

struct MakeKgResult {
  std::string triples, types, constraints, pairs;
};

// Synthetic drug-target graph with planted block structure: every drug in a
// family targets every protein in the family, drugs within a family form a
// similarity chain, and each drug entity is paired with a corpus molecule.
inline MakeKgResult run_make_kg(const CommonFlags& flags) {
  io::Config cfg = load_command_config(flags, make_kg_schema());
  const std::string corpus_path = cfg.get("corpus", "");
  if (corpus_path.empty()) throw std::invalid_argument("make-kg: config key 'corpus' is required");
  mol::AtomVocabulary vocab = mol::AtomVocabulary::qm9();
  mol::Corpus corpus = mol::load_corpus(corpus_path, vocab);

  const int families = int(cfg.get_int("families", 12));
  const int dpf = int(cfg.get_int("drugs_per_family", 5));
  const int ppf = int(cfg.get_int("proteins_per_family", 3));
  const int n_drugs = families * dpf;
  if (int(corpus.smiles.size()) < n_drugs)
    throw std::runtime_error("make-kg: corpus has fewer molecules than requested drugs");

  const std::string prefix = effective_out(flags, cfg, "data/kg");
  MakeKgResult out;
  out.triples = prefix + "_triples.tsv";
  out.types = prefix + "_types.tsv";
  out.constraints = prefix + "_constraints.tsv";
  out.pairs = prefix + "_pairs.tsv";

  std::string triples = "# synthetic drug-target graph with planted family blocks\n";
  std::string types, pairs;
  for (int f = 0; f < families; ++f) {
    for (int d = 0; d < dpf; ++d) {
      const std::string drug = "drug_f" + std::to_string(f) + "_" + std::to_string(d);
      types += drug + "\tdrug\n";
      pairs += drug + "\t" + corpus.smiles[size_t(f * dpf + d)] + "\n";
      for (int p = 0; p < ppf; ++p)
        triples += drug + "\ttargets\tprot_f" + std::to_string(f) + "_" + std::to_string(p) + "\n";
      if (d + 1 < dpf)
        triples += drug + "\tsimilar_to\tdrug_f" + std::to_string(f) + "_" + std::to_string(d + 1) + "\n";
    }
    for (int p = 0; p < ppf; ++p)
      types += "prot_f" + std::to_string(f) + "_" + std::to_string(p) + "\tprotein\n";
  }
  std::string constraints = "targets\tdrug\tprotein\nsimilar_to\tdrug\tdrug\n";

  io::write_text_atomic(out.triples, triples);
  io::write_text_atomic(out.types, types);
  io::write_text_atomic(out.constraints, constraints);
  io::write_text_atomic(out.pairs, pairs);
  return out;
}

}  // namespace kgdiff::cli
