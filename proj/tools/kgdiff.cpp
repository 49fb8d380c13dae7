// kgdiff: knowledge-guided molecular graph diffusion, end to end.
//
//   kgdiff <command> [--config file] [--seed N] [--out dir]
//                    [--profile name] [--dry-run] [--print-config]
//
// Commands: train-kge, train-diffusion, train-pin, generate, metrics,
// finetune, pipeline, make-corpus, make-kg.

#include <cstdio>
#include <iostream>
#include <string>

#include "kgdiff/cli/pipeline.hpp"

namespace {

using namespace kgdiff;
using namespace kgdiff::cli;

void print_usage() {
  std::cout <<
      "Usage: kgdiff <command> [options]\n"
      "\n"
      "Commands:\n"
      "  train-kge        train knowledge graph embeddings and evaluate link prediction\n"
      "  train-diffusion  train the score-based graph diffusion model\n"
      "  train-pin        train the property inference network\n"
      "  generate         sample molecules (optionally guided) and report metrics\n"
      "  metrics          recompute validity/uniqueness/novelty from a SMILES file\n"
      "  finetune         DDPO fine-tuning against a reward profile\n"
      "  pipeline         run all six stages with a manifest\n"
      "  make-corpus      generate the bundled synthetic molecule corpus\n"
      "  make-kg          generate a synthetic drug-target knowledge graph\n"
      "\n"
      "Options:\n"
      "  --config <file>   flat key=value configuration (supports one 'include')\n"
      "  --seed <n>        override the config seed\n"
      "  --out <dir>       override the output location\n"
      "  --profile <name>  reward profile for finetune (unconditional | targeted | custom)\n"
      "  --dry-run         validate configuration without compute\n"
      "  --print-config    dump the command's known keys with defaults and exit\n";
}

const std::vector<io::ConfigEntry>& schema_for(const std::string& command) {
  if (command == "train-kge") return train_kge_schema();
  if (command == "train-diffusion") return train_diffusion_schema();
  if (command == "train-pin") return train_pin_schema();
  if (command == "generate") return generate_schema();
  if (command == "metrics") return metrics_schema();
  if (command == "finetune") return finetune_schema();
  if (command == "pipeline") return pipeline_schema();
  if (command == "make-corpus") return make_corpus_schema();
  if (command == "make-kg") return make_kg_schema();
  throw std::invalid_argument("unknown command '" + command + "'");
}

int dispatch(const std::string& command, const CommonFlags& flags) {
  if (command == "train-kge") {
    TrainKgeResult r = run_train_kge(flags);
    if (!flags.dry_run)
      std::cout << "train-kge: " << r.checkpoint_paths.size() << " checkpoint(s), report at "
                << r.report_path << "\n"
                << "  AMR " << r.report.mean.amr << " +/- " << r.report.stddev.amr
                << " | MRR " << r.report.mean.mrr << " +/- " << r.report.stddev.mrr
                << " | Hits@1 " << r.report.mean.hits1 << " | Hits@10 " << r.report.mean.hits10 << "\n";
  } else if (command == "train-diffusion") {
    TrainDiffusionResult r = run_train_diffusion(flags);
    if (!flags.dry_run)
      std::cout << "train-diffusion: checkpoint at " << r.checkpoint_path << ", final loss "
                << (r.loss_trace.empty() ? 0.0 : r.loss_trace.back()) << "\n";
  } else if (command == "train-pin") {
    TrainPinResult r = run_train_pin(flags);
    if (!flags.dry_run)
      std::cout << "train-pin: checkpoint at " << r.checkpoint_path << ", final loss "
                << (r.loss_trace.empty() ? 0.0 : r.loss_trace.back()) << "\n";
  } else if (command == "generate") {
    GenerateResult r = run_generate(flags);
    if (!flags.dry_run)
      std::cout << "generate: " << r.smiles_path << "\n" << r.metrics.dump(2) << "\n";
  } else if (command == "metrics") {
    MetricsResult r = run_metrics(flags);
    std::cout << r.metrics.dump(2) << "\n";
  } else if (command == "finetune") {
    FinetuneResult r = run_finetune(flags);
    if (!flags.dry_run) {
      const auto& trace = r.ddpo.reward_trace;
      std::cout << "finetune: checkpoint at " << r.checkpoint_path << ", " << r.ddpo.iterations_run
                << " iteration(s)";
      if (!trace.empty()) std::cout << ", mean reward " << trace.front() << " -> " << trace.back();
      if (r.ddpo.early_stopped) std::cout << " (early stop)";
      std::cout << "\n";
    }
  } else if (command == "pipeline") {
    PipelineResult r = run_pipeline(flags);
    if (!flags.dry_run) {
      std::cout << "pipeline: manifest at " << r.manifest_path << "\n";
      for (const std::string& s : r.executed) std::cout << "  ran " << s << "\n";
      for (const std::string& s : r.skipped) std::cout << "  skipped " << s << " (inputs unchanged)\n";
    }
  } else if (command == "make-corpus") {
    std::cout << "make-corpus: wrote " << run_make_corpus(flags) << "\n";
  } else if (command == "make-kg") {
    MakeKgResult r = run_make_kg(flags);
    std::cout << "make-kg: wrote " << r.triples << ", " << r.types << ", " << r.constraints << ", "
              << r.pairs << "\n";
  } else {
    print_usage();
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    print_usage();
    return 1;
  }
  const std::string command = argv[1];
  if (command == "--help" || command == "-h" || command == "help") {
    print_usage();
    return 0;
  }

  CommonFlags flags;
  for (int i = 2; i < argc; ++i) {
    const std::string arg = argv[i];
    auto next = [&](const char* name) -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "error: " << name << " needs a value\n";
        std::exit(1);
      }
      return argv[++i];
    };
    if (arg == "--config")
      flags.config_path = next("--config");
    else if (arg == "--seed")
      flags.seed = std::stoull(next("--seed"));
    else if (arg == "--out")
      flags.out = next("--out");
    else if (arg == "--profile")
      flags.profile = next("--profile");
    else if (arg == "--dry-run")
      flags.dry_run = true;
    else if (arg == "--print-config")
      flags.print_config = true;
    else {
      std::cerr << "error: unknown option '" << arg << "'\n";
      print_usage();
      return 1;
    }
  }

  try {
    if (flags.print_config) {
      std::cout << kgdiff::io::Config::render_defaults(schema_for(command));
      return 0;
    }
    return dispatch(command, flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
