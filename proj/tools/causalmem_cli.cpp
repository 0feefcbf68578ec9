// causalmem: retrieve top-k corpus sentences as memory and score
// "A <CAUSES> B" queries with an end-to-end memory network.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "causalmem/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace causalmem;

  CLI::App app{"Cause-effect scoring with top-k retrieved memories"};
  app.require_subcommand(1);

  IndexOptions index_opts;
  auto* index_cmd = app.add_subcommand("index", "Build an index directory from a corpus");
  index_cmd->add_option("--corpus", index_opts.corpus, "Corpus, one sentence per line")
      ->required();
  index_cmd->add_option("--out", index_opts.out_dir, "Output index directory")->required();
  index_cmd->add_option("--min-count", index_opts.min_count, "Minimum token count")
      ->capture_default_str();

  TrainOptions train_opts;
  std::string tying = "adjacent";
  std::string metrics_path;
  auto& cfg = train_opts.config;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a cause-effect TSV");
  train_cmd->add_option("--data", train_opts.data, "cause<TAB>effect<TAB>label file")
      ->required();
  train_cmd->add_option("--index", train_opts.index_dir, "Index directory")->required();
  train_cmd->add_option("--out", train_opts.out_checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--dim", cfg.dim, "Embedding dimension")->capture_default_str();
  train_cmd->add_option("--hops", cfg.hops, "Memory hops")->capture_default_str();
  train_cmd->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch", cfg.batch_size, "Minibatch size")->capture_default_str();
  train_cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--k", cfg.k, "Memories retrieved per query")->capture_default_str();
  train_cmd->add_option("--tying", tying, "Weight tying across hops")
      ->check(CLI::IsMember({"adjacent", "untied"}))
      ->capture_default_str();
  train_cmd->add_option("--metrics", metrics_path, "Metrics file (default <out>.metrics.tsv)");
  train_cmd->add_flag("--synth-negatives", train_opts.synthesize_negatives,
                      "Replace label-0 rows with re-paired negatives");
  train_cmd->add_option("--negative-ratio", cfg.negative_ratio,
                        "Negatives per positive with --synth-negatives")
      ->capture_default_str();

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled TSV");
  eval_cmd->add_option("--data", eval_opts.data, "cause<TAB>effect<TAB>label file")->required();
  eval_cmd->add_option("--index", eval_opts.index_dir, "Index directory")->required();
  eval_cmd->add_option("--model", eval_opts.checkpoint, "Checkpoint")->required();
  eval_cmd->add_option("--threshold", eval_opts.threshold, "Decision threshold on P(causes)")
      ->capture_default_str();
  eval_cmd->add_option("--k", eval_opts.k, "Memories retrieved per query")->capture_default_str();

  InferOptions infer_opts;
  auto* infer_cmd = app.add_subcommand("infer", "Score one \"A <CAUSES> B\" query");
  infer_cmd->add_option("--index", infer_opts.index_dir, "Index directory")->required();
  infer_cmd->add_option("--model", infer_opts.checkpoint, "Checkpoint")->required();
  infer_cmd->add_option("--query", infer_opts.query, "Query, e.g. \"rain <CAUSES> flood\"")
      ->required();
  infer_cmd->add_option("--k", infer_opts.k, "Memories retrieved")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*index_cmd) return cmd_index(index_opts, std::cout, std::cerr);
  if (*train_cmd) {
    cfg.tying = tying == "untied" ? Tying::kUntied : Tying::kAdjacent;
    if (!metrics_path.empty()) train_opts.metrics = metrics_path;
    return cmd_train(train_opts, std::cout, std::cerr);
  }
  if (*eval_cmd) return cmd_eval(eval_opts, std::cout, std::cerr);
  return cmd_infer(infer_opts, std::cout, std::cerr);
}
