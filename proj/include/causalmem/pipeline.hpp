#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "causalmem/checkpoint.hpp"
#include "causalmem/dataset.hpp"
#include "causalmem/index.hpp"
#include "causalmem/memnet.hpp"
#include "causalmem/train.hpp"

namespace causalmem {

/// The top-k corpus sentences for `query`, in rank order, as the memory for
/// that query. Capacity is k; the set may be empty.
MemorySet select_memories(const InvertedIndex& index, const TokenSequence& query, std::size_t k);

MemoryProvider retrieval_provider(const InvertedIndex& index, std::size_t k);

/// Queries for a dataset, encoded against `vocab`, with their labels.
std::vector<LabeledQuery> to_labeled_queries(const std::vector<CauseEffectExample>& examples,
                                             const Vocabulary& vocab);

/// An index directory plus a checkpoint trained against it.
struct ModelContext {
  IndexBundle bundle;
  ModelParams<double> params;
};

/// Loads both and checks that they agree on the vocabulary.
ModelContext load_model_context(const std::filesystem::path& index_dir,
                                const std::filesystem::path& checkpoint);

struct Inference {
  std::vector<ScoredCandidate> candidates;
  double p_causes = 0;
};

/// Validates a free-text "A <CAUSES> B" query and returns its encoding.
/// Throws std::invalid_argument unless the query has exactly one <CAUSES>
/// with words on both sides.
TokenSequence parse_causal_query(std::string_view query, const Vocabulary& vocab);

Inference infer(const ModelContext& ctx, std::string_view query, std::size_t k);

/// key=value lines; accuracy has 4 decimals.
std::string format_report(const EvalReport& report);

// Command entry points: results on `out`, diagnostics on `err`, return the
// process exit status.

struct IndexOptions {
  std::filesystem::path corpus;
  std::filesystem::path out_dir;
  std::size_t min_count = 1;
};

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path index_dir;
  std::filesystem::path out_checkpoint;
  std::optional<std::filesystem::path> metrics;  // default: <checkpoint>.metrics.tsv
  TrainConfig config;
  bool synthesize_negatives = false;
};

struct EvalOptions {
  std::filesystem::path data;
  std::filesystem::path index_dir;
  std::filesystem::path checkpoint;
  double threshold = 0.5;
  std::size_t k = 10;  // the checkpoint does not record the training k
};

struct InferOptions {
  std::filesystem::path index_dir;
  std::filesystem::path checkpoint;
  std::string query;
  std::size_t k = 10;
};

std::filesystem::path default_metrics_path(const std::filesystem::path& checkpoint);

int cmd_index(const IndexOptions& opts, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_infer(const InferOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace causalmem
