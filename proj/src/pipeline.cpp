#include "causalmem/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace causalmem {

namespace {

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::vector<std::string> read_corpus_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

MemorySet select_memories(const InvertedIndex& index, const TokenSequence& query,
                          std::size_t k) {
  MemorySet memories;
  memories.capacity = k;
  for (const auto& hit : index.top_k(query, k)) {
    memories.sentences.push_back(index.documents()[hit.doc_id]);
  }
  return memories;
}

MemoryProvider retrieval_provider(const InvertedIndex& index, std::size_t k) {
  return [&index, k](const TokenSequence& query) { return select_memories(index, query, k); };
}

std::vector<LabeledQuery> to_labeled_queries(const std::vector<CauseEffectExample>& examples,
                                             const Vocabulary& vocab) {
  std::vector<LabeledQuery> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({pair_to_query(ex, vocab), static_cast<std::size_t>(ex.label)});
  }
  return out;
}

ModelContext load_model_context(const std::filesystem::path& index_dir,
                                const std::filesystem::path& checkpoint) {
  auto bundle = load_index(index_dir);
  auto params = load_checkpoint(checkpoint);
  if (params.vocab_size() != bundle.vocab.size()) {
    throw std::runtime_error("vocabulary mismatch: checkpoint has V=" +
                             std::to_string(params.vocab_size()) + " but index has V=" +
                             std::to_string(bundle.vocab.size()));
  }
  const auto sidecar = vocab_sidecar_path(checkpoint);
  if (std::filesystem::exists(sidecar) && !(Vocabulary::load(sidecar) == bundle.vocab)) {
    throw std::runtime_error("vocabulary mismatch: " + sidecar.string() +
                             " differs from the index vocabulary");
  }
  if (params.labels() != 2) throw std::runtime_error("checkpoint is not a binary classifier");
  return {std::move(bundle), std::move(params)};
}

TokenSequence parse_causal_query(std::string_view query, const Vocabulary& vocab) {
  const auto tokens = tokenize(query);
  const auto marker = std::count(tokens.begin(), tokens.end(), std::string(kCausesToken));
  if (marker != 1) {
    throw std::invalid_argument("query must contain exactly one <CAUSES> token, e.g. "
                                "\"rain <CAUSES> flood\"");
  }
  const auto at = std::find(tokens.begin(), tokens.end(), std::string(kCausesToken));
  if (at == tokens.begin() || at + 1 == tokens.end()) {
    throw std::invalid_argument("query needs words on both sides of <CAUSES>, e.g. "
                                "\"rain <CAUSES> flood\"");
  }
  return encode(tokens, vocab);
}

Inference infer(const ModelContext& ctx, std::string_view query, std::size_t k) {
  const auto ids = parse_causal_query(query, ctx.bundle.vocab);
  Inference result;
  result.candidates = ctx.bundle.index.top_k(ids, k);
  const auto memories = select_memories(ctx.bundle.index, ids, k);
  const auto cache = forward(ctx.params, memories, ids);
  result.p_causes = cache.prediction(static_cast<Eigen::Index>(kCausesLabel));
  return result;
}

std::string format_report(const EvalReport& r) {
  std::string s;
  s += "total=" + std::to_string(r.total) + "\n";
  s += "correct=" + std::to_string(r.correct) + "\n";
  s += "accuracy=" + fixed(r.accuracy, 4) + "\n";
  s += "tp=" + std::to_string(r.tp) + "\n";
  s += "tn=" + std::to_string(r.tn) + "\n";
  s += "fp=" + std::to_string(r.fp) + "\n";
  s += "fn=" + std::to_string(r.fn) + "\n";
  return s;
}

std::filesystem::path default_metrics_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".metrics.tsv";
  return p;
}

int cmd_index(const IndexOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (opts.min_count == 0) throw std::invalid_argument("--min-count must be >= 1");
    const auto lines = read_corpus_lines(opts.corpus);
    const auto bundle = index_corpus(lines, opts.min_count);
    persist_index(bundle.index, bundle.vocab, opts.out_dir);
    out << "N=" << bundle.index.doc_count() << "\n";
    out << "V=" << bundle.vocab.size() << "\n";
    out << "avg_doc_length=" << fixed(bundle.index.avg_doc_length(), 4) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "index: " << e.what() << "\n";
    return 1;
  }
}

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    opts.config.validate();
    if (opts.config.labels != 2) throw std::invalid_argument("the causal task has 2 labels");
    const auto bundle = load_index(opts.index_dir);

    auto examples = load_pairs(opts.data);
    if (opts.synthesize_negatives) {
      std::vector<CauseEffectExample> positives;
      std::copy_if(examples.begin(), examples.end(), std::back_inserter(positives),
                   [](const auto& ex) { return ex.label == 1; });
      examples = positives;
      const auto negatives =
          generate_negatives(positives, opts.config.negative_ratio, opts.config.seed);
      examples.insert(examples.end(), negatives.begin(), negatives.end());
    }
    if (examples.empty()) throw std::invalid_argument("training data is empty");

    const auto queries = to_labeled_queries(examples, bundle.vocab);
    const auto train_set =
        attach_memories(queries, retrieval_provider(bundle.index, opts.config.k));
    const auto result = train_loop<double>(std::span<const TrainingExample>(train_set),
                                           bundle.vocab.size(), opts.config);

    save_checkpoint(opts.out_checkpoint, result.params);
    bundle.vocab.save(vocab_sidecar_path(opts.out_checkpoint));

    const auto metrics_path = opts.metrics.value_or(default_metrics_path(opts.out_checkpoint));
    std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics " + metrics_path.string());
    for (const auto& m : result.metrics) {
      metrics << m.epoch << '\t' << fixed(m.mean_loss, 10) << '\t'
              << fixed(m.train_accuracy, 6) << '\n';
    }

    const auto& last = result.metrics.back();
    out << "examples=" << train_set.size() << "\n";
    out << "epochs=" << last.epoch << "\n";
    out << "final_loss=" << fixed(last.mean_loss, 6) << "\n";
    out << "train_accuracy=" << fixed(last.train_accuracy, 4) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (!(opts.threshold > 0 && opts.threshold < 1)) {
      throw std::invalid_argument("--threshold must be in (0, 1)");
    }
    const auto ctx = load_model_context(opts.index_dir, opts.checkpoint);
    const auto examples = load_pairs(opts.data);
    if (examples.empty()) throw std::invalid_argument("test data is empty");

    if (opts.k == 0) throw std::invalid_argument("--k must be >= 1");
    const auto queries = to_labeled_queries(examples, ctx.bundle.vocab);
    const auto report = evaluate(ctx.params, std::span<const LabeledQuery>(queries),
                                 retrieval_provider(ctx.bundle.index, opts.k),
                                 opts.threshold);
    out << format_report(report);
    return 0;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << "\n";
    return 1;
  }
}

int cmd_infer(const InferOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (opts.k == 0) throw std::invalid_argument("--k must be >= 1");
    const auto ctx = load_model_context(opts.index_dir, opts.checkpoint);
    const auto result = infer(ctx, opts.query, opts.k);
    for (const auto& c : result.candidates) {
      out << c.doc_id << '\t' << fixed(c.score, 6) << '\t' << ctx.bundle.index.text(c.doc_id)
          << "\n";
    }
    out << "p_causes=" << fixed(result.p_causes, 6) << "\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    err << "infer: " << e.what() << "\n"
        << "usage: infer --index DIR --model FILE --query \"A <CAUSES> B\" [--k 10]\n";
    return 2;
  } catch (const std::exception& e) {
    err << "infer: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace causalmem
