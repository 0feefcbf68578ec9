#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalmem/text.hpp"

namespace causalmem {

class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Posting {
  std::size_t doc_id = 0;
  std::size_t tf = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct ScoredCandidate {
  std::size_t doc_id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Term -> postings over a corpus of sentences, each sentence one document.
/// Immutable once built.
class InvertedIndex {
 public:
  /// Throws IndexError for an empty corpus or an empty document.
  static InvertedIndex build(std::vector<TokenSequence> documents,
                             std::vector<std::string> texts = {});

  std::size_t doc_count() const { return documents_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  const std::vector<std::size_t>& doc_lengths() const { return doc_lengths_; }
  const std::map<TokenId, std::vector<Posting>>& postings() const { return postings_; }
  const std::vector<TokenSequence>& documents() const { return documents_; }

  /// Surface text of a document: one line of corpus.txt.
  const std::string& text(std::size_t doc_id) const { return texts_.at(doc_id); }
  bool has_texts() const { return !texts_.empty(); }

  std::size_t document_frequency(TokenId term) const;
  double idf(TokenId term) const;

  /// BM25 of one document. Duplicate query terms count once.
  double score(const TokenSequence& query, std::size_t doc_id) const;

  /// Exact top-k over documents with positive score; descending score,
  /// ascending doc_id on ties.
  std::vector<ScoredCandidate> top_k(const TokenSequence& query, std::size_t k) const;

  const Bm25Params& bm25() const { return bm25_; }

 private:
  InvertedIndex() = default;
  double term_weight(TokenId term, std::size_t tf, std::size_t doc_id) const;

  std::map<TokenId, std::vector<Posting>> postings_;
  std::vector<std::size_t> doc_lengths_;
  std::vector<TokenSequence> documents_;
  std::vector<std::string> texts_;
  double avg_doc_length_ = 0.0;
  Bm25Params bm25_;
};

inline InvertedIndex build_index(std::vector<TokenSequence> documents) {
  return InvertedIndex::build(std::move(documents));
}

/// A loaded index directory: the vocabulary it was encoded with plus the index.
struct IndexBundle {
  Vocabulary vocab;
  InvertedIndex index;
};

/// Tokenizes every line, builds the vocabulary, and indexes the result.
/// Empty lines are build errors naming the (1-based) line.
IndexBundle index_corpus(const std::vector<std::string>& lines, std::size_t min_count = 1);

/// Writes vocab.txt, corpus.txt, postings.tsv, doclens.tsv.
void persist_index(const InvertedIndex& index, const Vocabulary& vocab,
                   const std::filesystem::path& directory);

/// Throws IndexError naming the offending file when something is missing or
/// inconsistent.
IndexBundle load_index(const std::filesystem::path& directory);

}  // namespace causalmem
