#include "causalmem/index.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace causalmem {

namespace {

TokenSequence distinct_terms(const TokenSequence& query) {
  TokenSequence terms = query;
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexError("missing index file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

template <typename T>
T parse_number(std::string_view field, const std::filesystem::path& file, std::size_t line) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw IndexError("corrupt index file " + file.string() + " at line " +
                     std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return value;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IndexError("cannot write " + path.string());
  return out;
}

}  // namespace

InvertedIndex InvertedIndex::build(std::vector<TokenSequence> documents,
                                   std::vector<std::string> texts) {
  if (documents.empty()) throw IndexError("cannot index an empty corpus");
  if (!texts.empty() && texts.size() != documents.size()) {
    throw IndexError("document/text count mismatch");
  }

  InvertedIndex index;
  index.doc_lengths_.reserve(documents.size());
  std::size_t total_length = 0;
  for (std::size_t doc = 0; doc < documents.size(); ++doc) {
    const auto& seq = documents[doc];
    if (seq.empty()) {
      throw IndexError("empty document at line " + std::to_string(doc + 1));
    }
    std::map<TokenId, std::size_t> tf;
    for (TokenId t : seq) ++tf[t];
    // documents are visited in ascending order, so each list stays sorted
    for (const auto& [term, count] : tf) index.postings_[term].push_back({doc, count});
    index.doc_lengths_.push_back(seq.size());
    total_length += seq.size();
  }
  index.avg_doc_length_ =
      static_cast<double>(total_length) / static_cast<double>(documents.size());
  index.documents_ = std::move(documents);
  index.texts_ = std::move(texts);
  return index;
}

std::size_t InvertedIndex::document_frequency(TokenId term) const {
  const auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double InvertedIndex::idf(TokenId term) const {
  const auto n = static_cast<double>(doc_count());
  const auto df = static_cast<double>(document_frequency(term));
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double InvertedIndex::term_weight(TokenId term, std::size_t tf, std::size_t doc_id) const {
  const double f = static_cast<double>(tf);
  const double dl = static_cast<double>(doc_lengths_[doc_id]);
  const double norm = bm25_.k1 * (1.0 - bm25_.b + bm25_.b * dl / avg_doc_length_);
  return idf(term) * (f * (bm25_.k1 + 1.0)) / (f + norm);
}

double InvertedIndex::score(const TokenSequence& query, std::size_t doc_id) const {
  if (doc_id >= doc_count()) {
    throw std::out_of_range("doc_id " + std::to_string(doc_id) + " out of range");
  }
  double total = 0.0;
  for (TokenId term : distinct_terms(query)) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& list = it->second;
    const auto pos = std::lower_bound(
        list.begin(), list.end(), doc_id,
        [](const Posting& p, std::size_t d) { return p.doc_id < d; });
    if (pos != list.end() && pos->doc_id == doc_id) {
      total += term_weight(term, pos->tf, doc_id);
    }
  }
  return total;
}

std::vector<ScoredCandidate> InvertedIndex::top_k(const TokenSequence& query,
                                                  std::size_t k) const {
  if (k == 0) throw std::invalid_argument("k must be >= 1");

  // Accumulate term by term in ascending term order: the same additions, in
  // the same order, as score(), so the two agree bit for bit.
  std::vector<double> acc(doc_count(), 0.0);
  std::vector<bool> touched(doc_count(), false);
  for (TokenId term : distinct_terms(query)) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    for (const Posting& p : it->second) {
      acc[p.doc_id] += term_weight(term, p.tf, p.doc_id);
      touched[p.doc_id] = true;
    }
  }

  std::vector<ScoredCandidate> ranked;
  for (std::size_t doc = 0; doc < doc_count(); ++doc) {
    if (touched[doc] && acc[doc] > 0.0) ranked.push_back({doc, acc[doc]});
  }
  const auto before = [](const ScoredCandidate& a, const ScoredCandidate& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  };
  const std::size_t keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), before);
  ranked.resize(keep);
  return ranked;
}

IndexBundle index_corpus(const std::vector<std::string>& lines, std::size_t min_count) {
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      tokenized.push_back(tokenize(lines[i]));
    } catch (const DecodeError& e) {
      throw IndexError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }

  Vocabulary vocab = build_vocab(tokenized, min_count);
  std::vector<TokenSequence> docs;
  std::vector<std::string> texts;
  docs.reserve(tokenized.size());
  texts.reserve(tokenized.size());
  for (const auto& toks : tokenized) {
    docs.push_back(encode(toks, vocab));
    texts.push_back(join(toks));
  }
  auto index = InvertedIndex::build(std::move(docs), std::move(texts));
  return {std::move(vocab), std::move(index)};
}

void persist_index(const InvertedIndex& index, const Vocabulary& vocab,
                   const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  vocab.save(directory / "vocab.txt");

  {
    auto out = open_for_write(directory / "corpus.txt");
    for (std::size_t doc = 0; doc < index.doc_count(); ++doc) {
      if (index.has_texts()) {
        out << index.text(doc) << '\n';
      } else {
        std::vector<std::string> toks;
        for (TokenId t : index.documents()[doc]) toks.push_back(vocab.token(t));
        out << join(toks) << '\n';
      }
    }
  }
  {
    auto out = open_for_write(directory / "postings.tsv");
    for (const auto& [term, list] : index.postings()) {
      out << term << '\t';
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (i) out << ',';
        out << list[i].doc_id << ':' << list[i].tf;
      }
      out << '\n';
    }
  }
  {
    auto out = open_for_write(directory / "doclens.tsv");
    for (std::size_t doc = 0; doc < index.doc_count(); ++doc) {
      out << doc << '\t' << index.doc_lengths()[doc] << '\n';
    }
  }
}

IndexBundle load_index(const std::filesystem::path& directory) {
  Vocabulary vocab;
  try {
    vocab = Vocabulary::load(directory / "vocab.txt");
  } catch (const std::runtime_error& e) {
    throw IndexError(e.what());
  }

  const auto corpus_path = directory / "corpus.txt";
  const auto lines = read_lines(corpus_path);
  std::vector<TokenSequence> docs;
  docs.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      docs.push_back(encode(tokenize(lines[i]), vocab));
    } catch (const DecodeError& e) {
      throw IndexError("corrupt index file " + corpus_path.string() + " at line " +
                       std::to_string(i + 1) + ": " + e.what());
    }
  }

  InvertedIndex index = [&] {
    try {
      return InvertedIndex::build(docs, lines);
    } catch (const IndexError& e) {
      throw IndexError("corrupt index file " + corpus_path.string() + ": " + e.what());
    }
  }();

  // doclens.tsv and postings.tsv must describe exactly this corpus.
  const auto doclens_path = directory / "doclens.tsv";
  const auto doclen_lines = read_lines(doclens_path);
  if (doclen_lines.size() != index.doc_count()) {
    throw IndexError("corrupt index file " + doclens_path.string() +
                     ": document count disagrees with corpus.txt");
  }
  for (std::size_t i = 0; i < doclen_lines.size(); ++i) {
    const auto tab = doclen_lines[i].find('\t');
    if (tab == std::string::npos) {
      throw IndexError("corrupt index file " + doclens_path.string() + " at line " +
                       std::to_string(i + 1));
    }
    const std::string_view line = doclen_lines[i];
    const auto doc = parse_number<std::size_t>(line.substr(0, tab), doclens_path, i + 1);
    const auto len = parse_number<std::size_t>(line.substr(tab + 1), doclens_path, i + 1);
    if (doc != i || len != index.doc_lengths()[i]) {
      throw IndexError("corrupt index file " + doclens_path.string() + " at line " +
                       std::to_string(i + 1) + ": disagrees with corpus.txt");
    }
  }

  const auto postings_path = directory / "postings.tsv";
  const auto posting_lines = read_lines(postings_path);
  std::map<TokenId, std::vector<Posting>> loaded;
  for (std::size_t i = 0; i < posting_lines.size(); ++i) {
    const std::string_view line = posting_lines[i];
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw IndexError("corrupt index file " + postings_path.string() + " at line " +
                       std::to_string(i + 1));
    }
    const auto term = parse_number<TokenId>(line.substr(0, tab), postings_path, i + 1);
    auto& list = loaded[term];
    std::stringstream entries{std::string(line.substr(tab + 1))};
    std::string entry;
    while (std::getline(entries, entry, ',')) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos) {
        throw IndexError("corrupt index file " + postings_path.string() + " at line " +
                         std::to_string(i + 1));
      }
      const std::string_view e = entry;
      list.push_back({parse_number<std::size_t>(e.substr(0, colon), postings_path, i + 1),
                      parse_number<std::size_t>(e.substr(colon + 1), postings_path, i + 1)});
    }
  }
  if (loaded != index.postings()) {
    throw IndexError("corrupt index file " + postings_path.string() +
                     ": postings disagree with corpus.txt");
  }

  return {std::move(vocab), std::move(index)};
}

}  // namespace causalmem
