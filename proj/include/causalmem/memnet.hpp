#pragma once

// End-to-end memory network over position-encoded sentences.
//
// Embedding matrices are d x V with one column per token. A query is
// embedded with B into the internal state u_1. Each hop h attends over the
// memory vectors m_i (embedded with A_h), reads the output vectors c_i
// (embedded with C_h), and updates u_{h+1} = u_h + o_h. The prediction is
// softmax(W u_{H+1}) with W of shape L x d.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalmem/text.hpp"

namespace causalmem {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Tying : std::uint32_t { kAdjacent = 0, kUntied = 1 };

struct ModelShape {
  std::size_t vocab_size = 0;  // V
  std::size_t dim = 20;        // d
  std::size_t hops = 2;        // H
  std::size_t labels = 2;      // L
  Tying tying = Tying::kAdjacent;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;

  void validate() const {
    if (vocab_size < 3 || dim < 1 || hops < 1 || labels < 2) {
      throw std::invalid_argument("invalid model shape: need V>=3, d>=1, H>=1, L>=2");
    }
  }

  /// Distinct memory-embedding matrices actually stored.
  std::size_t memory_matrix_count() const {
    return tying == Tying::kAdjacent ? hops + 1 : 2 * hops;
  }
};

/// Weights of the network. Under adjacent tying A_{h+1} and C_h are one
/// matrix: writes through either accessor are seen by both.
///
/// Memory matrices are stored in checkpoint order: A_1, C_1, ..., C_H when
/// tied, A_1, C_1, A_2, C_2, ... when untied.
template <typename Scalar>
class ModelParams {
 public:
  ModelParams() = default;

  explicit ModelParams(const ModelShape& shape) : shape_(shape) {
    shape_.validate();
    const auto d = static_cast<Eigen::Index>(shape.dim);
    const auto v = static_cast<Eigen::Index>(shape.vocab_size);
    memory_.assign(shape.memory_matrix_count(), Matrix<Scalar>::Zero(d, v));
    query_ = Matrix<Scalar>::Zero(d, v);
    output_ = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(shape.labels), d);
  }

  /// Same shape, all zeros.
  static ModelParams zeros_like(const ModelParams& other) { return ModelParams(other.shape_); }

  const ModelShape& shape() const { return shape_; }
  std::size_t dim() const { return shape_.dim; }
  std::size_t hops() const { return shape_.hops; }
  std::size_t vocab_size() const { return shape_.vocab_size; }
  std::size_t labels() const { return shape_.labels; }

  // Hops are 0-based here: A(0) is A_1.
  Matrix<Scalar>& A(std::size_t hop) { return memory_.at(a_slot(hop)); }
  const Matrix<Scalar>& A(std::size_t hop) const { return memory_.at(a_slot(hop)); }
  Matrix<Scalar>& C(std::size_t hop) { return memory_.at(c_slot(hop)); }
  const Matrix<Scalar>& C(std::size_t hop) const { return memory_.at(c_slot(hop)); }
  Matrix<Scalar>& B() { return query_; }
  const Matrix<Scalar>& B() const { return query_; }
  Matrix<Scalar>& W() { return output_; }
  const Matrix<Scalar>& W() const { return output_; }

  /// Every distinct storage block, in checkpoint order: memory matrices, B, W.
  std::vector<Matrix<Scalar>*> tensors() {
    std::vector<Matrix<Scalar>*> out;
    for (auto& m : memory_) out.push_back(&m);
    out.push_back(&query_);
    out.push_back(&output_);
    return out;
  }
  std::vector<const Matrix<Scalar>*> tensors() const {
    std::vector<const Matrix<Scalar>*> out;
    for (const auto& m : memory_) out.push_back(&m);
    out.push_back(&query_);
    out.push_back(&output_);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
    return n;
  }

  bool all_finite() const {
    for (const auto* t : tensors()) {
      if (!t->allFinite()) return false;
    }
    return true;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!(a.shape_ == b.shape_)) return false;
    const auto ta = a.tensors();
    const auto tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
      if (*ta[i] != *tb[i]) return false;
    }
    return true;
  }

 private:
  std::size_t a_slot(std::size_t hop) const {
    return shape_.tying == Tying::kAdjacent ? hop : 2 * hop;
  }
  std::size_t c_slot(std::size_t hop) const {
    return shape_.tying == Tying::kAdjacent ? hop + 1 : 2 * hop + 1;
  }

  ModelShape shape_;
  std::vector<Matrix<Scalar>> memory_;
  Matrix<Scalar> query_;
  Matrix<Scalar> output_;
};

/// Gradients share the layout of the parameters they belong to.
template <typename Scalar>
using Gradients = ModelParams<Scalar>;

/// The sentences written to memory for one query.
struct MemorySet {
  std::vector<TokenSequence> sentences;
  std::size_t capacity = 0;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
};

/// Position-encoding weights, d x J:
///   l(k, j) = (1 - j/J) - (k/d) (1 - 2j/J),  k = 1..d, j = 1..J,
/// stored 0-based.
template <typename Scalar = double>
Matrix<Scalar> pe_matrix(std::size_t sentence_length, std::size_t dim) {
  if (sentence_length == 0 || dim == 0) {
    throw std::invalid_argument("pe_matrix needs J >= 1 and d >= 1");
  }
  const auto J = static_cast<Scalar>(sentence_length);
  const auto d = static_cast<Scalar>(dim);
  Matrix<Scalar> l(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(sentence_length));
  for (Eigen::Index k = 0; k < l.rows(); ++k) {
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      const Scalar kk = static_cast<Scalar>(k + 1);
      const Scalar jj = static_cast<Scalar>(j + 1);
      l(k, j) = (Scalar(1) - jj / J) - (kk / d) * (Scalar(1) - Scalar(2) * jj / J);
    }
  }
  return l;
}

/// sum_j l_j (.) E[:, x_j]
template <typename Derived>
Vector<typename Derived::Scalar> embed_sentence(const TokenSequence& seq,
                                                const Eigen::MatrixBase<Derived>& embedding) {
  using Scalar = typename Derived::Scalar;
  if (seq.empty()) throw std::invalid_argument("cannot embed an empty sentence");
  const auto l = pe_matrix<Scalar>(seq.size(), static_cast<std::size_t>(embedding.rows()));
  Vector<Scalar> out = Vector<Scalar>::Zero(embedding.rows());
  for (std::size_t j = 0; j < seq.size(); ++j) {
    if (seq[j] >= static_cast<std::size_t>(embedding.cols())) {
      throw std::out_of_range("token id " + std::to_string(seq[j]) + " >= V");
    }
    out += l.col(static_cast<Eigen::Index>(j))
               .cwiseProduct(embedding.col(static_cast<Eigen::Index>(seq[j])));
  }
  return out;
}

/// Adds l_j (.) grad into grad_embedding[:, x_j] for every position j.
template <typename Scalar, typename Derived>
void embed_sentence_backward(const TokenSequence& seq, const Eigen::MatrixBase<Derived>& grad,
                             Matrix<Scalar>& grad_embedding) {
  const auto l = pe_matrix<Scalar>(seq.size(), static_cast<std::size_t>(grad_embedding.rows()));
  for (std::size_t j = 0; j < seq.size(); ++j) {
    grad_embedding.col(static_cast<Eigen::Index>(seq[j])) +=
        l.col(static_cast<Eigen::Index>(j)).cwiseProduct(grad);
  }
}

/// Max-subtracted exp-normalize. Throws on NaN or empty input.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw std::invalid_argument("softmax of an empty vector");
  if (v.hasNaN()) throw std::domain_error("softmax input contains NaN");
  const Scalar max = v.maxCoeff();
  // scalar std::exp: the vectorized path clamps very negative inputs instead
  // of underflowing to zero
  Vector<Scalar> e = (v.array() - max).unaryExpr([](Scalar x) { return std::exp(x); }).matrix();
  return e / e.sum();
}

template <typename Scalar>
struct HopResult {
  Vector<Scalar> attention;  // p, one entry per memory slot
  Vector<Scalar> response;   // o
  Vector<Scalar> next_state; // u + o
  Matrix<Scalar> memory_vectors;  // m_i as columns, d x n
  Matrix<Scalar> output_vectors;  // c_i as columns, d x n
};

/// One round of attention over memory. Empty memory reads o = 0.
template <typename Scalar>
HopResult<Scalar> hop(const Vector<Scalar>& state, const MemorySet& memories,
                      const Matrix<Scalar>& input_embedding,
                      const Matrix<Scalar>& output_embedding) {
  const auto d = input_embedding.rows();
  const auto n = static_cast<Eigen::Index>(memories.size());
  HopResult<Scalar> r;
  r.memory_vectors.resize(d, n);
  r.output_vectors.resize(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& sentence = memories.sentences[static_cast<std::size_t>(i)];
    r.memory_vectors.col(i) = embed_sentence(sentence, input_embedding);
    r.output_vectors.col(i) = embed_sentence(sentence, output_embedding);
  }
  if (n == 0) {
    r.attention.resize(0);
    r.response = Vector<Scalar>::Zero(d);
  } else {
    r.attention = softmax(r.memory_vectors.transpose() * state);
    r.response = r.output_vectors * r.attention;
  }
  r.next_state = state + r.response;
  return r;
}

/// Everything backward() needs from one forward pass.
template <typename Scalar>
struct ForwardCache {
  TokenSequence query;
  MemorySet memories;
  std::vector<Vector<Scalar>> states;  // u_1 .. u_{H+1}
  std::vector<HopResult<Scalar>> hops;
  Vector<Scalar> logits;
  Vector<Scalar> prediction;  // a-hat
};

template <typename Scalar>
ForwardCache<Scalar> forward(const ModelParams<Scalar>& params, const MemorySet& memories,
                             const TokenSequence& query) {
  if (query.empty()) throw std::invalid_argument("query must be non-empty");
  ForwardCache<Scalar> cache;
  cache.query = query;
  cache.memories = memories;
  cache.states.reserve(params.hops() + 1);
  cache.hops.reserve(params.hops());

  cache.states.push_back(embed_sentence(query, params.B()));
  for (std::size_t h = 0; h < params.hops(); ++h) {
    cache.hops.push_back(hop(cache.states.back(), memories, params.A(h), params.C(h)));
    cache.states.push_back(cache.hops.back().next_state);
  }
  cache.logits = params.W() * cache.states.back();
  cache.prediction = softmax(cache.logits);
  return cache;
}

/// Exact gradient of -ln(a-hat[label]) with respect to every parameter.
template <typename Scalar>
Gradients<Scalar> backward(const ForwardCache<Scalar>& cache, const ModelParams<Scalar>& params,
                           std::size_t label) {
  if (label >= params.labels()) {
    throw std::out_of_range("label " + std::to_string(label) + " >= L");
  }
  auto grads = Gradients<Scalar>::zeros_like(params);

  Vector<Scalar> grad_logits = cache.prediction;
  grad_logits(static_cast<Eigen::Index>(label)) -= Scalar(1);

  grads.W() = grad_logits * cache.states.back().transpose();
  // gradient with respect to u_{h+1}, walked back one hop at a time
  Vector<Scalar> grad_state = params.W().transpose() * grad_logits;

  for (std::size_t h = params.hops(); h-- > 0;) {
    const auto& r = cache.hops[h];
    const auto& state = cache.states[h];
    if (r.attention.size() == 0) continue;  // u_{h+1} = u_h

    // o = C p
    const Vector<Scalar> grad_attention = r.output_vectors.transpose() * grad_state;
    // softmax Jacobian: p (.) (g - <p, g>)
    const Scalar mean = r.attention.dot(grad_attention);
    const Vector<Scalar> grad_scores =
        r.attention.cwiseProduct((grad_attention.array() - mean).matrix());

    for (std::size_t i = 0; i < cache.memories.size(); ++i) {
      const auto& sentence = cache.memories.sentences[i];
      const auto col = static_cast<Eigen::Index>(i);
      embed_sentence_backward<Scalar>(sentence, r.attention(col) * grad_state, grads.C(h));
      embed_sentence_backward<Scalar>(sentence, grad_scores(col) * state, grads.A(h));
    }
    // scores = M^T u
    grad_state += r.memory_vectors * grad_scores;
  }

  embed_sentence_backward<Scalar>(cache.query, grad_state, grads.B());
  return grads;
}

/// Gaussian N(0, stddev^2) entries from a seeded generator, PAD column zeroed.
template <typename Scalar = double>
ModelParams<Scalar> init_params(std::uint64_t seed, const ModelShape& shape,
                                double stddev = 0.1) {
  ModelParams<Scalar> params(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto* t : params.tensors()) {
    // row-major fill so the draw order matches the checkpoint layout
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) (*t)(r, c) = static_cast<Scalar>(normal(rng));
    }
  }
  for (std::size_t h = 0; h < shape.hops; ++h) {
    params.A(h).col(kPadId).setZero();
    params.C(h).col(kPadId).setZero();
  }
  params.B().col(kPadId).setZero();
  return params;
}

}  // namespace causalmem
