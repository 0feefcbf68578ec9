#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalmem/memnet.hpp"

namespace causalmem {

inline constexpr std::size_t kNotCausesLabel = 0;
inline constexpr std::size_t kCausesLabel = 1;

/// -ln(pred[label]), with pred clamped below at 1e-12.
template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& pred,
                                       std::size_t label) {
  using Scalar = typename Derived::Scalar;
  if (label >= static_cast<std::size_t>(pred.size())) {
    throw std::out_of_range("label " + std::to_string(label) + " out of range");
  }
  const Scalar p = std::max(pred(static_cast<Eigen::Index>(label)), Scalar(1e-12));
  return -std::log(p);
}

/// Binary models threshold P(causes); wider label spaces take the argmax.
template <typename Derived>
std::size_t predict_label(const Eigen::MatrixBase<Derived>& pred, double threshold = 0.5) {
  if (pred.size() == 2) {
    return static_cast<double>(pred(static_cast<Eigen::Index>(kCausesLabel))) >= threshold
               ? kCausesLabel
               : kNotCausesLabel;
  }
  Eigen::Index best = 0;
  pred.maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;
  std::uint64_t t = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(AdamHyper h) : hyper(h) {}

  /// Zero moments shaped like `params`.
  template <typename Params>
  static AdamState for_params(const Params& params, AdamHyper h = {}) {
    AdamState s(h);
    for (const auto* tensor : params.tensors()) {
      s.m.push_back(Matrix<Scalar>::Zero(tensor->rows(), tensor->cols()));
      s.v.push_back(Matrix<Scalar>::Zero(tensor->rows(), tensor->cols()));
    }
    return s;
  }
};

/// One bias-corrected Adam update over matching lists of tensors. Moments are
/// created on first use.
template <typename Scalar>
void adam_update(std::span<Matrix<Scalar>* const> params,
                 std::span<const Matrix<Scalar>* const> grads, AdamState<Scalar>& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: tensor count mismatch");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam: state shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols() ||
        state.m[i].rows() != params[i]->rows() || state.m[i].cols() != params[i]->cols()) {
      throw std::invalid_argument("adam: shape mismatch in tensor " + std::to_string(i));
    }
  }

  ++state.t;
  const auto& h = state.hyper;
  const Scalar b1 = static_cast<Scalar>(h.beta1);
  const Scalar b2 = static_cast<Scalar>(h.beta2);
  const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.t));
  const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.t));
  const Scalar lr = static_cast<Scalar>(h.lr);
  const Scalar eps = static_cast<Scalar>(h.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = *grads[i];
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * g.cwiseAbs2();
    params[i]->array() -= lr * (state.m[i].array() / correction1) /
                          ((state.v[i].array() / correction2).sqrt() + eps);
  }
}

template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const Gradients<Scalar>& grads,
               AdamState<Scalar>& state) {
  if (!(params.shape() == grads.shape())) {
    throw std::invalid_argument("adam: gradient shape does not match parameters");
  }
  const auto p = params.tensors();
  const auto g = grads.tensors();
  adam_update<Scalar>(p, g, state);
}

// ---------------------------------------------------------------------------
// Examples, losses, gradients

/// A query with its label, before memory retrieval.
struct LabeledQuery {
  TokenSequence query;
  std::size_t label = 0;
};

/// A query with its retrieved memories, ready for the network.
struct TrainingExample {
  TokenSequence query;
  MemorySet memories;
  std::size_t label = 0;
};

using MemoryProvider = std::function<MemorySet(const TokenSequence&)>;

template <typename Scalar>
Scalar example_loss(const ModelParams<Scalar>& params, const TrainingExample& ex) {
  return cross_entropy(forward(params, ex.memories, ex.query).prediction, ex.label);
}

template <typename Scalar>
struct BatchGradient {
  Gradients<Scalar> grads;
  Scalar loss_sum = 0;
  std::size_t correct = 0;
};

/// Mean gradient over a batch, accumulated in batch order.
template <typename Scalar>
BatchGradient<Scalar> batch_gradient(const ModelParams<Scalar>& params,
                                     std::span<const TrainingExample* const> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  BatchGradient<Scalar> out{Gradients<Scalar>::zeros_like(params), Scalar(0), 0};
  auto acc = out.grads.tensors();
  for (const auto* ex : batch) {
    const auto cache = forward(params, ex->memories, ex->query);
    out.loss_sum += cross_entropy(cache.prediction, ex->label);
    if (predict_label(cache.prediction) == ex->label) ++out.correct;
    const auto g = backward(cache, params, ex->label);
    const auto gt = g.tensors();
    for (std::size_t i = 0; i < acc.size(); ++i) *acc[i] += *gt[i];
  }
  const Scalar scale = Scalar(1) / static_cast<Scalar>(batch.size());
  for (auto* t : acc) *t *= scale;
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Parameter counts above this are checked on a seeded random subsample.
  std::size_t max_entries = 5000;
  std::size_t subsample = 500;
  std::uint64_t seed = 0;
};

/// Max relative error |a - n| / max(|a|, |n|, 1e-6) between the supplied
/// analytic gradient and central differences of the example loss.
/// The floor sits above the rounding noise of a central difference
/// (about ulp(loss) / 2 eps, ~1e-10 at eps = 1e-5), so near-zero entries are
/// held to |a - n| < 1e-10 instead of a meaningless ratio of two noise terms.
template <typename Scalar>
Scalar grad_check(const ModelParams<Scalar>& params, const TrainingExample& ex,
                  const Gradients<Scalar>& analytic, const GradCheckOptions& opts = {}) {
  if (!(opts.epsilon > 0)) throw std::invalid_argument("grad_check epsilon must be > 0");
  ModelParams<Scalar> probe = params;
  auto tensors = probe.tensors();
  const auto analytic_tensors = analytic.tensors();

  struct Entry {
    std::size_t tensor;
    Eigen::Index index;
  };
  std::vector<Entry> entries;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (Eigen::Index i = 0; i < tensors[t]->size(); ++i) entries.push_back({t, i});
  }
  if (entries.size() > opts.max_entries) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(std::max<std::size_t>(opts.subsample, 200));
  }

  const Scalar eps = static_cast<Scalar>(opts.epsilon);
  Scalar worst = 0;
  for (const auto& e : entries) {
    Scalar& w = tensors[e.tensor]->data()[e.index];
    const Scalar saved = w;
    w = saved + eps;
    const Scalar plus = example_loss(probe, ex);
    w = saved - eps;
    const Scalar minus = example_loss(probe, ex);
    w = saved;

    const Scalar numeric = (plus - minus) / (Scalar(2) * eps);
    const Scalar a = analytic_tensors[e.tensor]->data()[e.index];
    const Scalar denom = std::max({std::abs(a), std::abs(numeric), Scalar(1e-6)});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

template <typename Scalar>
Scalar grad_check(const ModelParams<Scalar>& params, const TrainingExample& ex,
                  const GradCheckOptions& opts = {}) {
  const auto cache = forward(params, ex.memories, ex.query);
  return grad_check(params, ex, backward(cache, params, ex.label), opts);
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::size_t dim = 20;
  std::size_t hops = 2;
  std::size_t labels = 2;
  std::size_t k = 10;
  double lr = 0.001;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  std::size_t min_count = 1;
  Tying tying = Tying::kAdjacent;
  std::size_t negative_ratio = 3;
  double init_stddev = 0.1;

  void validate() const {
    if (dim == 0 || hops == 0 || labels < 2 || k == 0 || !(lr > 0) || epochs == 0 ||
        batch_size == 0 || min_count == 0 || negative_ratio == 0) {
      throw std::invalid_argument("invalid training configuration");
    }
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0;
  double train_accuracy = 0;
};

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> params;
  std::vector<EpochMetrics> metrics;
};

/// Retrieves memories once per query.
inline std::vector<TrainingExample> attach_memories(std::span<const LabeledQuery> queries,
                                                    const MemoryProvider& provider) {
  std::vector<TrainingExample> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back({q.query, provider(q.query), q.label});
  return out;
}

/// Minibatch Adam from a seeded initialization. config.seed fixes both the
/// initial weights and the per-epoch shuffles.
/// `on_epoch`, when set, sees each epoch's metrics as they are produced.
template <typename Scalar = double>
TrainResult<Scalar> train_loop(std::span<const TrainingExample> train_set,
                               std::size_t vocab_size, const TrainConfig& config,
                               const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  for (const auto& ex : train_set) {
    if (ex.label >= config.labels) throw std::out_of_range("example label out of range");
  }

  const ModelShape shape{vocab_size, config.dim, config.hops, config.labels, config.tying};
  TrainResult<Scalar> result{init_params<Scalar>(config.seed, shape, config.init_stddev), {}};
  auto& params = result.params;
  auto adam = AdamState<Scalar>::for_params(params, AdamHyper{.lr = config.lr});

  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const TrainingExample*> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      const auto bg = batch_gradient<Scalar>(params, batch);
      loss_sum += static_cast<double>(bg.loss_sum);
      correct += bg.correct;
      adam_step(params, bg.grads, adam);
    }
    const auto n = static_cast<double>(train_set.size());
    result.metrics.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n});
    if (on_epoch) on_epoch(result.metrics.back());
  }
  return result;
}

template <typename Scalar = double>
TrainResult<Scalar> train_loop(std::span<const LabeledQuery> train_set,
                               const MemoryProvider& provider, std::size_t vocab_size,
                               const TrainConfig& config) {
  if (train_set.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  const auto examples = attach_memories(train_set, provider);
  return train_loop<Scalar>(std::span<const TrainingExample>(examples), vocab_size, config);
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0;
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<double> p_causes;  // per example, in input order
};

/// Tallies binary outcomes; accuracy = correct / total.
inline EvalReport make_report(std::span<const std::size_t> labels,
                              std::span<const double> p_causes, double threshold) {
  EvalReport r;
  r.total = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = p_causes[i] >= threshold;
    const bool actual = labels[i] == kCausesLabel;
    if (predicted && actual) ++r.tp;
    if (!predicted && !actual) ++r.tn;
    if (predicted && !actual) ++r.fp;
    if (!predicted && actual) ++r.fn;
  }
  r.correct = r.tp + r.tn;
  r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
  r.p_causes.assign(p_causes.begin(), p_causes.end());
  return r;
}

template <typename Scalar>
EvalReport evaluate(const ModelParams<Scalar>& params, std::span<const TrainingExample> test_set,
                    double threshold = 0.5) {
  if (test_set.empty()) throw std::invalid_argument("cannot evaluate an empty test set");
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("threshold must be in (0,1)");
  if (params.labels() != 2) throw std::invalid_argument("evaluation needs a binary model");

  std::vector<std::size_t> labels;
  std::vector<double> probs;
  for (const auto& ex : test_set) {
    const auto cache = forward(params, ex.memories, ex.query);
    labels.push_back(ex.label);
    probs.push_back(static_cast<double>(cache.prediction(static_cast<Eigen::Index>(kCausesLabel))));
  }
  return make_report(labels, probs, threshold);
}

template <typename Scalar>
EvalReport evaluate(const ModelParams<Scalar>& params, std::span<const LabeledQuery> test_set,
                    const MemoryProvider& provider, double threshold = 0.5) {
  if (test_set.empty()) throw std::invalid_argument("cannot evaluate an empty test set");
  const auto examples = attach_memories(test_set, provider);
  return evaluate(params, std::span<const TrainingExample>(examples), threshold);
}

}  // namespace causalmem
