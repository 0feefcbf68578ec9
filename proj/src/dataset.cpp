#include "causalmem/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace causalmem {

namespace {

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

std::vector<CauseEffectExample> parse_pairs(std::string_view content) {
  std::vector<CauseEffectExample> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string_view::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string_view::npos || line.find('\t', tab2 + 1) != std::string_view::npos) {
      throw DatasetError(line_error(line_no, "expected cause<TAB>effect<TAB>label"));
    }
    CauseEffectExample ex;
    ex.cause = std::string(line.substr(0, tab1));
    ex.effect = std::string(line.substr(tab1 + 1, tab2 - tab1 - 1));
    const auto label = line.substr(tab2 + 1);
    if (label == "0") {
      ex.label = 0;
    } else if (label == "1") {
      ex.label = 1;
    } else {
      throw DatasetError(line_error(line_no, "label must be 0 or 1, got '" +
                                                 std::string(label) + "'"));
    }
    try {
      if (tokenize(ex.cause).empty() || tokenize(ex.effect).empty()) {
        throw DatasetError(line_error(line_no, "cause and effect must contain a word"));
      }
    } catch (const DecodeError& e) {
      throw DatasetError(line_error(line_no, e.what()));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<CauseEffectExample> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_pairs(buffer.str());
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

void write_pairs(const std::filesystem::path& path,
                 const std::vector<CauseEffectExample>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write dataset " + path.string());
  for (const auto& ex : examples) {
    out << ex.cause << '\t' << ex.effect << '\t' << ex.label << '\n';
  }
}

std::vector<CauseEffectExample> generate_negatives(
    const std::vector<CauseEffectExample>& positives, std::size_t ratio, std::uint64_t seed) {
  if (positives.size() < 2) {
    throw DatasetError("negative sampling needs at least 2 positives to re-pair");
  }
  if (ratio == 0) throw DatasetError("negative ratio must be >= 1");

  std::set<std::pair<std::string, std::string>> forbidden;
  for (const auto& p : positives) forbidden.emplace(p.cause, p.effect);

  constexpr std::size_t kMaxAttempts = 1000;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> other(0, positives.size() - 2);

  std::vector<CauseEffectExample> negatives;
  negatives.reserve(ratio * positives.size());
  for (std::size_t slot = 0; slot < ratio * positives.size(); ++slot) {
    const std::size_t i = slot / ratio;
    bool placed = false;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      std::size_t j = other(rng);
      if (j >= i) ++j;  // any positive except i
      const auto& cause = positives[i].cause;
      const auto& effect = positives[j].effect;
      if (!forbidden.count({cause, effect})) {
        negatives.push_back({cause, effect, 0});
        placed = true;
      }
    }
    if (!placed) {
      throw DatasetError("could not re-pair cause '" + positives[i].cause + "' after " +
                         std::to_string(kMaxAttempts) +
                         " attempts: every candidate effect forms a positive pair "
                         "(are all effects identical?)");
    }
  }
  return negatives;
}

TokenSequence pair_to_query(const CauseEffectExample& example, const Vocabulary& vocab) {
  auto cause = tokenize(example.cause);
  auto effect = tokenize(example.effect);
  if (cause.empty()) throw DatasetError("cause '" + example.cause + "' has no words");
  if (effect.empty()) throw DatasetError("effect '" + example.effect + "' has no words");
  cause.emplace_back(kCausesToken);
  cause.insert(cause.end(), effect.begin(), effect.end());
  return encode(cause, vocab);
}

Split split(const std::vector<CauseEffectExample>& examples, double train_fraction,
            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DatasetError("train fraction must be in (0, 1)");
  }
  std::array<std::vector<std::size_t>, 2> by_label;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    by_label[static_cast<std::size_t>(examples[i].label)].push_back(i);
  }
  for (int label = 0; label < 2; ++label) {
    if (by_label[static_cast<std::size_t>(label)].size() < 2) {
      throw DatasetError("label " + std::to_string(label) +
                         " has fewer than 2 examples; cannot stratify");
    }
  }

  // Overall train size, then per-label floors topped up by largest remainder.
  const auto n = static_cast<double>(examples.size());
  const auto target = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * n)), 1, examples.size() - 1);
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const double ideal = train_fraction * static_cast<double>(by_label[c].size());
    take[c] = static_cast<std::size_t>(std::floor(ideal));
    remainder[c] = ideal - std::floor(ideal);
    assigned += take[c];
  }
  std::array<std::size_t, 2> order = {0, 1};
  if (remainder[1] > remainder[0]) std::swap(order[0], order[1]);
  for (std::size_t c : order) {
    if (assigned < target && take[c] < by_label[c].size()) {
      ++take[c];
      ++assigned;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> in_train(examples.size(), false);
  for (std::size_t c = 0; c < 2; ++c) {
    auto idx = by_label[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < take[c]; ++i) in_train[idx[i]] = true;
  }

  Split out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (in_train[i] ? out.train : out.test).push_back(examples[i]);
  }
  return out;
}

}  // namespace causalmem
