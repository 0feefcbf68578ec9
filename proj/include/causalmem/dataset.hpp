#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "causalmem/text.hpp"

namespace causalmem {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CauseEffectExample {
  std::string cause;
  std::string effect;
  int label = 0;  // 1 = cause causes effect

  friend bool operator==(const CauseEffectExample&, const CauseEffectExample&) = default;
};

/// `cause<TAB>effect<TAB>label` per line; blank lines and `#` comments are
/// skipped. Errors carry the 1-based line number.
std::vector<CauseEffectExample> load_pairs(const std::filesystem::path& path);
std::vector<CauseEffectExample> parse_pairs(std::string_view content);
void write_pairs(const std::filesystem::path& path,
                 const std::vector<CauseEffectExample>& examples);

/// ratio x |positives| label-0 pairs, each a cause re-paired with the effect
/// of a different positive, never equal to any positive.
std::vector<CauseEffectExample> generate_negatives(
    const std::vector<CauseEffectExample>& positives, std::size_t ratio, std::uint64_t seed);

/// encode(tokenize(cause) ++ ["<causes>"] ++ tokenize(effect))
TokenSequence pair_to_query(const CauseEffectExample& example, const Vocabulary& vocab);

struct Split {
  std::vector<CauseEffectExample> train;
  std::vector<CauseEffectExample> test;
};

/// Seeded, stratified by label. Both sides keep the input order.
Split split(const std::vector<CauseEffectExample>& examples, double train_fraction,
            std::uint64_t seed);

}  // namespace causalmem
