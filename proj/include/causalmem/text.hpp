#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace causalmem {

using TokenId = std::uint32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kCausesId = 2;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kCausesToken = "<causes>";

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered ids of one sentence. The j-th entry is the j-th word.
using TokenSequence = std::vector<TokenId>;

/// Lowercases and splits on runs of non-alphanumeric characters. The
/// literal "<CAUSES>" (any case) survives as the single token "<causes>".
/// Non-ASCII code points count as word characters. Throws DecodeError on
/// malformed UTF-8.
std::vector<std::string> tokenize(std::string_view text);

/// Dense bidirectional token/id map. Ids 0..2 are always the reserved
/// tokens; everything else is assigned in lexicographic order.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(const std::vector<std::vector<std::string>>& documents,
                          std::size_t min_count = 1);

  /// One token per line, line number = id.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return id_to_token_.size(); }

  /// Id of `token`, or kUnkId if absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void append(std::string token);

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& documents,
                              std::size_t min_count = 1) {
  return Vocabulary::build(documents, min_count);
}

/// Out-of-vocabulary tokens map to kUnkId.
TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab);

}  // namespace causalmem
