#include "causalmem/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace causalmem {

namespace {

// Length of the UTF-8 sequence starting at `pos`, or 0 if it is malformed.
std::size_t utf8_sequence_length(std::string_view s, std::size_t pos) {
  const auto lead = static_cast<unsigned char>(s[pos]);
  if (lead < 0x80) return 1;

  std::size_t len = 0;
  std::uint32_t cp = 0;
  if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    return 0;
  }
  if (pos + len > s.size()) return 0;
  for (std::size_t i = 1; i < len; ++i) {
    const auto cont = static_cast<unsigned char>(s[pos + i]);
    if ((cont & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (cont & 0x3F);
  }
  // overlong forms, surrogates, out of range
  static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool matches_causes_at(std::string_view s, std::size_t pos) {
  if (s.size() - pos < kCausesToken.size()) return false;
  for (std::size_t i = 0; i < kCausesToken.size(); ++i) {
    if (ascii_lower(s[pos + i]) != kCausesToken[i]) return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t len = utf8_sequence_length(text, pos);
    if (len == 0) {
      throw DecodeError("invalid UTF-8 at byte offset " + std::to_string(pos));
    }
    if (len > 1) {
      word.append(text.substr(pos, len));
    } else if (matches_causes_at(text, pos)) {
      flush();
      tokens.emplace_back(kCausesToken);
      pos += kCausesToken.size();
      continue;
    } else if (is_ascii_alnum(static_cast<unsigned char>(text[pos]))) {
      word.push_back(ascii_lower(text[pos]));
    } else {
      flush();
    }
    pos += len;
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  append(std::string(kPadToken));
  append(std::string(kUnkToken));
  append(std::string(kCausesToken));
}

void Vocabulary::append(std::string token) {
  const auto id = static_cast<TokenId>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents,
                             std::size_t min_count) {
  if (min_count == 0) throw std::invalid_argument("min_count must be >= 1");

  // std::map gives lexicographic (byte-wise) order for free.
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : documents) {
    for (const auto& tok : doc) ++counts[tok];
  }

  Vocabulary vocab;
  for (const auto& [tok, count] : counts) {
    if (count >= min_count && !vocab.contains(tok)) vocab.append(tok);
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary file " + path.string());

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);

  if (lines.size() < 3 || lines[0] != kPadToken || lines[1] != kUnkToken ||
      lines[2] != kCausesToken) {
    throw std::runtime_error("corrupt vocabulary file " + path.string() +
                             ": missing reserved tokens");
  }
  Vocabulary vocab;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (lines[i].empty() || vocab.contains(lines[i])) {
      throw std::runtime_error("corrupt vocabulary file " + path.string() + " at line " +
                               std::to_string(i + 1));
    }
    vocab.append(lines[i]);
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  for (const auto& tok : id_to_token_) out << tok << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= id_to_token_.size()) throw std::out_of_range("token id out of range");
  return id_to_token_[id];
}

TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  TokenSequence ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(vocab.id(tok));
  return ids;
}

}  // namespace causalmem
