#pragma once

// Token rendering and sentence segmentation helpers.

#include <cctype>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefixnli/core_types.hpp"

namespace prefixnli {

/// How surface tokens are joined back into text. `Whitespace` inserts one
/// space between tokens (word-level corpora); `Concat` joins them verbatim
/// (subword vocabularies whose pieces carry their own leading spaces).
enum class DetokRule { Whitespace, Concat };

constexpr std::string_view to_string(DetokRule r) noexcept {
  return r == DetokRule::Whitespace ? "whitespace" : "concat";
}

inline DetokRule parse_detok_rule(std::string_view s) {
  if (s == "whitespace") return DetokRule::Whitespace;
  if (s == "concat") return DetokRule::Concat;
  throw Error(ErrorCode::ParseError, "unknown detok rule '" + std::string(s) + "'");
}

inline std::string detokenize(std::span<const Token> tokens, DetokRule rule) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (rule == DetokRule::Whitespace && i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

/// Appends one token to already-rendered text.
inline std::string append_token(std::string text, std::string_view token, DetokRule rule) {
  if (rule == DetokRule::Whitespace && !text.empty() && !token.empty()) text += ' ';
  text += token;
  return text;
}

inline TokenList whitespace_tokenize(std::string_view text) {
  TokenList out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_terminal_punct(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

/// Splits text into sentences. Pluggable so corpora with their own
/// segmentation can supply it.
using SentenceSplitter = std::function<std::vector<std::string>(std::string_view)>;

/// Default rule: a sentence ends at terminal punctuation followed by
/// whitespace (or end of text). Surrounding whitespace is trimmed.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto flush = [&](std::size_t b, std::size_t e) {
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    if (e > b) out.emplace_back(text.substr(b, e - b));
  };
  std::size_t begin = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_terminal_punct(text[i])) continue;
    const bool boundary = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (boundary) {
      flush(begin, i + 1);
      begin = i + 1;
    }
  }
  flush(begin, text.size());
  return out;
}

/// Token-level counterpart of split_sentences: a sentence ends after a
/// token whose last character is terminal punctuation.
inline std::vector<TokenList> split_token_sentences(std::span<const Token> tokens) {
  std::vector<TokenList> out;
  TokenList cur;
  for (const auto& tok : tokens) {
    cur.push_back(tok);
    if (!tok.empty() && is_terminal_punct(tok.back())) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace prefixnli
