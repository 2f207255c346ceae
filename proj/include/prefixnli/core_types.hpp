#pragma once

// Shared domain vocabulary: premises, hypothesis prefixes, hallucination
// spans, labels, next-token candidates and decoding configuration.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "prefixnli/error.hpp"

namespace prefixnli {

using Token = std::string;
using TokenList = std::vector<Token>;
using TokenId = std::int64_t;

struct Premise {
  std::string id;
  std::string text;

  bool operator==(const Premise&) const = default;
};

enum class EntailmentLabel { Entailed, NotEntailed };

constexpr std::string_view to_string(EntailmentLabel l) noexcept {
  return l == EntailmentLabel::Entailed ? "entailed" : "not_entailed";
}

inline EntailmentLabel parse_label(std::string_view s) {
  if (s == "entailed") return EntailmentLabel::Entailed;
  if (s == "not_entailed") return EntailmentLabel::NotEntailed;
  throw Error(ErrorCode::ParseError, "unknown label '" + std::string(s) + "'");
}

constexpr EntailmentLabel complement(EntailmentLabel l) noexcept {
  return l == EntailmentLabel::Entailed ? EntailmentLabel::NotEntailed : EntailmentLabel::Entailed;
}

/// First unsupported span of a hypothesis sentence. Both ends are 0-based
/// and inclusive.
struct HallucinationSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  bool valid_for(std::size_t sentence_len) const noexcept {
    return start <= end && end < sentence_len;
  }
  std::size_t length() const noexcept { return end - start + 1; }

  bool operator==(const HallucinationSpan&) const = default;
};

/// The first t tokens of a hypothesis sentence.
struct HypothesisPrefix {
  TokenList tokens;
  std::string sentence_id;
  std::size_t origin_sentence_len = 0;

  std::size_t t() const noexcept { return tokens.size(); }

  bool operator==(const HypothesisPrefix&) const = default;
};

struct PrefixInstance {
  std::string premise_id;
  HypothesisPrefix prefix;
  EntailmentLabel label = EntailmentLabel::Entailed;

  double relative_position() const noexcept {
    return static_cast<double>(prefix.t()) / static_cast<double>(prefix.origin_sentence_len);
  }

  bool operator==(const PrefixInstance&) const = default;
};

/// Prefix that ends inside its sentence's span; its label cannot be deduced.
struct Excluded {
  std::size_t end_index = 0;
};

using PrefixOutcome = std::variant<PrefixInstance, Excluded>;

/// Labels the prefix sentence_tokens[0..end_index]. Prefixes ending before the
/// span are entailed, prefixes ending at or after its last token are not, and
/// prefixes ending inside it are excluded.
inline PrefixOutcome make_prefix_instance(const std::string& premise_id,
                                          const std::string& sentence_id,
                                          const TokenList& sentence_tokens,
                                          std::size_t end_index,
                                          const std::optional<HallucinationSpan>& span) {
  const std::size_t n = sentence_tokens.size();
  if (end_index >= n) {
    throw Error(ErrorCode::IndexOutOfRange,
                "end_index " + std::to_string(end_index) + " >= sentence length " + std::to_string(n));
  }
  if (span && !span->valid_for(n)) {
    throw Error(ErrorCode::IndexOutOfRange,
                "span [" + std::to_string(span->start) + ", " + std::to_string(span->end) +
                    "] invalid for sentence of length " + std::to_string(n));
  }

  EntailmentLabel label = EntailmentLabel::Entailed;
  if (span) {
    if (end_index >= span->end) {
      label = EntailmentLabel::NotEntailed;
    } else if (end_index >= span->start) {
      return Excluded{end_index};
    }
  }

  PrefixInstance inst;
  inst.premise_id = premise_id;
  inst.prefix.tokens.assign(sentence_tokens.begin(),
                            sentence_tokens.begin() + static_cast<std::ptrdiff_t>(end_index + 1));
  inst.prefix.sentence_id = sentence_id;
  inst.prefix.origin_sentence_len = n;
  inst.label = label;
  return inst;
}

/// Generator logit. Masked candidates hold a sentinel rather than a large
/// negative number so they serialize exactly.
class Logit {
 public:
  constexpr Logit() = default;
  constexpr explicit Logit(double v) : value_(v) {}

  static constexpr Logit masked() {
    Logit l;
    l.masked_ = true;
    l.value_ = -std::numeric_limits<double>::infinity();
    return l;
  }

  constexpr bool is_masked() const noexcept { return masked_; }
  /// -inf when masked.
  constexpr double value() const noexcept { return value_; }

  friend constexpr bool operator==(const Logit& a, const Logit& b) noexcept {
    return a.masked_ == b.masked_ && (a.masked_ || a.value_ == b.value_);
  }

 private:
  double value_ = 0.0;
  bool masked_ = false;
};

struct TokenCandidate {
  TokenId token_id = 0;
  std::string text;
  Logit logit;
  std::optional<double> entail_prob;

  bool operator==(const TokenCandidate&) const = default;
};

enum class DecodingMode { Vanilla, PrefixGuided, Lookahead };

constexpr std::string_view to_string(DecodingMode m) noexcept {
  switch (m) {
    case DecodingMode::Vanilla: return "vanilla";
    case DecodingMode::PrefixGuided: return "prefix";
    case DecodingMode::Lookahead: return "lookahead";
  }
  return "unknown";
}

inline DecodingMode parse_mode(std::string_view s) {
  if (s == "vanilla") return DecodingMode::Vanilla;
  if (s == "prefix" || s == "prefix-guided") return DecodingMode::PrefixGuided;
  if (s == "lookahead") return DecodingMode::Lookahead;
  throw Error(ErrorCode::InvalidArgument, "unknown decoding mode '" + std::string(s) + "'");
}

struct DecodingConfig {
  double lambda = 5.0;          // penalty scale
  double tau = 0.5;             // rectification threshold
  std::size_t beam_width = 3;   // K
  double nucleus_mass = 0.9;    // top-p mass
  std::size_t candidate_cap = 20;
  std::size_t max_new_tokens = 128;
  DecodingMode mode = DecodingMode::PrefixGuided;
  /// Raw candidates requested from the generator per beam and step.
  std::size_t top_n = 50;
  /// Score only candidates that close a clause (punctuation or eos); others pass unscored.
  bool score_only_at_punctuation = false;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be a finite value >= 0");
    if (!(tau > 0.0 && tau < 1.0)) fail("tau must lie in (0, 1)");
    if (beam_width == 0) fail("beam_width must be positive");
    if (!(nucleus_mass > 0.0 && nucleus_mass <= 1.0)) fail("nucleus_mass must lie in (0, 1]");
    if (candidate_cap == 0) fail("candidate_cap must be positive");
    if (top_n == 0) fail("top_n must be positive");
  }
};

struct ModelShape {
  std::uint64_t n_params_nonembed = 0;
  std::uint64_t n_layer = 0;
  std::uint64_t d_model = 0;

  bool valid() const noexcept { return n_params_nonembed > 0 && n_layer > 0 && d_model > 0; }
  bool operator==(const ModelShape&) const = default;
};

}  // namespace prefixnli
