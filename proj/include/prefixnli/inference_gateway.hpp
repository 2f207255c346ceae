#pragma once

// Uniform access to next-token generators and prefix entailment scorers.
// Concrete backends live in mock_backends.hpp (in-process) and
// http_backends.hpp (wire protocol).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefixnli/core_types.hpp"
#include "prefixnli/text.hpp"

namespace prefixnli {

struct BackendInfo {
  std::string name;
  ModelShape shape;
  std::string tokenizer_id;

  bool operator==(const BackendInfo&) const = default;
};

/// Identifies the conditioning input of a generation: a context id the
/// backend resolves (document + instruction) and optionally the prompt text.
struct GenerationContext {
  std::string context_id;
  std::string prompt_text;
};

struct CandidateList {
  std::vector<TokenCandidate> candidates;
  TokenId eos_token_id = 0;
};

/// Generators consume token ids. Implementations must tolerate concurrent calls.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual CandidateList candidates(const GenerationContext& ctx, std::span<const TokenId> prefix,
                                   std::size_t top_n) const = 0;
  virtual BackendInfo info() const = 0;
  virtual DetokRule detok_rule() const = 0;
};

struct ScoringPair {
  std::string premise;
  std::string hypothesis;
};

/// Scorers consume text and return P(entailed | premise, hypothesis prefix).
/// Implementations must tolerate concurrent calls.
class Scorer {
 public:
  virtual ~Scorer() = default;

  /// Scores every pair, preserving order.
  virtual std::vector<double> score_batch(std::span<const ScoringPair> pairs) const = 0;
  virtual BackendInfo info() const = 0;
};

inline bool candidate_order(const TokenCandidate& a, const TokenCandidate& b) noexcept {
  if (a.logit.value() != b.logit.value()) return a.logit.value() > b.logit.value();
  return a.token_id < b.token_id;
}

/// Raw top-n proposals sorted by logit (descending, ties by token id).
inline CandidateList next_candidates(const Generator& gen, const GenerationContext& ctx,
                                     std::span<const TokenId> prefix, std::size_t top_n) {
  if (top_n == 0) throw Error(ErrorCode::InvalidArgument, "top_n must be >= 1");
  auto list = gen.candidates(ctx, prefix, top_n);
  std::stable_sort(list.candidates.begin(), list.candidates.end(), candidate_order);
  if (list.candidates.size() > top_n) list.candidates.resize(top_n);
  return list;
}

inline double checked_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, "entailment probability " + std::to_string(p) + " outside [0, 1]");
  }
  return p;
}

inline std::vector<double> score_prefixes(const Scorer& scorer, std::span<const ScoringPair> pairs) {
  for (const auto& p : pairs) {
    if (p.premise.empty()) throw Error(ErrorCode::InvalidArgument, "premise must be non-empty");
  }
  auto probs = scorer.score_batch(pairs);
  if (probs.size() != pairs.size()) {
    throw Error(ErrorCode::MalformedResponse, "scorer returned " + std::to_string(probs.size()) +
                                                  " probabilities for " + std::to_string(pairs.size()) +
                                                  " pairs");
  }
  for (double p : probs) checked_probability(p);
  return probs;
}

inline double score_prefix(const Scorer& scorer, std::string premise, std::string hypothesis) {
  const ScoringPair pair{std::move(premise), std::move(hypothesis)};
  return score_prefixes(scorer, std::span<const ScoringPair>(&pair, 1)).front();
}

inline bool at_eos(std::span<const TokenId> prefix, TokenId eos) noexcept {
  return !prefix.empty() && prefix.back() == eos;
}

struct GreedyCompletion {
  std::vector<TokenId> token_ids;
  std::vector<std::string> texts;  // surface form of each appended token
  std::size_t generator_calls = 0;
};

/// Extends `prefix` with the argmax candidate until eos or `max_len` appended
/// tokens. A prefix already at eos is returned unchanged.
inline GreedyCompletion greedy_complete_traced(const Generator& gen, const GenerationContext& ctx,
                                               std::span<const TokenId> prefix, std::size_t max_len,
                                               std::optional<TokenId> known_eos = std::nullopt) {
  GreedyCompletion out;
  out.token_ids.assign(prefix.begin(), prefix.end());
  if (known_eos && at_eos(out.token_ids, *known_eos)) return out;
  for (std::size_t i = 0; i < max_len; ++i) {
    auto list = next_candidates(gen, ctx, out.token_ids, 1);
    ++out.generator_calls;
    if (at_eos(out.token_ids, list.eos_token_id)) break;
    if (list.candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "generator returned no candidates");
    const auto& best = list.candidates.front();
    out.token_ids.push_back(best.token_id);
    out.texts.push_back(best.text);
    if (best.token_id == list.eos_token_id) break;
  }
  return out;
}

inline std::vector<TokenId> greedy_complete(const Generator& gen, const GenerationContext& ctx,
                                            std::span<const TokenId> prefix, std::size_t max_len) {
  if (max_len == 0) throw Error(ErrorCode::InvalidArgument, "max_len must be >= 1");
  return greedy_complete_traced(gen, ctx, prefix, max_len).token_ids;
}

inline BackendInfo get_info(const Generator& gen) { return gen.info(); }
inline BackendInfo get_info(const Scorer& scorer) { return scorer.info(); }

}  // namespace prefixnli
