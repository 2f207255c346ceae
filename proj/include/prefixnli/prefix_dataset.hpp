#pragma once

// Construction of prefix-level entailment instances from span-annotated
// hypotheses and from seed/modified summary pairs.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefixnli/core_types.hpp"
#include "prefixnli/rng.hpp"

namespace prefixnli {

struct AnnotatedExample {
  Premise premise;
  std::vector<TokenList> hypothesis_sentences;
  /// One entry per sentence; nullopt for faithful sentences.
  std::vector<std::optional<HallucinationSpan>> spans;
};

struct EditPair {
  Premise premise;
  TokenList seed_tokens;
  TokenList modified_tokens;
  /// Verdict for the complete modified summary.
  EntailmentLabel consistency_verdict = EntailmentLabel::NotEntailed;
  std::string pair_id;
};

inline std::string sentence_id_for(const std::string& premise_id, std::size_t sentence_index) {
  return premise_id + "#" + std::to_string(sentence_index);
}

/// Locates the edited region of `modified` by stripping the longest common
/// prefix and then the longest common suffix (the suffix match never reaches
/// back into the prefix). Returns nullopt when the sequences are identical.
///
/// A pure deletion leaves no modified tokens between prefix and suffix; the
/// span is then the first modified token after the deletion point, or the
/// last token when the deletion truncated the tail.
inline std::optional<HallucinationSpan> derive_span_from_edit(const TokenList& seed,
                                                             const TokenList& modified) {
  if (seed.empty() || modified.empty()) {
    throw Error(ErrorCode::EmptyInput, "derive_span_from_edit needs non-empty token lists");
  }
  if (seed == modified) return std::nullopt;

  const std::size_t limit = std::min(seed.size(), modified.size());
  std::size_t prefix = 0;
  while (prefix < limit && seed[prefix] == modified[prefix]) ++prefix;

  const std::size_t suffix_limit = limit - prefix;
  std::size_t suffix = 0;
  while (suffix < suffix_limit &&
         seed[seed.size() - 1 - suffix] == modified[modified.size() - 1 - suffix]) {
    ++suffix;
  }

  const std::size_t n = modified.size();
  if (prefix + suffix < n) return HallucinationSpan{prefix, n - 1 - suffix};
  // Pure deletion.
  const std::size_t at = std::min(prefix, n - 1);
  return HallucinationSpan{at, at};
}

/// Emits every labelled prefix of every sentence, in sentence order, dropping
/// prefixes that partially contain the span.
inline std::vector<PrefixInstance> instances_from_annotated(const AnnotatedExample& ex) {
  if (ex.spans.size() != ex.hypothesis_sentences.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "example '" + ex.premise.id + "' has " +
                                                std::to_string(ex.spans.size()) + " spans for " +
                                                std::to_string(ex.hypothesis_sentences.size()) +
                                                " sentences");
  }
  std::vector<PrefixInstance> out;
  for (std::size_t s = 0; s < ex.hypothesis_sentences.size(); ++s) {
    const auto& tokens = ex.hypothesis_sentences[s];
    const auto sid = sentence_id_for(ex.premise.id, s);
    for (std::size_t end = 0; end < tokens.size(); ++end) {
      auto outcome = make_prefix_instance(ex.premise.id, sid, tokens, end, ex.spans[s]);
      if (auto* inst = std::get_if<PrefixInstance>(&outcome)) out.push_back(std::move(*inst));
    }
  }
  return out;
}

inline std::vector<PrefixInstance> instances_from_edit_pair(const EditPair& pair) {
  if (pair.seed_tokens.empty() || pair.modified_tokens.empty()) {
    throw Error(ErrorCode::EmptyInput, "edit pair '" + pair.pair_id + "' has an empty summary");
  }
  AnnotatedExample ex;
  ex.premise = pair.premise;
  ex.hypothesis_sentences = {pair.modified_tokens};
  if (pair.consistency_verdict == EntailmentLabel::Entailed) {
    ex.spans = {std::nullopt};
  } else {
    auto span = derive_span_from_edit(pair.seed_tokens, pair.modified_tokens);
    if (!span) {
      throw Error(ErrorCode::InconsistentVerdict,
                  "edit pair '" + pair.pair_id + "' is judged not entailed but equals its seed");
    }
    ex.spans = {span};
  }
  auto out = instances_from_annotated(ex);
  if (!pair.pair_id.empty()) {
    for (auto& inst : out) inst.prefix.sentence_id = pair.pair_id;
  }
  return out;
}

constexpr std::size_t kPositionBuckets = 10;

/// Decile of t/n in (0, 1], computed in integers: bucket b holds b/10 < t/n <= (b+1)/10.
inline std::size_t position_bucket(const PrefixInstance& inst) noexcept {
  const std::size_t t = inst.prefix.t();
  const std::size_t n = inst.prefix.origin_sentence_len;
  const std::size_t b = (kPositionBuckets * t + n - 1) / n;
  return b == 0 ? 0 : b - 1;
}

struct BucketReport {
  std::size_t bucket = 0;
  std::size_t entailed_in = 0;
  std::size_t not_entailed_in = 0;
  std::size_t kept_per_label = 0;
  bool dropped = false;
};

struct BalanceResult {
  std::vector<PrefixInstance> instances;
  std::array<BucketReport, kPositionBuckets> buckets{};
  std::uint64_t seed = 0;

  std::vector<std::size_t> dropped_buckets() const {
    std::vector<std::size_t> out;
    for (const auto& b : buckets)
      if (b.dropped) out.push_back(b.bucket);
    return out;
  }
};

constexpr std::uint64_t kDefaultBalanceSeed = 17;

/// Equalizes label counts inside every position decile by downsampling the
/// majority label. Buckets holding a single label are dropped. Retained
/// instances keep their input order.
inline BalanceResult stratify_balance(const std::vector<PrefixInstance>& instances,
                                      std::uint64_t seed = kDefaultBalanceSeed) {
  BalanceResult result;
  result.seed = seed;
  std::array<std::array<std::vector<std::size_t>, 2>, kPositionBuckets> members;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto lab = instances[i].label == EntailmentLabel::Entailed ? 0 : 1;
    members[position_bucket(instances[i])][lab].push_back(i);
  }

  std::vector<char> keep(instances.size(), 0);
  for (std::size_t b = 0; b < kPositionBuckets; ++b) {
    auto& rep = result.buckets[b];
    rep.bucket = b;
    auto& ent = members[b][0];
    auto& nent = members[b][1];
    rep.entailed_in = ent.size();
    rep.not_entailed_in = nent.size();
    if (ent.empty() && nent.empty()) continue;
    if (ent.empty() || nent.empty()) {
      rep.dropped = true;
      continue;
    }
    const std::size_t quota = std::min(ent.size(), nent.size());
    rep.kept_per_label = quota;
    rng::Stream stream(rng::derive_seed(seed, b));
    for (auto* group : {&ent, &nent}) {
      // Partial Fisher-Yates: the first `quota` slots become a uniform sample.
      auto& g = *group;
      if (g.size() > quota) {
        for (std::size_t i = 0; i < quota; ++i) {
          const std::size_t j = i + stream.index(g.size() - i);
          std::swap(g[i], g[j]);
        }
      }
      for (std::size_t i = 0; i < quota; ++i) keep[g[i]] = 1;
    }
  }
  for (std::size_t i = 0; i < instances.size(); ++i)
    if (keep[i]) result.instances.push_back(instances[i]);
  return result;
}

}  // namespace prefixnli
