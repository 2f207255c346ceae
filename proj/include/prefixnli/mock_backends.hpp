#pragma once

// Deterministic in-process backends: a table-driven generator and a family
// of rule-based scorers. Each counts its invocations so tests can reconcile
// decode traces against the calls actually made.

#include <atomic>
#include <cctype>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "prefixnli/inference_gateway.hpp"

namespace prefixnli {

class MockGenerator final : public Generator {
 public:
  MockGenerator(BackendInfo info, TokenId eos_token_id, std::string eos_text = "",
                DetokRule detok = DetokRule::Whitespace)
      : info_(std::move(info)), eos_(eos_token_id), eos_text_(std::move(eos_text)), detok_(detok) {}

  /// Declares the proposals for `prefix` under `context_id`. Logits must be finite.
  void add(const std::string& context_id, std::vector<TokenId> prefix,
           std::vector<TokenCandidate> candidates) {
    if (candidates.empty()) {
      throw Error(ErrorCode::InvalidArgument, "mock table entries need at least one candidate");
    }
    for (const auto& c : candidates) {
      if (c.logit.is_masked() || !std::isfinite(c.logit.value())) {
        throw Error(ErrorCode::InvalidArgument, "mock logits must be finite");
      }
    }
    table_[context_id][std::move(prefix)] = std::move(candidates);
  }

  CandidateList candidates(const GenerationContext& ctx, std::span<const TokenId> prefix,
                           std::size_t top_n) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    CandidateList out;
    out.eos_token_id = eos_;
    if (at_eos(prefix, eos_)) {
      out.candidates.push_back({eos_, eos_text_, Logit(0.0), std::nullopt});
      return out;
    }
    auto ctx_it = table_.find(ctx.context_id);
    if (ctx_it != table_.end()) {
      auto it = ctx_it->second.find(std::vector<TokenId>(prefix.begin(), prefix.end()));
      if (it != ctx_it->second.end()) {
        out.candidates = it->second;
        std::stable_sort(out.candidates.begin(), out.candidates.end(), candidate_order);
        if (out.candidates.size() > top_n) out.candidates.resize(top_n);
        return out;
      }
    }
    std::string ids;
    for (auto id : prefix) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    throw Error(ErrorCode::UnknownPrefix, "context '" + ctx.context_id + "' has no entry for prefix [" + ids + "]");
  }

  BackendInfo info() const override { return info_; }
  DetokRule detok_rule() const override { return detok_; }
  TokenId eos_token_id() const noexcept { return eos_; }

  std::size_t calls() const noexcept { return calls_.load(); }
  void reset_calls() noexcept { calls_.store(0); }

 private:
  BackendInfo info_;
  TokenId eos_;
  std::string eos_text_;
  DetokRule detok_;
  std::map<std::string, std::map<std::vector<TokenId>, std::vector<TokenCandidate>>> table_;
  mutable std::atomic<std::size_t> calls_{0};
};

/// Base for in-process scorers: counts scored pairs.
class CountingScorer : public Scorer {
 public:
  explicit CountingScorer(BackendInfo info) : info_(std::move(info)) {}

  std::vector<double> score_batch(std::span<const ScoringPair> pairs) const final {
    calls_.fetch_add(pairs.size(), std::memory_order_relaxed);
    batches_.fetch_add(1, std::memory_order_relaxed);
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(score_one(p.premise, p.hypothesis));
    return out;
  }

  BackendInfo info() const override { return info_; }

  /// Number of (premise, hypothesis) pairs scored.
  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t batches() const noexcept { return batches_.load(); }
  void reset_calls() noexcept {
    calls_.store(0);
    batches_.store(0);
  }

 protected:
  virtual double score_one(const std::string& premise, const std::string& hypothesis) const = 0;

 private:
  BackendInfo info_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::atomic<std::size_t> batches_{0};
};

class ConstantScorer final : public CountingScorer {
 public:
  explicit ConstantScorer(double p, BackendInfo info = {"constant", {1, 1, 1}, "text"})
      : CountingScorer(std::move(info)), p_(p) {}

 protected:
  double score_one(const std::string&, const std::string&) const override { return p_; }

 private:
  double p_;
};

/// Exact-match lookup on (premise, hypothesis); premise "*" matches any premise.
class TableScorer final : public CountingScorer {
 public:
  explicit TableScorer(double default_p, BackendInfo info = {"table", {1, 1, 1}, "text"})
      : CountingScorer(std::move(info)), default_(default_p) {}

  void set(std::string premise, std::string hypothesis, double p) {
    table_[{std::move(premise), std::move(hypothesis)}] = p;
  }

 protected:
  double score_one(const std::string& premise, const std::string& hypothesis) const override {
    if (auto it = table_.find({premise, hypothesis}); it != table_.end()) return it->second;
    if (auto it = table_.find({"*", hypothesis}); it != table_.end()) return it->second;
    return default_;
  }

 private:
  double default_;
  std::map<std::pair<std::string, std::string>, double> table_;
};

inline std::string normalize_word(std::string_view w) {
  std::string out;
  for (char c : w) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Fraction of hypothesis words (lower-cased, punctuation stripped) that also
/// occur in the premise. An empty hypothesis scores 1.
class LexicalOverlapScorer final : public CountingScorer {
 public:
  explicit LexicalOverlapScorer(BackendInfo info = {"lexical-overlap", {1, 1, 1}, "text"})
      : CountingScorer(std::move(info)) {}

 protected:
  double score_one(const std::string& premise, const std::string& hypothesis) const override {
    std::unordered_set<std::string> vocab;
    for (const auto& w : whitespace_tokenize(premise)) {
      auto n = normalize_word(w);
      if (!n.empty()) vocab.insert(std::move(n));
    }
    std::size_t total = 0, hit = 0;
    for (const auto& w : whitespace_tokenize(hypothesis)) {
      auto n = normalize_word(w);
      if (n.empty()) continue;
      ++total;
      hit += vocab.count(n);
    }
    return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
  }
};

/// Scores from gold span annotations. A hypothesis is unfaithful when it, or
/// any sentence in it, starts with an annotated sentence's tokens up to and
/// including the first token of that sentence's span. Unfaithful hypotheses
/// score `floor`, everything else `ceiling`.
class OracleScorer final : public CountingScorer {
 public:
  explicit OracleScorer(double floor = 0.0, double ceiling = 1.0,
                        BackendInfo info = {"oracle", {1, 1, 1}, "text"})
      : CountingScorer(std::move(info)), floor_(floor), ceiling_(ceiling) {}

  /// `premise` "*" applies the annotation to every premise.
  void add_sentence(const std::string& premise, const TokenList& tokens,
                    const std::optional<HallucinationSpan>& span,
                    DetokRule detok = DetokRule::Whitespace) {
    if (!span) return;
    if (!span->valid_for(tokens.size())) {
      throw Error(ErrorCode::IndexOutOfRange, "oracle span outside its sentence");
    }
    std::span<const Token> head(tokens.data(), span->start + 1);
    markers_[premise].insert(detokenize(head, detok));
  }

  double floor() const noexcept { return floor_; }

 protected:
  double score_one(const std::string& premise, const std::string& hypothesis) const override {
    return unfaithful(premise, hypothesis) ? floor_ : ceiling_;
  }

 private:
  static bool starts_with_marker(std::string_view text, std::string_view marker) {
    if (text.size() < marker.size() || text.compare(0, marker.size(), marker) != 0) return false;
    return text.size() == marker.size() || std::isspace(static_cast<unsigned char>(text[marker.size()])) ||
           std::isspace(static_cast<unsigned char>(marker.back()));
  }

  bool unfaithful(const std::string& premise, const std::string& hypothesis) const {
    std::vector<std::string> pieces{hypothesis};
    for (auto& s : split_sentences(hypothesis)) pieces.push_back(std::move(s));
    for (const auto* key : {&premise, &kAny}) {
      auto it = markers_.find(*key);
      if (it == markers_.end()) continue;
      for (const auto& piece : pieces)
        for (const auto& m : it->second)
          if (starts_with_marker(piece, m)) return true;
    }
    return false;
  }

  inline static const std::string kAny = "*";
  double floor_;
  double ceiling_;
  std::map<std::string, std::set<std::string>> markers_;
};

}  // namespace prefixnli
