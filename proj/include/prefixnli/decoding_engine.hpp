#pragma once

// Beam search over nucleus-truncated candidates, optionally steered by a
// prefix entailment scorer (rectified log-odds penalty) or by the lookahead
// baseline that scores greedy full completions instead of prefixes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "prefixnli/core_types.hpp"
#include "prefixnli/inference_gateway.hpp"
#include "prefixnli/text.hpp"

namespace prefixnli {

/// Rectified log-odds penalty. Candidates scored below `tau` get
/// lambda * ln(p / (1 - p)) added to their logit; p == 0 masks them.
/// Candidates at or above `tau` pass through unchanged.
inline std::vector<TokenCandidate> adjust_logits(std::vector<TokenCandidate> candidates, double lambda,
                                                 double tau) {
  for (auto& c : candidates) {
    if (!c.entail_prob) {
      throw Error(ErrorCode::MissingScore, "candidate " + std::to_string(c.token_id) + " has no entailment score");
    }
    const double p = checked_probability(*c.entail_prob);
    if (p >= tau || c.logit.is_masked()) continue;
    if (p == 0.0) {
      c.logit = Logit::masked();
      continue;
    }
    const double log_odds = std::log(p) - std::log1p(-p);
    c.logit = Logit(c.logit.value() + lambda * log_odds);
  }
  return candidates;
}

struct NucleusSelection {
  std::vector<TokenCandidate> kept;
  std::vector<TokenCandidate> masked;
};

/// Keeps the smallest head of `candidates` (sorted by logit, descending) whose
/// softmax mass reaches `nucleus_mass`, then truncates it to `candidate_cap`.
/// Everything else is returned with a masked logit.
inline NucleusSelection select_nucleus(const std::vector<TokenCandidate>& candidates, double nucleus_mass,
                                       std::size_t candidate_cap) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidates to select from");
  if (!(nucleus_mass > 0.0 && nucleus_mass <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "nucleus_mass must lie in (0, 1]");
  }
  if (candidate_cap == 0) throw Error(ErrorCode::InvalidArgument, "candidate_cap must be positive");
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].logit.value() > candidates[i - 1].logit.value()) {
      throw Error(ErrorCode::InvalidArgument, "candidates must be sorted by logit, descending");
    }
  }

  const double top = candidates.front().logit.value();
  if (!std::isfinite(top)) throw Error(ErrorCode::EmptyCandidates, "every candidate is masked");
  double z = 0.0;
  std::vector<double> w(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    w[i] = candidates[i].logit.is_masked() ? 0.0 : std::exp(candidates[i].logit.value() - top);
    z += w[i];
  }
  std::size_t n_keep = 0;
  double cum = 0.0;
  while (n_keep < candidates.size()) {
    cum += w[n_keep] / z;
    ++n_keep;
    if (cum >= nucleus_mass) break;
  }
  n_keep = std::min(n_keep, candidate_cap);

  NucleusSelection sel;
  sel.kept.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_keep));
  for (std::size_t i = n_keep; i < candidates.size(); ++i) {
    auto c = candidates[i];
    c.logit = Logit::masked();
    sel.masked.push_back(std::move(c));
  }
  return sel;
}

/// Log-softmax over the given logits; masked entries map to -inf. Adjusted
/// logits are normalized here before they accumulate into beam scores.
inline std::vector<double> log_softmax(const std::vector<TokenCandidate>& cands) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double top = kNegInf;
  for (const auto& c : cands)
    if (!c.logit.is_masked()) top = std::max(top, c.logit.value());
  std::vector<double> out(cands.size(), kNegInf);
  if (!std::isfinite(top)) return out;
  double z = 0.0;
  for (const auto& c : cands)
    if (!c.logit.is_masked()) z += std::exp(c.logit.value() - top);
  const double log_z = top + std::log(z);
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (!cands[i].logit.is_masked()) out[i] = cands[i].logit.value() - log_z;
  return out;
}

struct Beam {
  std::vector<TokenId> token_ids;
  /// Rendered output; the eos token contributes no text.
  std::string text;
  double score = 0.0;  // cumulative adjusted log-probability
  bool finished = false;

  bool operator==(const Beam&) const = default;
};

/// Beam ordering: higher score first, ties broken by token ids (lexicographic, ascending).
inline bool beam_order(const Beam& a, const Beam& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.token_ids < b.token_ids;
}

struct CandidateRecord {
  std::size_t beam = 0;
  TokenId token_id = 0;
  std::string text;
  Logit logit;
  bool kept = false;
  bool scored = false;
  std::optional<double> entail_prob;
  Logit adjusted_logit;
  double logprob = -std::numeric_limits<double>::infinity();
  /// Lookahead only: tokens appended by the greedy completion and its text.
  std::size_t completion_length = 0;
  std::string scored_text;

  bool operator==(const CandidateRecord&) const = default;
};

struct StepRecord {
  std::size_t step = 0;
  std::vector<Beam> beams_in;
  std::vector<CandidateRecord> candidates;
  std::vector<Beam> beams_out;

  bool operator==(const StepRecord&) const = default;
};

struct TraceCounters {
  std::size_t generator_calls = 0;
  /// Generator calls spent on lookahead completions (subset of generator_calls).
  std::size_t completion_generator_calls = 0;
  /// Scored (premise, hypothesis) pairs.
  std::size_t scorer_calls = 0;
  std::size_t scorer_batches = 0;
  /// Decoding steps executed; each extends every live beam by one token.
  std::size_t tokens_generated = 0;

  bool operator==(const TraceCounters&) const = default;
};

struct DecodeTrace {
  DecodingMode mode = DecodingMode::Vanilla;
  DecodingConfig config;
  std::vector<StepRecord> steps;
  TraceCounters counters;
  bool complete = false;
  /// Every candidate of every live beam was masked at some step.
  bool exhausted = false;
  double wall_time_s = 0.0;

  std::size_t summed_completion_lengths() const {
    std::size_t total = 0;
    for (const auto& s : steps)
      for (const auto& c : s.candidates) total += c.completion_length;
    return total;
  }
};

struct DecodeResult {
  std::string text;
  std::vector<TokenId> token_ids;
  double score = 0.0;
  bool finished = false;
  DecodeTrace trace;
};

namespace detail {

inline bool closes_clause(const TokenCandidate& c, TokenId eos) {
  if (c.token_id == eos) return true;
  auto end = c.text.find_last_not_of(" \t\n");
  if (end == std::string::npos) return false;
  const char ch = c.text[end];
  return ch == '.' || ch == ',' || ch == ';' || ch == ':' || ch == '!' || ch == '?';
}

struct PendingScore {
  std::size_t beam;
  std::size_t cand;  // index into that beam's kept list
};

}  // namespace detail

/// Runs one decode in `config.mode`. `scorer` may be null for Vanilla.
inline DecodeResult decode(const Generator& gen, const Scorer* scorer, const std::string& premise,
                           const GenerationContext& ctx, const DecodingConfig& config) {
  config.validate();
  const auto mode = config.mode;
  if (mode != DecodingMode::Vanilla && scorer == nullptr) {
    throw Error(ErrorCode::InvalidArgument, std::string(to_string(mode)) + " decoding needs a scorer");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const DetokRule detok = gen.detok_rule();

  DecodeResult result;
  DecodeTrace& trace = result.trace;
  trace.mode = mode;
  trace.config = config;

  std::vector<Beam> beams{Beam{}};
  for (std::size_t step = 0; step < config.max_new_tokens; ++step) {
    if (std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; })) break;

    StepRecord rec;
    rec.step = step;
    rec.beams_in = beams;

    std::vector<std::vector<TokenCandidate>> kept(beams.size());
    std::vector<std::size_t> record_base(beams.size(), 0);
    TokenId eos = 0;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      if (beams[b].finished) continue;
      auto list = next_candidates(gen, ctx, beams[b].token_ids, config.top_n);
      ++trace.counters.generator_calls;
      eos = list.eos_token_id;
      auto sel = select_nucleus(list.candidates, config.nucleus_mass, config.candidate_cap);
      record_base[b] = rec.candidates.size();
      for (const auto& c : sel.kept) {
        CandidateRecord cr;
        cr.beam = b;
        cr.token_id = c.token_id;
        cr.text = c.token_id == list.eos_token_id ? std::string() : c.text;
        cr.logit = c.logit;
        cr.kept = true;
        rec.candidates.push_back(std::move(cr));
      }
      for (std::size_t i = sel.kept.size(); i < list.candidates.size(); ++i) {
        const auto& c = list.candidates[i];
        CandidateRecord cr;
        cr.beam = b;
        cr.token_id = c.token_id;
        cr.text = c.token_id == list.eos_token_id ? std::string() : c.text;
        cr.logit = c.logit;
        cr.adjusted_logit = Logit::masked();
        rec.candidates.push_back(std::move(cr));
      }
      kept[b] = std::move(sel.kept);
      for (auto& c : kept[b]) {
        if (c.token_id == list.eos_token_id) c.text.clear();
      }
    }

    // Entailment scores for every kept candidate of every live beam, one batch per step.
    if (mode != DecodingMode::Vanilla) {
      std::vector<ScoringPair> pairs;
      std::vector<detail::PendingScore> pending;
      for (std::size_t b = 0; b < beams.size(); ++b) {
        for (std::size_t i = 0; i < kept[b].size(); ++i) {
          auto& c = kept[b][i];
          auto& cr = rec.candidates[record_base[b] + i];
          if (mode == DecodingMode::PrefixGuided) {
            if (config.score_only_at_punctuation && !detail::closes_clause(c, eos)) {
              c.entail_prob = 1.0;
              continue;
            }
            cr.scored_text = append_token(beams[b].text, c.text, detok);
          } else {
            const std::size_t used = beams[b].token_ids.size() + 1;
            const std::size_t budget = config.max_new_tokens > used ? config.max_new_tokens - used : 0;
            std::vector<TokenId> ids = beams[b].token_ids;
            ids.push_back(c.token_id);
            std::string text = append_token(beams[b].text, c.text, detok);
            if (budget > 0) {
              auto completion = greedy_complete_traced(gen, ctx, ids, budget, eos);
              trace.counters.generator_calls += completion.generator_calls;
              trace.counters.completion_generator_calls += completion.generator_calls;
              cr.completion_length = completion.generator_calls;
              for (std::size_t k = ids.size(); k < completion.token_ids.size(); ++k) {
                if (completion.token_ids[k] == eos) continue;
                text = append_token(std::move(text), completion.texts[k - ids.size()], detok);
              }
            }
            cr.scored_text = std::move(text);
          }
          cr.scored = true;
          pairs.push_back({premise, cr.scored_text});
          pending.push_back({b, i});
        }
      }
      if (!pairs.empty()) {
        auto probs = score_prefixes(*scorer, pairs);
        trace.counters.scorer_calls += pairs.size();
        ++trace.counters.scorer_batches;
        for (std::size_t k = 0; k < pending.size(); ++k) {
          kept[pending[k].beam][pending[k].cand].entail_prob = probs[k];
        }
      }
    }

    std::vector<Beam> pool;
    for (const auto& b : beams)
      if (b.finished) pool.push_back(b);
    bool extended = false;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      if (beams[b].finished) continue;
      auto adjusted = mode == DecodingMode::Vanilla ? kept[b] : adjust_logits(kept[b], config.lambda, config.tau);
      const auto logprobs = log_softmax(adjusted);
      for (std::size_t i = 0; i < adjusted.size(); ++i) {
        auto& cr = rec.candidates[record_base[b] + i];
        cr.entail_prob = kept[b][i].entail_prob;
        if (mode != DecodingMode::Vanilla && !cr.scored) cr.entail_prob.reset();
        cr.adjusted_logit = adjusted[i].logit;
        cr.logprob = logprobs[i];
        if (!std::isfinite(logprobs[i])) continue;
        Beam nb = beams[b];
        nb.token_ids.push_back(adjusted[i].token_id);
        nb.text = append_token(std::move(nb.text), adjusted[i].text, detok);
        nb.score += logprobs[i];
        nb.finished = adjusted[i].token_id == eos;
        pool.push_back(std::move(nb));
        extended = true;
      }
    }
    ++trace.counters.tokens_generated;

    if (!extended) {
      // Every candidate of every live beam was masked: keep finished beams if
      // any, otherwise stop with the current ones.
      trace.exhausted = true;
      if (!pool.empty()) beams = std::move(pool);
      rec.beams_out = beams;
      trace.steps.push_back(std::move(rec));
      break;
    }
    std::stable_sort(pool.begin(), pool.end(), beam_order);
    if (pool.size() > config.beam_width) pool.resize(config.beam_width);
    beams = std::move(pool);
    rec.beams_out = beams;
    trace.steps.push_back(std::move(rec));
  }

  const Beam* best = nullptr;
  for (const auto& b : beams)
    if (b.finished && (best == nullptr || beam_order(b, *best))) best = &b;
  if (best == nullptr) {
    for (const auto& b : beams)
      if (best == nullptr || beam_order(b, *best)) best = &b;
  }
  result.text = best->text;
  result.token_ids = best->token_ids;
  result.score = best->score;
  result.finished = best->finished;
  trace.complete = true;
  trace.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline DecodeResult vanilla_beam_search(const Generator& gen, const GenerationContext& ctx,
                                        DecodingConfig config) {
  config.mode = DecodingMode::Vanilla;
  return decode(gen, nullptr, {}, ctx, config);
}

inline DecodeResult prefix_guided_decode(const Generator& gen, const Scorer& scorer, const std::string& premise,
                                         const GenerationContext& ctx, DecodingConfig config) {
  config.mode = DecodingMode::PrefixGuided;
  return decode(gen, &scorer, premise, ctx, config);
}

inline DecodeResult lookahead_decode(const Generator& gen, const Scorer& scorer, const std::string& premise,
                                     const GenerationContext& ctx, DecodingConfig config) {
  config.mode = DecodingMode::Lookahead;
  return decode(gen, &scorer, premise, ctx, config);
}

}  // namespace prefixnli
