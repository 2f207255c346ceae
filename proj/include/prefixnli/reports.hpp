#pragma once

// JSON and CSV renderings of decode traces, metric reports and cost reports.
// Field names are stable; wall-clock values live only under "timing".

#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefixnli/cost_model.hpp"
#include "prefixnli/decoding_engine.hpp"
#include "prefixnli/eval_metrics.hpp"
#include "prefixnli/http_backends.hpp"

namespace prefixnli {

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline nlohmann::json to_json(const DecodingConfig& c) {
  return {{"lambda", c.lambda},
          {"tau", c.tau},
          {"beam_width", c.beam_width},
          {"nucleus_mass", c.nucleus_mass},
          {"candidate_cap", c.candidate_cap},
          {"max_new_tokens", c.max_new_tokens},
          {"mode", std::string(to_string(c.mode))},
          {"top_n", c.top_n},
          {"score_only_at_punctuation", c.score_only_at_punctuation}};
}

inline nlohmann::json to_json(const Beam& b) {
  return {{"token_ids", b.token_ids}, {"text", b.text}, {"score", b.score}, {"finished", b.finished}};
}

inline nlohmann::json to_json(const CandidateRecord& c) {
  nlohmann::json j{{"beam", c.beam},
                   {"token_id", c.token_id},
                   {"text", c.text},
                   {"logit", detail::logit_to_json(c.logit)},
                   {"kept", c.kept},
                   {"scored", c.scored},
                   {"adjusted_logit", detail::logit_to_json(c.adjusted_logit)}};
  j["entail_prob"] = c.entail_prob ? nlohmann::json(*c.entail_prob) : nlohmann::json(nullptr);
  j["logprob"] = std::isfinite(c.logprob) ? nlohmann::json(c.logprob) : nlohmann::json("-inf");
  if (c.scored) j["scored_text"] = c.scored_text;
  if (c.completion_length > 0) j["completion_length"] = c.completion_length;
  return j;
}

inline nlohmann::json to_json(const DecodeResult& r) {
  const auto& t = r.trace;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    nlohmann::json js{{"step", s.step}};
    js["beams_in"] = nlohmann::json::array();
    for (const auto& b : s.beams_in) js["beams_in"].push_back(to_json(b));
    js["candidates"] = nlohmann::json::array();
    for (const auto& c : s.candidates) js["candidates"].push_back(to_json(c));
    js["beams_out"] = nlohmann::json::array();
    for (const auto& b : s.beams_out) js["beams_out"].push_back(to_json(b));
    steps.push_back(std::move(js));
  }
  return {{"mode", std::string(to_string(t.mode))},
          {"config", to_json(t.config)},
          {"result",
           {{"text", r.text}, {"token_ids", r.token_ids}, {"score", r.score}, {"finished", r.finished}}},
          {"counters",
           {{"generator_calls", t.counters.generator_calls},
            {"completion_generator_calls", t.counters.completion_generator_calls},
            {"scorer_calls", t.counters.scorer_calls},
            {"scorer_batches", t.counters.scorer_batches},
            {"tokens_generated", t.counters.tokens_generated}}},
          {"complete", t.complete},
          {"exhausted", t.exhausted},
          {"steps", std::move(steps)},
          {"timing", {{"wall_time_s", t.wall_time_s}}}};
}

inline nlohmann::json to_json(const F1Result& f) {
  return {{"value", f.value}, {"tp", f.tp}, {"fp", f.fp}, {"fn", f.fn}, {"degenerate", f.degenerate}};
}

inline nlohmann::json to_json(const BinReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.bins) {
    nlohmann::json jb{{"low", b.low}, {"high", b.high}, {"n", b.n}};
    jb["f1"] = b.f1 ? to_json(*b.f1) : nlohmann::json(nullptr);
    jb["ci"] = b.ci ? nlohmann::json::array({b.ci->first, b.ci->second}) : nlohmann::json(nullptr);
    jb["ci_widened"] = b.ci_widened;
    bins.push_back(std::move(jb));
  }
  return {{"edges", r.edges}, {"positive", std::string(to_string(r.positive))}, {"bins", std::move(bins)}};
}

/// One row per bin: low,high,n,f1,ci_low,ci_high (empty cells for absent bins).
inline std::string bins_csv(const BinReport& r) {
  std::string out = "bin_low,bin_high,n,f1,ci_low,ci_high\n";
  for (const auto& b : r.bins) {
    out += format_number(b.low) + "," + format_number(b.high) + "," + std::to_string(b.n) + ",";
    out += (b.f1 ? format_number(b.f1->value) : "") + ",";
    out += (b.ci ? format_number(b.ci->first) : "") + ",";
    out += (b.ci ? format_number(b.ci->second) : "") + "\n";
  }
  return out;
}

inline nlohmann::json to_json(const CostBreakdown& c) {
  return {{"flops_vanilla_per_token", c.flops_vanilla_per_token},
          {"flops_prefixnli_per_token", c.flops_prefixnli_per_token},
          {"theoretical_ratio", c.theoretical_ratio},
          {"assumed_m", c.assumed_m}};
}

inline nlohmann::json to_json(const TraceReconciliation& r) {
  return {{"modeled_generator_flops", r.modeled_generator_flops},
          {"modeled_scorer_flops", r.modeled_scorer_flops},
          {"modeled_total_flops", r.modeled_total_flops},
          {"generator_calls", r.generator_calls},
          {"scorer_calls", r.scorer_calls},
          {"tokens_generated", r.tokens_generated},
          {"beam_width", r.beam_width},
          {"empirical_m", r.empirical_m},
          {"theoretical_at_empirical_m", to_json(r.at_empirical_m)},
          {"timing", {{"wall_time_s", r.wall_time_s}, {"note", "measured; not derived from FLOPs"}}}};
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "n_lm,n_ent,m,flops_vanilla,flops_prefixnli,ratio\n";
  for (const auto& r : rows) {
    out += format_number(r.n_lm) + "," + format_number(r.n_ent) + "," + format_number(r.m) + "," +
           format_number(r.cost.flops_vanilla_per_token) + "," + format_number(r.cost.flops_prefixnli_per_token) +
           "," + format_number(r.cost.theoretical_ratio) + "\n";
  }
  return out;
}

}  // namespace prefixnli
