#pragma once

// Analytical per-token compute for vanilla and prefix-guided decoding, and
// reconciliation of measured call counts against it.
//
// A forward pass costs about 2N + 2 * n_layer * n_ctx * d_model FLOPs per
// token, N being the non-embedding parameter count. With a KV cache over the
// shared prefix, each of the M candidates a beam scores costs one incremental
// scorer pass, so a generated token costs 2 N_lm + 2 N_ent M.

#include <string>
#include <vector>

#include "prefixnli/core_types.hpp"
#include "prefixnli/decoding_engine.hpp"

namespace prefixnli {

inline double forward_flops(const ModelShape& shape, std::uint64_t n_ctx) {
  if (!shape.valid()) throw Error(ErrorCode::InvalidArgument, "model shape fields must be positive");
  return 2.0 * static_cast<double>(shape.n_params_nonembed) +
         2.0 * static_cast<double>(shape.n_layer) * static_cast<double>(n_ctx) * static_cast<double>(shape.d_model);
}

/// Forward cost under the 2N approximation (attention term dropped).
inline double forward_flops_approx(double n_params_nonembed) { return 2.0 * n_params_nonembed; }

struct CostBreakdown {
  double flops_vanilla_per_token = 0.0;
  double flops_prefixnli_per_token = 0.0;
  double theoretical_ratio = 0.0;
  double assumed_m = 0.0;
};

/// `m` is the average number of candidates scored per beam and step; it may
/// be fractional when taken from a measured trace.
inline CostBreakdown per_token_cost(double n_lm, double n_ent, double m) {
  if (!(n_lm > 0.0) || n_ent < 0.0 || m < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "per_token_cost needs n_lm > 0, n_ent >= 0, m >= 0");
  }
  CostBreakdown c;
  c.assumed_m = m;
  c.flops_vanilla_per_token = forward_flops_approx(n_lm);
  c.flops_prefixnli_per_token = forward_flops_approx(n_lm) + forward_flops_approx(n_ent) * m;
  c.theoretical_ratio = c.flops_prefixnli_per_token / c.flops_vanilla_per_token;
  return c;
}

/// Same breakdown with the attention term kept, at context length `n_ctx`
/// for both models.
inline CostBreakdown per_token_cost_full(const ModelShape& lm, const ModelShape& ent, double m,
                                         std::uint64_t n_ctx) {
  if (m < 0.0) throw Error(ErrorCode::InvalidArgument, "m must be >= 0");
  CostBreakdown c;
  c.assumed_m = m;
  c.flops_vanilla_per_token = forward_flops(lm, n_ctx);
  c.flops_prefixnli_per_token = c.flops_vanilla_per_token + forward_flops(ent, n_ctx) * m;
  c.theoretical_ratio = c.flops_prefixnli_per_token / c.flops_vanilla_per_token;
  return c;
}

struct TraceReconciliation {
  double modeled_generator_flops = 0.0;
  double modeled_scorer_flops = 0.0;
  double modeled_total_flops = 0.0;
  std::size_t generator_calls = 0;
  std::size_t scorer_calls = 0;
  std::size_t tokens_generated = 0;
  std::size_t beam_width = 0;
  /// scorer_calls / tokens_generated / beam_width.
  double empirical_m = 0.0;
  /// Theoretical overhead at the empirical M.
  CostBreakdown at_empirical_m;
  /// Measured wall-clock, reported next to the model and never derived from it.
  double wall_time_s = 0.0;
};

inline TraceReconciliation reconcile_trace(const DecodeTrace& trace, const ModelShape& generator,
                                           const ModelShape& scorer) {
  if (!trace.complete) throw Error(ErrorCode::IncompleteTrace, "trace did not run to completion");
  if (!generator.valid() || !scorer.valid()) {
    throw Error(ErrorCode::InvalidArgument, "model shape fields must be positive");
  }
  TraceReconciliation r;
  const auto& k = trace.counters;
  r.generator_calls = k.generator_calls;
  r.scorer_calls = k.scorer_calls;
  r.tokens_generated = k.tokens_generated;
  r.beam_width = trace.config.beam_width;
  const double n_lm = static_cast<double>(generator.n_params_nonembed);
  const double n_ent = static_cast<double>(scorer.n_params_nonembed);
  r.modeled_generator_flops = forward_flops_approx(n_lm) * static_cast<double>(k.generator_calls);
  r.modeled_scorer_flops = forward_flops_approx(n_ent) * static_cast<double>(k.scorer_calls);
  r.modeled_total_flops = r.modeled_generator_flops + r.modeled_scorer_flops;
  if (k.tokens_generated > 0 && r.beam_width > 0) {
    r.empirical_m = static_cast<double>(k.scorer_calls) / static_cast<double>(k.tokens_generated) /
                    static_cast<double>(r.beam_width);
  }
  r.at_empirical_m = per_token_cost(n_lm, n_ent, r.empirical_m);
  r.wall_time_s = trace.wall_time_s;
  return r;
}

struct SweepRow {
  double n_lm = 0.0;
  double n_ent = 0.0;
  double m = 0.0;
  CostBreakdown cost;
};

inline std::vector<SweepRow> cost_sweep(const std::vector<double>& n_lm, const std::vector<double>& n_ent,
                                        const std::vector<double>& m) {
  std::vector<SweepRow> rows;
  for (double a : n_lm)
    for (double b : n_ent)
      for (double c : m) rows.push_back({a, b, c, per_token_cost(a, b, c)});
  return rows;
}

}  // namespace prefixnli
