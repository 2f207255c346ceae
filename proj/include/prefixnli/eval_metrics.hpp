#pragma once

// Evaluation metrics: class-specific micro-F1, prefix-length binning with
// bootstrap confidence intervals, summary faithfulness proportion and
// ROUGE-L.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "prefixnli/core_types.hpp"
#include "prefixnli/rng.hpp"

namespace prefixnli {

struct PredictionRecord {
  std::size_t instance_index = 0;
  EntailmentLabel predicted = EntailmentLabel::Entailed;
  EntailmentLabel gold = EntailmentLabel::Entailed;
  double relative_position = 1.0;
};

struct F1Result {
  double value = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// No gold and no predicted positives: value is reported as 1.
  bool degenerate = false;
};

/// F1 = 2TP / (2TP + FP + FN) over pooled counts with `positive` as the positive class.
inline F1Result micro_f1(std::span<const PredictionRecord> records, EntailmentLabel positive) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "micro_f1 needs at least one record");
  F1Result r;
  for (const auto& rec : records) {
    const bool pred = rec.predicted == positive;
    const bool gold = rec.gold == positive;
    r.tp += pred && gold;
    r.fp += pred && !gold;
    r.fn += !pred && gold;
  }
  const std::size_t denom = 2 * r.tp + r.fp + r.fn;
  if (denom == 0) {
    r.value = 1.0;
    r.degenerate = true;
  } else {
    r.value = static_cast<double>(2 * r.tp) / static_cast<double>(denom);
  }
  return r;
}

/// Upper bin edges; bin i covers (edges[i-1], edges[i]] with edges[-1] = 0.
inline const std::vector<double>& default_bin_edges() {
  static const std::vector<double> edges{0.32, 0.55, 0.78, 1.0};
  return edges;
}

inline void validate_edges(std::span<const double> edges) {
  if (edges.empty() || edges.back() != 1.0) {
    throw Error(ErrorCode::InvalidArgument, "bin edges must end at 1.0");
  }
  double prev = 0.0;
  for (double e : edges) {
    if (!(e > prev)) throw Error(ErrorCode::InvalidArgument, "bin edges must be strictly increasing in (0, 1]");
    prev = e;
  }
}

/// Index of the unique bin with low < position <= high.
inline std::size_t bin_index(double position, std::span<const double> edges) {
  if (!(position > 0.0 && position <= 1.0)) {
    throw Error(ErrorCode::RecordOutOfRange, "relative position " + std::to_string(position) + " outside (0, 1]");
  }
  auto it = std::lower_bound(edges.begin(), edges.end(), position);
  return static_cast<std::size_t>(it - edges.begin());
}

struct BinStats {
  double low = 0.0;
  double high = 0.0;
  std::size_t n = 0;
  /// Absent when the bin holds no records.
  std::optional<F1Result> f1;
  std::optional<std::pair<double, double>> ci;
  /// The percentile interval excluded the point estimate and was widened to include it.
  bool ci_widened = false;
};

struct BinReport {
  std::vector<double> edges;
  EntailmentLabel positive = EntailmentLabel::NotEntailed;
  std::vector<BinStats> bins;
};

inline std::vector<std::vector<PredictionRecord>> partition_by_bin(std::span<const PredictionRecord> records,
                                                                   std::span<const double> edges) {
  validate_edges(edges);
  std::vector<std::vector<PredictionRecord>> parts(edges.size());
  for (const auto& r : records) parts[bin_index(r.relative_position, edges)].push_back(r);
  return parts;
}

/// Point F1 per bin; empty bins carry no value.
inline BinReport bin_by_prefix_fraction(std::span<const PredictionRecord> records,
                                        std::span<const double> edges = default_bin_edges(),
                                        EntailmentLabel positive = EntailmentLabel::NotEntailed) {
  const auto parts = partition_by_bin(records, edges);
  BinReport report;
  report.edges.assign(edges.begin(), edges.end());
  report.positive = positive;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    BinStats s;
    s.low = i == 0 ? 0.0 : edges[i - 1];
    s.high = edges[i];
    s.n = parts[i].size();
    if (!parts[i].empty()) s.f1 = micro_f1(parts[i], positive);
    report.bins.push_back(std::move(s));
  }
  return report;
}

/// Percentile with linear interpolation between order statistics
/// (position q * (n - 1) in the sorted sample).
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "percentile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

/// Percentile bootstrap. Resample r draws records.size() indices with
/// replacement from an mt19937_64 seeded with derive_seed(seed, r); each index
/// is bounded_index(word, n). The interval is the (1-level)/2 and
/// 1-(1-level)/2 percentiles of the recomputed statistic.
template <typename Record, typename Statistic>
std::pair<double, double> bootstrap_ci(std::span<const Record> records, Statistic&& statistic,
                                       std::size_t n_resamples = 1000, double level = 0.95,
                                       std::uint64_t seed = 0) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "bootstrap needs at least one record");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "level must lie in (0, 1)");
  if (n_resamples == 0) throw Error(ErrorCode::InvalidArgument, "n_resamples must be positive");
  const std::size_t n = records.size();
  std::vector<double> stats(n_resamples);
  std::vector<Record> sample(n);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    rng::Stream stream(rng::derive_seed(seed, r));
    for (std::size_t i = 0; i < n; ++i) sample[i] = records[stream.index(n)];
    stats[r] = statistic(std::span<const Record>(sample));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  return {percentile_sorted(stats, alpha), percentile_sorted(stats, 1.0 - alpha)};
}

struct BootstrapOptions {
  std::size_t n_resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

/// Binned F1 with a bootstrap interval per bin. Bin i resamples with seed
/// derive_seed(options.seed, i).
inline BinReport bin_with_ci(std::span<const PredictionRecord> records,
                             std::span<const double> edges = default_bin_edges(),
                             EntailmentLabel positive = EntailmentLabel::NotEntailed,
                             const BootstrapOptions& options = {}) {
  auto report = bin_by_prefix_fraction(records, edges, positive);
  const auto parts = partition_by_bin(records, edges);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty()) continue;
    auto& bin = report.bins[i];
    auto ci = bootstrap_ci<PredictionRecord>(
        parts[i], [positive](std::span<const PredictionRecord> s) { return micro_f1(s, positive).value; },
        options.n_resamples, options.level, rng::derive_seed(options.seed, i));
    const double point = bin.f1->value;
    if (ci.first > point || ci.second < point) {
      bin.ci_widened = true;
      ci.first = std::min(ci.first, point);
      ci.second = std::max(ci.second, point);
    }
    bin.ci = ci;
  }
  return report;
}

/// Share of a summary's sentences judged entailed.
inline double faithfulness_proportion(std::span<const EntailmentLabel> sentence_labels) {
  if (sentence_labels.empty()) throw Error(ErrorCode::EmptySummary, "summary has no sentences");
  const auto entailed = std::count(sentence_labels.begin(), sentence_labels.end(), EntailmentLabel::Entailed);
  return static_cast<double>(entailed) / static_cast<double>(sentence_labels.size());
}

/// Unweighted mean of per-summary proportions.
inline double corpus_faithfulness(std::span<const std::vector<EntailmentLabel>> summaries) {
  if (summaries.empty()) throw Error(ErrorCode::EmptyInput, "no summaries");
  double total = 0.0;
  for (const auto& s : summaries) total += faithfulness_proportion(s);
  return total / static_cast<double>(summaries.size());
}

/// Length of the longest common subsequence, bit-parallel over the
/// reference (Hyyro's formulation): O(|candidate| * |reference| / 64).
inline std::size_t lcs_length(std::span<const Token> a, std::span<const Token> b) {
  if (a.empty() || b.empty()) return 0;
  const std::size_t words = (b.size() + 63) / 64;
  std::unordered_map<std::string_view, std::vector<std::uint64_t>> match;
  for (std::size_t j = 0; j < b.size(); ++j) {
    auto& m = match[b[j]];
    if (m.empty()) m.assign(words, 0);
    m[j / 64] |= std::uint64_t{1} << (j % 64);
  }
  std::vector<std::uint64_t> v(words, ~std::uint64_t{0});
  for (const auto& tok : a) {
    auto it = match.find(tok);
    if (it == match.end()) continue;
    const auto& m = it->second;
    // v = (v + (v & m)) | (v & ~m), with carry across words.
    std::uint64_t carry = 0;
    for (std::size_t w = 0; w < words; ++w) {
      const std::uint64_t u = v[w] & m[w];
      const std::uint64_t sum = v[w] + u;
      const std::uint64_t c1 = sum < v[w];
      const std::uint64_t sum2 = sum + carry;
      const std::uint64_t c2 = sum2 < sum;
      carry = c1 | c2;
      v[w] = sum2 | (v[w] - u);
    }
  }
  std::size_t zeros = 0;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t word = v[w];
    if (w + 1 == words && b.size() % 64 != 0) word |= ~std::uint64_t{0} << (b.size() % 64);
    zeros += static_cast<std::size_t>(std::popcount(~word));
  }
  return zeros;
}

/// ROUGE-L F1 on pre-tokenized text (no stemming or stopword removal).
inline double rouge_l_f1(std::span<const Token> candidate, std::span<const Token> reference) {
  if (candidate.empty() || reference.empty()) throw Error(ErrorCode::EmptyInput, "ROUGE-L needs non-empty sequences");
  const auto lcs = lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

}  // namespace prefixnli
