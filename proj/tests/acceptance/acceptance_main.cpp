// Acceptance suite: one line per criterion with its runtime budget.
// Exit status is nonzero when any criterion fails; skipped criteria do not fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "test_support.hpp"

namespace {

using namespace prefixnli;
namespace pt = prefixnli::testing;

struct Verdict {
  enum class Kind { Pass, Fail, Skip } kind = Kind::Pass;
  std::string detail;
};

Verdict pass(std::string d) { return {Verdict::Kind::Pass, std::move(d)}; }
Verdict fail(std::string d) { return {Verdict::Kind::Fail, std::move(d)}; }
Verdict skip(std::string d) { return {Verdict::Kind::Skip, std::move(d)}; }

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = fail(std::string("exception: ") + e.what());
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (v.kind == Verdict::Kind::Pass && elapsed >= budget_s) {
    v = fail("over budget; " + v.detail);
  }
  const char* tag = v.kind == Verdict::Kind::Pass ? "PASS" : v.kind == Verdict::Kind::Fail ? "FAIL" : "SKIP";
  if (v.kind == Verdict::Kind::Fail) ++failures;
  std::printf("%s  %-28s %7.3fs / %5.1fs  %s\n", tag, name.c_str(), elapsed, budget_s, v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Verdict penalty() {
  const auto out = adjust_logits({{1, "a", Logit(1.0), 0.2}}, 5.0, 0.5);
  const double oracle = -5.93147180559945309;
  if (std::abs(out[0].logit.value() - oracle) > 1e-9) return fail("value " + fmt(out[0].logit.value()));

  std::mt19937_64 g(611);
  std::uniform_real_distribution<double> u(0.0, 1.0), l(-20.0, 20.0), lam(1e-3, 20.0);
  for (int i = 0; i < 10000; ++i) {
    const double tau = std::max(u(g), 1e-6), logit = l(g), lambda = lam(g);
    double p1 = u(g) * tau, p2 = u(g) * tau;
    if (p1 > p2) std::swap(p1, p2);
    const double above = tau + (1.0 - tau) * u(g);
    auto adj = adjust_logits({{1, "a", Logit(logit), p1}, {2, "b", Logit(logit), p2}, {3, "c", Logit(logit), above}},
                             lambda, tau);
    if (p1 > 0.0 && p1 < p2 && !(adj[0].logit.value() < adj[1].logit.value())) {
      return fail("monotonicity case " + std::to_string(i));
    }
    if (!(adj[2].logit == Logit(logit))) return fail("unchanged-above-threshold case " + std::to_string(i));
  }

  // No-op: every score at or above the threshold reproduces vanilla decoding.
  for (int i = 0; i < 10000; ++i) {
    auto gen = pt::random_generator(g, "c", 3, 3);
    const double tau = std::max(u(g), 1e-6);
    TableScorer scorer(tau + (1.0 - tau) * u(g));
    for (int k = 1; k <= 30; ++k) scorer.set("*", "t" + std::to_string(k), tau + (1.0 - tau) * u(g));
    DecodingConfig config;
    config.tau = tau;
    config.lambda = lam(g);
    config.beam_width = pt::uniform(g, 1, 3);
    auto v = vanilla_beam_search(*gen, {"c", ""}, config);
    auto p = prefix_guided_decode(*gen, scorer, "premise", {"c", ""}, config);
    if (p.token_ids != v.token_ids || p.score != v.score || p.trace.steps.size() != v.trace.steps.size()) {
      return fail("no-op case " + std::to_string(i));
    }
    for (std::size_t s = 0; s < v.trace.steps.size(); ++s) {
      if (p.trace.steps[s].beams_out != v.trace.steps[s].beams_out) return fail("no-op beams case " + std::to_string(i));
    }
  }
  return pass("adjusted " + fmt(out[0].logit.value()) + "; 10000 monotonicity + 10000 no-op cases");
}

Verdict cost() {
  const auto c = per_token_cost(1.23e9, 1.23e9, 6);
  const bool ok = std::abs(c.flops_vanilla_per_token - 2.46e9) < 1.0 &&
                  std::abs(c.flops_prefixnli_per_token - 17.22e9) < 1.0 && std::abs(c.theoretical_ratio - 7.0) <= 1e-9;
  const auto d = "vanilla " + fmt(c.flops_vanilla_per_token) + ", guided " + fmt(c.flops_prefixnli_per_token) +
                 ", ratio " + fmt(c.theoretical_ratio);
  return ok ? pass(d) : fail(d);
}

Verdict figure1() {
  auto fx = load_fixture(pt::fixture_path("figure1.mock"));
  const auto& doc = fx.document("fig1");
  DecodingConfig config;
  config.beam_width = 1;
  auto p = prefix_guided_decode(*fx.generator, *fx.scorer, doc.premise, doc.context, config);
  auto v = vanilla_beam_search(*fx.generator, doc.context, config);
  const TraceCounters want_p{5, 0, 7, 5, 5}, want_v{5, 0, 0, 0, 5};
  std::ostringstream d;
  d << "prefix \"" << p.text << "\" (gen " << p.trace.counters.generator_calls << ", scorer "
    << p.trace.counters.scorer_calls << ", tokens " << p.trace.counters.tokens_generated << "); vanilla \"" << v.text
    << "\"";
  const bool ok = p.text == "Former goalkeeper Nicky Weaver" && v.text == "Former goalkeeper Jeremy Ruddy" &&
                  p.trace.counters == want_p && v.trace.counters == want_v &&
                  fx.generator->calls() == 10 && fx.scorer->calls() == 7;
  return ok ? pass(d.str()) : fail(d.str());
}

Verdict dataset_rule() {
  std::mt19937_64 g(1000);
  std::size_t sentences = 0, instances = 0;
  for (int doc = 0; sentences < 1000; ++doc) {
    auto ex = pt::random_annotated(g, "doc" + std::to_string(doc), 1, 24);
    sentences += ex.hypothesis_sentences.size();
    const auto got = instances_from_annotated(ex);
    std::vector<pt::ExpectedInstance> flat;
    for (const auto& inst : got) {
      flat.push_back({inst.prefix.sentence_id, inst.prefix.t(), inst.label});
      const auto& span = ex.spans[0];
      const auto end_index = inst.prefix.t() - 1;
      if (span && end_index >= span->start && end_index < span->end) return fail("partial overlap in " + ex.premise.id);
    }
    if (flat != pt::enumerate_expected(ex)) return fail("mismatch in " + ex.premise.id);
    instances += got.size();
  }
  return pass(std::to_string(sentences) + " sentences, " + std::to_string(instances) + " instances");
}

Verdict edit_recovery() {
  std::mt19937_64 g(2000);
  for (int i = 0; i < 1000; ++i) {
    const auto e = pt::random_edit(g);
    const auto span = derive_span_from_edit(e.seed, e.modified);
    if (!span || !(*span == e.injected)) return fail("case " + std::to_string(i));
  }
  return pass("1000 injected edits recovered");
}

Verdict metrics() {
  std::mt19937_64 g(3000);
  for (int i = 0; i < 10000; ++i) {
    const auto n = pt::uniform(g, 1, 40);
    std::vector<int> gold(n), pred(n);
    std::vector<PredictionRecord> recs;
    for (std::size_t k = 0; k < n; ++k) {
      gold[k] = static_cast<int>(pt::uniform(g, 0, 1));
      pred[k] = static_cast<int>(pt::uniform(g, 0, 1));
      recs.push_back({k, pred[k] ? EntailmentLabel::NotEntailed : EntailmentLabel::Entailed,
                      gold[k] ? EntailmentLabel::NotEntailed : EntailmentLabel::Entailed, 1.0});
    }
    if (std::abs(micro_f1(recs, EntailmentLabel::NotEntailed).value - pt::oracle_f1(gold, pred, 1)) > 1e-12) {
      return fail("F1 case " + std::to_string(i));
    }
  }
  for (int i = 0; i < 1000; ++i) {
    TokenList a, b;
    const auto vocab = pt::uniform(g, 2, 20);
    for (std::size_t k = 0, n = pt::uniform(g, 1, 200); k < n; ++k) a.push_back("w" + std::to_string(pt::uniform(g, 0, vocab)));
    for (std::size_t k = 0, n = pt::uniform(g, 1, 200); k < n; ++k) b.push_back("w" + std::to_string(pt::uniform(g, 0, vocab)));
    const auto lcs = pt::oracle_lcs(a, b);
    const double p = static_cast<double>(lcs) / a.size(), r = static_cast<double>(lcs) / b.size();
    const double want = lcs == 0 ? 0.0 : 2 * p * r / (p + r);
    if (lcs_length(a, b) != lcs || std::abs(rouge_l_f1(a, b) - want) > 1e-12) return fail("ROUGE case " + std::to_string(i));
  }
  std::bernoulli_distribution coin(0.7);
  std::vector<double> xs(200);
  for (auto& x : xs) x = coin(g) ? 1.0 : 0.0;
  auto mean = [](std::span<const double> s) {
    double t = 0.0;
    for (double v : s) t += v;
    return t / static_cast<double>(s.size());
  };
  for (std::uint64_t seed : {0ULL, 1ULL, 17ULL, 123456789ULL}) {
    const auto ci = bootstrap_ci<double>(xs, mean, 1000, 0.95, seed);
    const auto oracle = pt::oracle_bootstrap(xs, [&](const std::vector<double>& s) { return mean(s); }, 1000, 0.95, seed);
    if (ci.first != oracle.first || ci.second != oracle.second) return fail("bootstrap seed " + std::to_string(seed));
  }
  return pass("10000 F1, 1000 ROUGE-L, 4 bootstrap seeds bit-exact");
}

Verdict no_op() {
  std::mt19937_64 g(4000);
  for (int i = 0; i < 100; ++i) {
    auto gen = pt::random_generator(g, "c", 6, 3);
    ConstantScorer one(1.0);
    DecodingConfig config;
    config.beam_width = pt::uniform(g, 1, 4);
    auto v = vanilla_beam_search(*gen, {"c", ""}, config);
    auto p = prefix_guided_decode(*gen, one, "premise", {"c", ""}, config);
    if (p.token_ids != v.token_ids || p.trace.steps.size() != v.trace.steps.size()) return fail("generator " + std::to_string(i));
    for (std::size_t s = 0; s < v.trace.steps.size(); ++s) {
      if (p.trace.steps[s].beams_out != v.trace.steps[s].beams_out) return fail("generator " + std::to_string(i));
    }
  }
  return pass("100 random generators token-for-token");
}

Verdict lookahead_cost() {
  std::ostringstream d;
  std::size_t runs = 0;
  for (const auto& entry : std::filesystem::directory_iterator(PREFIXNLI_FIXTURE_DIR)) {
    if (entry.path().extension() != ".mock") continue;
    auto fx = load_fixture(entry.path());
    if (!fx.scorer) continue;
    for (const auto& doc : fx.documents) {
      for (std::size_t k : {1, 3}) {
        DecodingConfig config;
        config.beam_width = k;
        auto p = prefix_guided_decode(*fx.generator, *fx.scorer, doc.premise, doc.context, config);
        fx.generator->reset_calls();
        auto la = lookahead_decode(*fx.generator, *fx.scorer, doc.premise, doc.context, config);
        std::size_t expansions = 0;
        for (const auto& step : la.trace.steps)
          for (const auto& b : step.beams_in) expansions += !b.finished;
        const auto gap = la.trace.counters.generator_calls - expansions;
        const auto summed = la.trace.summed_completion_lengths();
        d << entry.path().stem().string() << "/" << doc.id << " K=" << k << ": " << la.trace.counters.generator_calls
          << ">=" << p.trace.counters.generator_calls << ", gap " << gap << "=" << summed << "; ";
        if (la.trace.counters.generator_calls < p.trace.counters.generator_calls || gap != summed ||
            fx.generator->calls() != la.trace.counters.generator_calls) {
          return fail(d.str());
        }
        ++runs;
      }
    }
  }
  if (runs == 0) return fail("no fixtures found");
  return pass(d.str());
}

Verdict reference_counts() {
  const char* path = std::getenv("PREFIXNLI_RAGTRUTH_ANNOTATED");
  if (path == nullptr || *path == '\0') return skip("PREFIXNLI_RAGTRUTH_ANNOTATED not set");
  std::size_t faithful = 0, unfaithful = 0;
  for (const auto& ex : read_annotated_file(path)) {
    for (const auto& inst : instances_from_annotated(ex)) {
      (inst.label == EntailmentLabel::Entailed ? faithful : unfaithful)++;
    }
  }
  const auto d = std::to_string(faithful) + " faithful, " + std::to_string(unfaithful) + " unfaithful";
  return faithful == 194283 && unfaithful == 16395 ? pass(d) : fail(d + " (want 194283 / 16395)");
}

}  // namespace

int main() {
  criterion("penalty", 5.0, penalty);
  criterion("cost-ratio", 1.0, cost);
  criterion("figure1-end-to-end", 5.0, figure1);
  criterion("dataset-rule", 30.0, dataset_rule);
  criterion("edit-recovery", 30.0, edit_recovery);
  criterion("metrics-oracles", 60.0, metrics);
  criterion("no-op-equivalence", 30.0, no_op);
  criterion("lookahead-cost-dominance", 30.0, lookahead_cost);
  criterion("reference-corpus-counts", 600.0, reference_counts);
  std::printf("%s\n", failures == 0 ? "acceptance: all criteria met" : "acceptance: FAILED");
  return failures == 0 ? 0 : 1;
}
