#include <gtest/gtest.h>

#include <random>

#include "prefixnli/core_types.hpp"
#include "prefixnli/text.hpp"
#include "test_support.hpp"

namespace prefixnli {
namespace {

const TokenList kFive{"a", "b", "c", "d", "e"};

TEST(MakePrefixInstance, BeforeSpanIsEntailed) {
  auto out = make_prefix_instance("p", "p#0", kFive, 1, HallucinationSpan{2, 3});
  auto* inst = std::get_if<PrefixInstance>(&out);
  ASSERT_NE(inst, nullptr);
  EXPECT_EQ(inst->label, EntailmentLabel::Entailed);
  EXPECT_EQ(inst->prefix.t(), 2u);
  EXPECT_DOUBLE_EQ(inst->relative_position(), 2.0 / 5.0);
  EXPECT_EQ(inst->prefix.tokens, (TokenList{"a", "b"}));
}

TEST(MakePrefixInstance, InsideSpanIsExcluded) {
  auto out = make_prefix_instance("p", "p#0", kFive, 2, HallucinationSpan{2, 3});
  ASSERT_TRUE(std::holds_alternative<Excluded>(out));
  EXPECT_EQ(std::get<Excluded>(out).end_index, 2u);
}

TEST(MakePrefixInstance, AtSpanEndIsNotEntailed) {
  auto out = make_prefix_instance("p", "p#0", kFive, 3, HallucinationSpan{2, 3});
  EXPECT_EQ(std::get<PrefixInstance>(out).label, EntailmentLabel::NotEntailed);
}

TEST(MakePrefixInstance, FaithfulSentenceFullPrefix) {
  auto out = make_prefix_instance("p", "p#0", kFive, 4, std::nullopt);
  const auto& inst = std::get<PrefixInstance>(out);
  EXPECT_EQ(inst.label, EntailmentLabel::Entailed);
  EXPECT_DOUBLE_EQ(inst.relative_position(), 1.0);
}

TEST(MakePrefixInstance, ErrorsOnBadIndices) {
  try {
    make_prefix_instance("p", "s", kFive, 5, std::nullopt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
  EXPECT_THROW(make_prefix_instance("p", "s", kFive, 0, HallucinationSpan{3, 5}), Error);
  EXPECT_THROW(make_prefix_instance("p", "s", kFive, 0, HallucinationSpan{3, 2}), Error);
}

TEST(MakePrefixInstanceProperty, RegionsPartitionSentence) {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = testing::uniform(g, 1, 15);
    TokenList toks(n, "w");
    const auto a = testing::uniform(g, 0, n - 1), b = testing::uniform(g, 0, n - 1);
    const HallucinationSpan span{std::min(a, b), std::max(a, b)};
    std::size_t ent = 0, nent = 0, excl = 0;
    double last_pos = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      auto out = make_prefix_instance("p", "s", toks, k, span);
      if (auto* inst = std::get_if<PrefixInstance>(&out)) {
        EXPECT_GT(inst->relative_position(), last_pos);
        last_pos = inst->relative_position();
        if (inst->label == EntailmentLabel::Entailed) {
          EXPECT_LT(k, span.start);
          ++ent;
        } else {
          EXPECT_GE(k, span.end);
          ++nent;
        }
      } else {
        EXPECT_GE(k, span.start);
        EXPECT_LT(k, span.end);
        ++excl;
      }
    }
    EXPECT_EQ(ent, span.start);
    EXPECT_EQ(excl, span.end - span.start);
    EXPECT_EQ(nent, n - span.end);
  }
}

TEST(MakePrefixInstanceProperty, FaithfulSentencesYieldOnlyEntailed) {
  for (std::size_t n = 1; n < 20; ++n) {
    TokenList toks(n, "w");
    for (std::size_t k = 0; k < n; ++k) {
      auto out = make_prefix_instance("p", "s", toks, k, std::nullopt);
      EXPECT_EQ(std::get<PrefixInstance>(out).label, EntailmentLabel::Entailed);
    }
  }
}

TEST(Logit, MaskedSentinelIsDistinct) {
  EXPECT_TRUE(Logit::masked().is_masked());
  EXPECT_FALSE(Logit(-1e300).is_masked());
  EXPECT_EQ(Logit::masked(), Logit::masked());
  EXPECT_NE(Logit(-std::numeric_limits<double>::infinity()), Logit::masked());
  EXPECT_EQ(Logit::masked().value(), -std::numeric_limits<double>::infinity());
}

TEST(DecodingConfig, DefaultsAndValidation) {
  DecodingConfig c;
  EXPECT_DOUBLE_EQ(c.lambda, 5.0);
  EXPECT_DOUBLE_EQ(c.tau, 0.5);
  EXPECT_EQ(c.beam_width, 3u);
  EXPECT_DOUBLE_EQ(c.nucleus_mass, 0.9);
  EXPECT_EQ(c.candidate_cap, 20u);
  EXPECT_NO_THROW(c.validate());

  auto bad = c;
  bad.tau = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.lambda = -1;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.nucleus_mass = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.beam_width = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Text, DetokenizeRules) {
  const TokenList toks{"Hello", ",", "world"};
  EXPECT_EQ(detokenize(toks, DetokRule::Whitespace), "Hello , world");
  EXPECT_EQ(detokenize(TokenList{"He", "llo", " wor", "ld"}, DetokRule::Concat), "Hello world");
  EXPECT_EQ(append_token("", "a", DetokRule::Whitespace), "a");
  EXPECT_EQ(append_token("a", "", DetokRule::Whitespace), "a");
}

TEST(Text, SentenceSplitting) {
  EXPECT_EQ(split_sentences("One two. Three? Four"), (std::vector<std::string>{"One two.", "Three?", "Four"}));
  EXPECT_EQ(split_sentences("Pi is 3.14 today."), (std::vector<std::string>{"Pi is 3.14 today."}));
  EXPECT_TRUE(split_sentences("   ").empty());
  auto sents = split_token_sentences(TokenList{"a", "b.", "c", "!"});
  ASSERT_EQ(sents.size(), 2u);
  EXPECT_EQ(sents[1], (TokenList{"c", "!"}));
}

TEST(Error, CategoriesMapToExitClasses) {
  EXPECT_EQ(Error(ErrorCode::InvalidConfig, "x").category(), ErrorCategory::Usage);
  EXPECT_EQ(Error(ErrorCode::InconsistentVerdict, "x").category(), ErrorCategory::Data);
  EXPECT_EQ(Error(ErrorCode::Timeout, "x").category(), ErrorCategory::Backend);
}

}  // namespace
}  // namespace prefixnli
