#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "prefixnli/decoding_engine.hpp"
#include "prefixnli/fixture.hpp"
#include "prefixnli/http_backends.hpp"
#include "prefixnli/protocol_server.hpp"
#include "test_support.hpp"

namespace prefixnli {
namespace {

class LocalServer {
 public:
  LocalServer() { port_ = server.bind_to_any_port("127.0.0.1"); }
  ~LocalServer() { stop(); }

  void start() {
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  void stop() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

HttpOptions fast_timeout() {
  HttpOptions o;
  o.timeout = std::chrono::milliseconds(300);
  return o;
}

template <typename F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

TEST(LogitJson, MaskedRoundTrip) {
  EXPECT_EQ(detail::logit_to_json(Logit::masked()), "-inf");
  EXPECT_TRUE(detail::logit_from_json("-inf").is_masked());
  EXPECT_EQ(detail::logit_from_json(1.25), Logit(1.25));
  EXPECT_THROW(detail::logit_from_json("nan"), Error);
}

TEST(CandidatesRequest, Shape) {
  auto body = candidates_request({"fig1", ""}, std::vector<TokenId>{1, 2}, 50);
  EXPECT_EQ(body.dump(), R"({"context_id":"fig1","prefix_token_ids":[1,2],"top_n":50})");
  body = candidates_request({"fig1", "prompt"}, std::vector<TokenId>{}, 5);
  EXPECT_EQ(body.at("prompt_text"), "prompt");
}

class Figure1Http : public ::testing::Test {
 protected:
  void SetUp() override {
    fx = load_fixture(testing::fixture_path("figure1.mock"));
    mount_protocol(local.server, fx.generator.get(), fx.scorer.get());
    local.start();
  }
  Fixture fx;
  LocalServer local;
};

TEST_F(Figure1Http, CandidatesAndInfoMatchInProcess) {
  HttpGenerator gen(local.url(), {}, DetokRule::Whitespace);
  const auto& doc = fx.document("fig1");
  const std::vector<TokenId> prefix{1, 2};
  auto remote = next_candidates(gen, doc.context, prefix, 50);
  auto mock = next_candidates(*fx.generator, doc.context, prefix, 50);
  ASSERT_EQ(remote.candidates.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(remote.candidates[i].token_id, mock.candidates[i].token_id);
    EXPECT_EQ(remote.candidates[i].text, mock.candidates[i].text);
    EXPECT_EQ(remote.candidates[i].logit, mock.candidates[i].logit);
  }
  EXPECT_EQ(get_info(gen), fx.generator->info());
  EXPECT_EQ(next_candidates(gen, doc.context, prefix, 1).candidates.size(), 1u);
  EXPECT_EQ(error_code_of([&] { next_candidates(gen, doc.context, std::vector<TokenId>{9}, 5); }),
            ErrorCode::Transport);
}

TEST_F(Figure1Http, ScorerSplitsBatchesAndKeepsOrder) {
  HttpScorer scorer(local.url(), {}, 2);
  std::vector<ScoringPair> pairs{{"p", "Former"},
                                 {"p", "Former goalkeeper Jeremy"},
                                 {"p", "Former goalkeeper Nicky"},
                                 {"p", "Former goalkeeper Roy"},
                                 {"p", "Former goalkeeper"}};
  EXPECT_EQ(score_prefixes(scorer, pairs), (std::vector<double>{1, 0, 1, 0, 1}));
  EXPECT_EQ(scorer.requests(), 3u);
}

TEST_F(Figure1Http, RemoteDecodeMatchesInProcess) {
  HttpGenerator gen(local.url(), {}, DetokRule::Whitespace);
  HttpScorer scorer(local.url());
  const auto& doc = fx.document("fig1");
  DecodingConfig config;
  config.beam_width = 1;
  auto remote = prefix_guided_decode(gen, scorer, doc.premise, doc.context, config);
  fx.generator->reset_calls();
  fx.scorer->reset_calls();
  auto local_run = prefix_guided_decode(*fx.generator, *fx.scorer, doc.premise, doc.context, config);
  EXPECT_EQ(remote.text, "Former goalkeeper Nicky Weaver");
  EXPECT_EQ(remote.token_ids, local_run.token_ids);
  EXPECT_EQ(remote.trace.counters, local_run.trace.counters);
  EXPECT_EQ(remote.trace.steps, local_run.trace.steps);
  EXPECT_EQ(gen.requests(), remote.trace.counters.generator_calls);
  EXPECT_EQ(scorer.requests(), remote.trace.counters.scorer_batches);
}

// Replays a recorded exchange: each request must match the transcript byte for
// byte (as parsed JSON) and in order.
TEST(GoldenTranscript, Figure1Replay) {
  const auto transcript = nlohmann::json::parse(io::read_file(testing::fixture_path("figure1.transcript.json")));
  const auto& exchanges = transcript.at("exchanges");
  std::atomic<std::size_t> next{0};
  std::atomic<bool> mismatch{false};
  LocalServer local;
  auto replay = [&](const httplib::Request& req, httplib::Response& res) {
    const auto i = next.fetch_add(1);
    if (i >= exchanges.size()) {
      mismatch = true;
      res.status = 500;
      return;
    }
    const auto& e = exchanges[i];
    const bool same = e.at("method") == req.method && e.at("path") == req.path &&
                      (!e.contains("request") || e.at("request") == nlohmann::json::parse(req.body));
    if (!same) mismatch = true;
    res.set_content(e.at("response").dump(), "application/json");
  };
  local.server.Get("/v1/info", replay);
  local.server.Post("/v1/generate/candidates", replay);
  local.server.Post("/v1/entail", replay);
  local.start();

  HttpGenerator gen(local.url(), {}, DetokRule::Whitespace);
  HttpScorer scorer(local.url());
  const auto info = gen.info();
  EXPECT_EQ(info.shape, (ModelShape{1230000000, 16, 2048}));
  EXPECT_EQ(scorer.info().name, "figure1-generator");
  DecodingConfig config;
  config.beam_width = 1;
  auto r = prefix_guided_decode(gen, scorer,
                                "Manchester City have confirmed that former goalkeeper Nicky Weaver has rejoined the "
                                "club as a coach.",
                                {"fig1", "Summarize the following text accurately and concisely."}, config);
  EXPECT_EQ(r.text, "Former goalkeeper Nicky Weaver");
  EXPECT_FALSE(mismatch.load());
  EXPECT_EQ(next.load(), exchanges.size());
  EXPECT_EQ(r.trace.counters.generator_calls, 5u);
  EXPECT_EQ(r.trace.counters.scorer_calls, 7u);
}

TEST(Timeouts, RetriedOnceThenSucceeds) {
  LocalServer local;
  std::atomic<int> hits{0};
  local.server.Get("/v1/info", [&](const httplib::Request&, httplib::Response& res) {
    if (hits.fetch_add(1) == 0) std::this_thread::sleep_for(std::chrono::milliseconds(900));
    res.set_content(R"({"name":"slow","n_params_nonembed":5,"n_layer":1,"d_model":1,"tokenizer_id":"t"})",
                    "application/json");
  });
  local.start();
  HttpGenerator gen(local.url(), fast_timeout());
  EXPECT_EQ(gen.info().name, "slow");
  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(gen.requests(), 2u);
}

TEST(Timeouts, SecondTimeoutFails) {
  LocalServer local;
  std::atomic<int> hits{0};
  local.server.Post("/v1/entail", [&](const httplib::Request&, httplib::Response& res) {
    hits.fetch_add(1);
    std::this_thread::sleep_for(std::chrono::milliseconds(900));
    res.set_content(R"({"probs":[1.0]})", "application/json");
  });
  local.start();
  HttpScorer scorer(local.url(), fast_timeout());
  const auto code = error_code_of([&] { score_prefix(scorer, "p", "h"); });
  EXPECT_EQ(code, ErrorCode::Timeout);
  EXPECT_EQ(category_of(code), ErrorCategory::Backend);
  EXPECT_EQ(hits.load(), 2);
}

TEST(ResponseValidation, MalformedAndOutOfRange) {
  LocalServer local;
  local.server.Get("/v1/info", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"name":"x","n_layer":1,"d_model":1,"tokenizer_id":"t"})", "application/json");
  });
  local.server.Post("/v1/generate/candidates", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"candidates":[{"token_id":1,"text":"a","logit":1.0}]})", "application/json");
  });
  local.server.Post("/v1/entail", [](const httplib::Request& req, httplib::Response& res) {
    const auto n = nlohmann::json::parse(req.body).at("pairs").size();
    res.set_content(n == 1 ? R"({"probs":[1.5]})" : R"({"probs":[0.5]})", "application/json");
  });
  local.start();
  HttpGenerator gen(local.url());
  HttpScorer scorer(local.url());
  EXPECT_EQ(error_code_of([&] { gen.info(); }), ErrorCode::MalformedResponse);
  EXPECT_EQ(error_code_of([&] { next_candidates(gen, {"c", ""}, {}, 5); }), ErrorCode::MalformedResponse);
  EXPECT_EQ(error_code_of([&] { score_prefix(scorer, "p", "h"); }), ErrorCode::OutOfRange);
  std::vector<ScoringPair> two{{"p", "a"}, {"p", "b"}};
  EXPECT_EQ(error_code_of([&] { score_prefixes(scorer, two); }), ErrorCode::MalformedResponse);
}

TEST(Transport, UnreachableEndpoint) {
  int port = 0;
  {
    LocalServer probe;
    port = std::stoi(probe.url().substr(probe.url().rfind(':') + 1));
  }
  HttpGenerator gen("http://127.0.0.1:" + std::to_string(port), fast_timeout());
  EXPECT_EQ(category_of(error_code_of([&] { gen.info(); })), ErrorCategory::Backend);
}

}  // namespace
}  // namespace prefixnli
