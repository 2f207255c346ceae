#pragma once

// Remote generator and scorer speaking the versioned JSON-over-HTTP protocol:
//
//   GET  /v1/info                 -> {name, n_params_nonembed, n_layer, d_model, tokenizer_id}
//   POST /v1/generate/candidates  {context_id, prompt_text?, prefix_token_ids, top_n}
//                                 -> {candidates: [{token_id, text, logit}], eos_token_id}
//   POST /v1/entail               {pairs: [{premise, hypothesis}]} -> {probs: [...]}
//
// The full prefix is sent on every call; servers are free to cache shared
// prefixes. A timed-out request is retried once, then fails.

#include <atomic>
#include <chrono>
#include <future>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "prefixnli/inference_gateway.hpp"

namespace prefixnli {

struct HttpOptions {
  std::chrono::milliseconds timeout{30000};
  /// Attempts after the first one when a request times out.
  int timeout_retries = 1;
};

namespace detail {

inline nlohmann::json logit_to_json(const Logit& l) {
  if (l.is_masked()) return "-inf";
  return l.value();
}

inline Logit logit_from_json(const nlohmann::json& j) {
  if (j.is_string() && j.get<std::string>() == "-inf") return Logit::masked();
  if (!j.is_number()) throw Error(ErrorCode::MalformedResponse, "logit must be a number or \"-inf\"");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::MalformedResponse, "non-finite logit");
  return Logit(v);
}

inline bool is_timeout(httplib::Error e) {
  return e == httplib::Error::Read || e == httplib::Error::Write || e == httplib::Error::ConnectionTimeout;
}

class HttpEndpoint {
 public:
  HttpEndpoint(std::string base_url, HttpOptions options)
      : base_url_(std::move(base_url)), options_(options) {}

  nlohmann::json get(const std::string& path) const {
    return request(path, [&](httplib::Client& cli) { return cli.Get(path); });
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
    const std::string payload = body.dump();
    return request(path, [&](httplib::Client& cli) { return cli.Post(path, payload, "application/json"); });
  }

  const std::string& base_url() const noexcept { return base_url_; }
  std::size_t requests() const noexcept { return requests_.load(); }

 private:
  template <typename Send>
  nlohmann::json request(const std::string& path, Send&& send) const {
    for (int attempt = 0;; ++attempt) {
      // httplib::Client is not safe for concurrent use; one per request.
      httplib::Client cli(base_url_);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
      cli.set_connection_timeout(secs.count(), usecs.count());
      cli.set_read_timeout(secs.count(), usecs.count());
      cli.set_write_timeout(secs.count(), usecs.count());
      requests_.fetch_add(1, std::memory_order_relaxed);
      auto res = send(cli);
      if (!res) {
        const auto err = res.error();
        if (is_timeout(err)) {
          if (attempt < options_.timeout_retries) continue;
          throw Error(ErrorCode::Timeout, base_url_ + path + ": " + httplib::to_string(err));
        }
        throw Error(ErrorCode::Transport, base_url_ + path + ": " + httplib::to_string(err));
      }
      if (res->status != 200) {
        throw Error(ErrorCode::Transport,
                    base_url_ + path + ": HTTP " + std::to_string(res->status) + " " + res->body);
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, base_url_ + path + ": " + e.what());
      }
    }
  }

  std::string base_url_;
  HttpOptions options_;
  mutable std::atomic<std::size_t> requests_{0};
};

inline BackendInfo parse_info(const nlohmann::json& j) {
  try {
    BackendInfo info;
    info.name = j.at("name").get<std::string>();
    info.shape.n_params_nonembed = j.at("n_params_nonembed").get<std::uint64_t>();
    info.shape.n_layer = j.at("n_layer").get<std::uint64_t>();
    info.shape.d_model = j.at("d_model").get<std::uint64_t>();
    info.tokenizer_id = j.at("tokenizer_id").get<std::string>();
    if (!info.shape.valid()) throw Error(ErrorCode::MalformedResponse, "model shape fields must be positive");
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("/v1/info: ") + e.what());
  }
}

}  // namespace detail

inline nlohmann::json candidates_request(const GenerationContext& ctx, std::span<const TokenId> prefix,
                                         std::size_t top_n) {
  nlohmann::json body{{"context_id", ctx.context_id},
                      {"prefix_token_ids", std::vector<TokenId>(prefix.begin(), prefix.end())},
                      {"top_n", top_n}};
  if (!ctx.prompt_text.empty()) body["prompt_text"] = ctx.prompt_text;
  return body;
}

inline CandidateList parse_candidates(const nlohmann::json& j) {
  try {
    CandidateList out;
    out.eos_token_id = j.at("eos_token_id").get<TokenId>();
    for (const auto& c : j.at("candidates")) {
      out.candidates.push_back({c.at("token_id").get<TokenId>(), c.at("text").get<std::string>(),
                                detail::logit_from_json(c.at("logit")), std::nullopt});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("/v1/generate/candidates: ") + e.what());
  }
}

class HttpGenerator final : public Generator {
 public:
  explicit HttpGenerator(std::string base_url, HttpOptions options = {}, DetokRule detok = DetokRule::Concat)
      : endpoint_(std::move(base_url), options), detok_(detok) {}

  CandidateList candidates(const GenerationContext& ctx, std::span<const TokenId> prefix,
                           std::size_t top_n) const override {
    return parse_candidates(endpoint_.post("/v1/generate/candidates", candidates_request(ctx, prefix, top_n)));
  }

  BackendInfo info() const override { return detail::parse_info(endpoint_.get("/v1/info")); }
  DetokRule detok_rule() const override { return detok_; }
  std::size_t requests() const noexcept { return endpoint_.requests(); }

 private:
  detail::HttpEndpoint endpoint_;
  DetokRule detok_;
};

class HttpScorer final : public Scorer {
 public:
  /// `batch_size` bounds the pairs per /v1/entail request; larger batches are
  /// split and the chunks sent concurrently.
  explicit HttpScorer(std::string base_url, HttpOptions options = {}, std::size_t batch_size = 60)
      : endpoint_(std::move(base_url), options), batch_size_(batch_size == 0 ? 1 : batch_size) {}

  std::vector<double> score_batch(std::span<const ScoringPair> pairs) const override {
    std::vector<std::future<std::vector<double>>> chunks;
    for (std::size_t off = 0; off < pairs.size(); off += batch_size_) {
      auto chunk = pairs.subspan(off, std::min(batch_size_, pairs.size() - off));
      chunks.push_back(std::async(std::launch::async, [this, chunk] { return post_chunk(chunk); }));
    }
    std::vector<double> out;
    out.reserve(pairs.size());
    for (auto& f : chunks) {
      auto probs = f.get();
      out.insert(out.end(), probs.begin(), probs.end());
    }
    return out;
  }

  BackendInfo info() const override { return detail::parse_info(endpoint_.get("/v1/info")); }
  std::size_t requests() const noexcept { return endpoint_.requests(); }

 private:
  std::vector<double> post_chunk(std::span<const ScoringPair> chunk) const {
    nlohmann::json body{{"pairs", nlohmann::json::array()}};
    for (const auto& p : chunk) body["pairs"].push_back({{"premise", p.premise}, {"hypothesis", p.hypothesis}});
    const auto j = endpoint_.post("/v1/entail", body);
    std::vector<double> probs;
    try {
      probs = j.at("probs").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedResponse, std::string("/v1/entail: ") + e.what());
    }
    if (probs.size() != chunk.size()) {
      throw Error(ErrorCode::MalformedResponse, "/v1/entail returned " + std::to_string(probs.size()) +
                                                    " probabilities for " + std::to_string(chunk.size()) + " pairs");
    }
    for (double p : probs) checked_probability(p);
    return probs;
  }

  detail::HttpEndpoint endpoint_;
  std::size_t batch_size_;
};

}  // namespace prefixnli
