#pragma once

// Serves in-process backends over the wire protocol. Used to run the remote
// clients against mock tables, and by the CLI's `serve-mock` subcommand.

#include <string>

#include "httplib.h"
#include "json.hpp"
#include "prefixnli/http_backends.hpp"
#include "prefixnli/inference_gateway.hpp"

namespace prefixnli {

namespace detail {

inline nlohmann::json info_json(const BackendInfo& info) {
  return {{"name", info.name},
          {"n_params_nonembed", info.shape.n_params_nonembed},
          {"n_layer", info.shape.n_layer},
          {"d_model", info.shape.d_model},
          {"tokenizer_id", info.tokenizer_id}};
}

inline void reply_error(httplib::Response& res, int status, const std::string& category, const std::string& msg) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", category}, {"message", msg}}.dump(), "application/json");
}

}  // namespace detail

/// Mounts /v1/info, /v1/generate/candidates and /v1/entail. Either backend may
/// be null; /v1/info reports the generator when present, else the scorer.
inline void mount_protocol(httplib::Server& server, const Generator* gen, const Scorer* scorer) {
  server.Get("/v1/info", [gen, scorer](const httplib::Request&, httplib::Response& res) {
    const auto info = gen ? gen->info() : scorer->info();
    res.set_content(detail::info_json(info).dump(), "application/json");
  });

  if (gen != nullptr) {
    server.Post("/v1/generate/candidates", [gen](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto j = nlohmann::json::parse(req.body);
        GenerationContext ctx{j.at("context_id").get<std::string>(), j.value("prompt_text", std::string())};
        const auto prefix = j.at("prefix_token_ids").get<std::vector<TokenId>>();
        const auto top_n = j.at("top_n").get<std::size_t>();
        const auto list = next_candidates(*gen, ctx, prefix, top_n);
        nlohmann::json out{{"eos_token_id", list.eos_token_id}, {"candidates", nlohmann::json::array()}};
        for (const auto& c : list.candidates) {
          out["candidates"].push_back(
              {{"token_id", c.token_id}, {"text", c.text}, {"logit", detail::logit_to_json(c.logit)}});
        }
        res.set_content(out.dump(), "application/json");
      } catch (const nlohmann::json::exception& e) {
        detail::reply_error(res, 400, "malformed", e.what());
      } catch (const Error& e) {
        detail::reply_error(res, e.code() == ErrorCode::UnknownPrefix ? 400 : 500,
                            std::string(to_string(e.code())), e.what());
      }
    });
  }

  if (scorer != nullptr) {
    server.Post("/v1/entail", [scorer](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto j = nlohmann::json::parse(req.body);
        std::vector<ScoringPair> pairs;
        for (const auto& p : j.at("pairs")) {
          pairs.push_back({p.at("premise").get<std::string>(), p.at("hypothesis").get<std::string>()});
        }
        res.set_content(nlohmann::json{{"probs", scorer->score_batch(pairs)}}.dump(), "application/json");
      } catch (const nlohmann::json::exception& e) {
        detail::reply_error(res, 400, "malformed", e.what());
      } catch (const Error& e) {
        detail::reply_error(res, 500, std::string(to_string(e.code())), e.what());
      }
    });
  }
}

}  // namespace prefixnli
