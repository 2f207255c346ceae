#pragma once

// Mock fixtures: a generator table, a scorer rule and the documents to
// decode, loaded from one JSON file.
//
// {
//   "generator": {"name", "shape": {...}, "tokenizer_id", "detok", "eos_token_id", "eos_text"?,
//                 "vocab"?: {"<id>": "<text>"},
//                 "table": [{"context_id", "prefix": [ids], "candidates": [{"token_id", "text"?, "logit"}]}]},
//   "scorer":    {"kind": "oracle" | "constant" | "table" | "lexical", "name"?, "shape"?, ...},
//   "documents": [{"id", "premise", "context_id", "prompt"?, "reference"?}]
// }

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefixnli/io.hpp"
#include "prefixnli/mock_backends.hpp"

namespace prefixnli {

struct DecodeDocument {
  std::string id;
  std::string premise;
  GenerationContext context;
  std::string reference;
};

struct Fixture {
  std::shared_ptr<MockGenerator> generator;
  std::shared_ptr<CountingScorer> scorer;
  std::vector<DecodeDocument> documents;

  const DecodeDocument& document(const std::string& id) const {
    for (const auto& d : documents)
      if (d.id == id) return d;
    throw Error(ErrorCode::InvalidArgument, "fixture has no document '" + id + "'");
  }
};

namespace detail {

inline ModelShape shape_from_json(const nlohmann::json& j) {
  ModelShape s{j.at("n_params_nonembed").get<std::uint64_t>(), j.at("n_layer").get<std::uint64_t>(),
               j.at("d_model").get<std::uint64_t>()};
  if (!s.valid()) throw Error(ErrorCode::ParseError, "model shape fields must be positive");
  return s;
}

inline BackendInfo backend_info_from_json(const nlohmann::json& j, const std::string& default_name) {
  BackendInfo info;
  info.name = j.value("name", default_name);
  info.shape = j.contains("shape") ? shape_from_json(j.at("shape")) : ModelShape{1, 1, 1};
  info.tokenizer_id = j.value("tokenizer_id", std::string("text"));
  return info;
}

inline std::shared_ptr<MockGenerator> generator_from_json(const nlohmann::json& g) {
  const auto detok = parse_detok_rule(g.value("detok", std::string("whitespace")));
  auto gen = std::make_shared<MockGenerator>(backend_info_from_json(g, "mock-generator"),
                                             g.at("eos_token_id").get<TokenId>(),
                                             g.value("eos_text", std::string()), detok);
  std::map<TokenId, std::string> vocab;
  if (g.contains("vocab")) {
    for (const auto& [k, v] : g.at("vocab").items()) vocab[std::stoll(k)] = v.get<std::string>();
  }
  for (const auto& entry : g.at("table")) {
    std::vector<TokenCandidate> cands;
    for (const auto& c : entry.at("candidates")) {
      const auto id = c.at("token_id").get<TokenId>();
      std::string text;
      if (c.contains("text")) {
        text = c.at("text").get<std::string>();
      } else if (auto it = vocab.find(id); it != vocab.end()) {
        text = it->second;
      } else {
        throw Error(ErrorCode::ParseError, "candidate " + std::to_string(id) + " has no text and no vocab entry");
      }
      cands.push_back({id, std::move(text), Logit(c.at("logit").get<double>()), std::nullopt});
    }
    gen->add(entry.at("context_id").get<std::string>(), entry.at("prefix").get<std::vector<TokenId>>(),
             std::move(cands));
  }
  return gen;
}

inline std::shared_ptr<CountingScorer> scorer_from_json(const nlohmann::json& s) {
  const auto kind = s.at("kind").get<std::string>();
  const auto info = backend_info_from_json(s, kind);
  if (kind == "constant") return std::make_shared<ConstantScorer>(s.at("p").get<double>(), info);
  if (kind == "lexical") return std::make_shared<LexicalOverlapScorer>(info);
  if (kind == "table") {
    auto t = std::make_shared<TableScorer>(s.value("default", 1.0), info);
    for (const auto& e : s.at("entries")) {
      t->set(e.value("premise", std::string("*")), e.at("hypothesis").get<std::string>(), e.at("p").get<double>());
    }
    return t;
  }
  if (kind == "oracle") {
    auto o = std::make_shared<OracleScorer>(s.value("floor", 0.0), s.value("ceiling", 1.0), info);
    const auto detok = parse_detok_rule(s.value("detok", std::string("whitespace")));
    for (const auto& e : s.at("sentences")) {
      const auto& tj = e.at("tokens");
      TokenList tokens = tj.is_string() ? whitespace_tokenize(tj.get<std::string>()) : tj.get<TokenList>();
      const auto span = e.at("span");
      o->add_sentence(e.value("premise", std::string("*")), tokens,
                      HallucinationSpan{span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>()}, detok);
    }
    return o;
  }
  throw Error(ErrorCode::ParseError, "unknown scorer kind '" + kind + "'");
}

}  // namespace detail

inline Fixture fixture_from_json(const nlohmann::json& j) {
  try {
    Fixture f;
    f.generator = detail::generator_from_json(j.at("generator"));
    if (j.contains("scorer")) f.scorer = detail::scorer_from_json(j.at("scorer"));
    if (j.contains("documents")) {
      for (const auto& d : j.at("documents")) {
        DecodeDocument doc;
        doc.id = d.at("id").get<std::string>();
        doc.premise = d.at("premise").get<std::string>();
        doc.context.context_id = d.value("context_id", doc.id);
        doc.context.prompt_text = d.value("prompt", std::string());
        doc.reference = d.value("reference", std::string());
        f.documents.push_back(std::move(doc));
      }
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("fixture: ") + e.what());
  }
}

inline Fixture load_fixture(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  try {
    return fixture_from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace prefixnli
