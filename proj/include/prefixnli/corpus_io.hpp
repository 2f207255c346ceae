#pragma once

// Line-delimited JSON corpus format and ingestion adapters.
//
// Corpus file: a header line
//   {"schema_version":1,"tokenizer_id":...,"detok_rule":...,"seed":...}
// followed by optional premise lines {"premise":{"id":...,"text":...}} and
// one line per instance
//   {"premise_id","sentence_id","tokens","t","origin_sentence_len","label","relative_position"}.

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefixnli/core_types.hpp"
#include "prefixnli/io.hpp"
#include "prefixnli/prefix_dataset.hpp"
#include "prefixnli/text.hpp"

namespace prefixnli {

constexpr int kCorpusSchemaVersion = 1;

struct CorpusHeader {
  int schema_version = kCorpusSchemaVersion;
  std::string tokenizer_id = "whitespace";
  DetokRule detok_rule = DetokRule::Whitespace;
  std::uint64_t seed = kDefaultBalanceSeed;

  bool operator==(const CorpusHeader&) const = default;
};

struct Corpus {
  CorpusHeader header;
  std::vector<Premise> premises;
  std::vector<PrefixInstance> instances;

  const Premise* find_premise(const std::string& id) const {
    for (const auto& p : premises)
      if (p.id == id) return &p;
    return nullptr;
  }

  bool operator==(const Corpus&) const = default;
};

namespace detail {

using nlohmann::json;

inline json parse_line(const std::string& line, const std::string& where, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, where + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(parse_line(line, path.string(), lineno), lineno);
  }
}

inline TokenList tokens_from(const json& j) {
  if (j.is_string()) return whitespace_tokenize(j.get<std::string>());
  if (j.is_array()) return j.get<TokenList>();
  throw Error(ErrorCode::ParseError, "expected a token array or a string");
}

template <typename T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const CorpusHeader& h) {
  return {{"schema_version", h.schema_version},
          {"tokenizer_id", h.tokenizer_id},
          {"detok_rule", std::string(to_string(h.detok_rule))},
          {"seed", h.seed}};
}

inline nlohmann::json to_json(const PrefixInstance& inst) {
  return {{"premise_id", inst.premise_id},
          {"sentence_id", inst.prefix.sentence_id},
          {"tokens", inst.prefix.tokens},
          {"t", inst.prefix.t()},
          {"origin_sentence_len", inst.prefix.origin_sentence_len},
          {"label", std::string(to_string(inst.label))},
          {"relative_position", inst.relative_position()}};
}

inline PrefixInstance instance_from_json(const nlohmann::json& j) {
  using detail::field;
  PrefixInstance inst;
  inst.premise_id = field<std::string>(j, "premise_id");
  inst.prefix.sentence_id = field<std::string>(j, "sentence_id");
  inst.prefix.tokens = field<TokenList>(j, "tokens");
  inst.prefix.origin_sentence_len = field<std::size_t>(j, "origin_sentence_len");
  inst.label = parse_label(field<std::string>(j, "label"));
  const auto t = field<std::size_t>(j, "t");
  if (t == 0 || t != inst.prefix.t()) {
    throw Error(ErrorCode::ParseError, "t=" + std::to_string(t) + " disagrees with " +
                                           std::to_string(inst.prefix.t()) + " tokens");
  }
  if (t > inst.prefix.origin_sentence_len) {
    throw Error(ErrorCode::ParseError, "t exceeds origin_sentence_len");
  }
  const auto rel = field<double>(j, "relative_position");
  if (std::abs(rel - inst.relative_position()) > 1e-12) {
    throw Error(ErrorCode::ParseError, "relative_position disagrees with t/origin_sentence_len");
  }
  return inst;
}

inline std::string serialize_corpus(const Corpus& corpus) {
  std::string out = to_json(corpus.header).dump() + "\n";
  for (const auto& p : corpus.premises) {
    out += nlohmann::json{{"premise", {{"id", p.id}, {"text", p.text}}}}.dump() + "\n";
  }
  for (const auto& inst : corpus.instances) out += to_json(inst).dump() + "\n";
  return out;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_corpus(corpus));
}

inline Corpus read_corpus(const std::filesystem::path& path) {
  using detail::field;
  Corpus corpus;
  bool have_header = false;
  detail::for_each_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    try {
      if (!have_header) {
        const auto version = field<int>(j, "schema_version");
        if (version != kCorpusSchemaVersion) {
          throw Error(ErrorCode::SchemaMismatch, "schema_version " + std::to_string(version) +
                                                     ", expected " +
                                                     std::to_string(kCorpusSchemaVersion));
        }
        corpus.header.schema_version = version;
        corpus.header.tokenizer_id = field<std::string>(j, "tokenizer_id");
        corpus.header.detok_rule = parse_detok_rule(field<std::string>(j, "detok_rule"));
        corpus.header.seed = field<std::uint64_t>(j, "seed");
        have_header = true;
        return;
      }
      if (j.contains("premise")) {
        const auto& p = j.at("premise");
        corpus.premises.push_back({field<std::string>(p, "id"), field<std::string>(p, "text")});
        return;
      }
      corpus.instances.push_back(instance_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  });
  if (!have_header) throw Error(ErrorCode::SchemaMismatch, path.string() + ": missing header line");
  return corpus;
}

/// Span-annotated input: one JSON object per line,
///   {"premise_id"?, "premise", "sentences": [[tok...] | "text"], "spans": [null | [s, e] | {"start","end"}]}
inline std::vector<AnnotatedExample> read_annotated_file(const std::filesystem::path& path) {
  using detail::field;
  std::vector<AnnotatedExample> out;
  detail::for_each_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
    try {
      AnnotatedExample ex;
      ex.premise.text = field<std::string>(j, "premise");
      ex.premise.id = j.contains("premise_id") ? field<std::string>(j, "premise_id")
                                               : "doc" + std::to_string(lineno);
      for (const auto& s : field<nlohmann::json>(j, "sentences"))
        ex.hypothesis_sentences.push_back(detail::tokens_from(s));
      const auto spans = j.contains("spans") ? j.at("spans") : nlohmann::json::array();
      for (const auto& s : spans) {
        if (s.is_null()) {
          ex.spans.emplace_back(std::nullopt);
        } else if (s.is_array() && s.size() == 2) {
          ex.spans.push_back(HallucinationSpan{s[0].get<std::size_t>(), s[1].get<std::size_t>()});
        } else if (s.is_object()) {
          ex.spans.push_back(HallucinationSpan{field<std::size_t>(s, "start"), field<std::size_t>(s, "end")});
        } else {
          throw Error(ErrorCode::ParseError, "span must be null, [start, end] or {start, end}");
        }
      }
      if (spans.empty()) ex.spans.assign(ex.hypothesis_sentences.size(), std::nullopt);
      out.push_back(std::move(ex));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

struct EditPairIngest {
  std::vector<EditPair> pairs;
  /// Ids of pairs carrying more than one edit; these are not ingested.
  std::vector<std::string> rejected_multi_edit;
};

/// Edit-pair input: one JSON object per line,
///   {"id"?, "premise_id"?, "premise", "seed", "modified", "verdict", "edit_count"?}
/// where seed/modified are token arrays or whitespace-tokenized strings.
inline EditPairIngest read_edit_pairs_file(const std::filesystem::path& path) {
  using detail::field;
  EditPairIngest out;
  detail::for_each_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
    try {
      EditPair pair;
      pair.pair_id = j.contains("id") ? field<std::string>(j, "id") : "pair" + std::to_string(lineno);
      pair.premise.text = field<std::string>(j, "premise");
      pair.premise.id = j.contains("premise_id") ? field<std::string>(j, "premise_id") : pair.pair_id;
      pair.seed_tokens = detail::tokens_from(field<nlohmann::json>(j, "seed"));
      pair.modified_tokens = detail::tokens_from(field<nlohmann::json>(j, "modified"));
      pair.consistency_verdict = parse_label(field<std::string>(j, "verdict"));
      if (pair.seed_tokens.empty() || pair.modified_tokens.empty()) {
        throw Error(ErrorCode::EmptyInput, "seed and modified summaries must be non-empty");
      }
      if (j.contains("edit_count") && field<int>(j, "edit_count") > 1) {
        out.rejected_multi_edit.push_back(pair.pair_id);
        return;
      }
      out.pairs.push_back(std::move(pair));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace prefixnli
