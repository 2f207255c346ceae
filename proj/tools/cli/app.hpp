#pragma once

// Command-line front end. `run` parses argv, dispatches one subcommand and
// maps library errors to exit codes: 2 usage, 3 data, 4 backend.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "prefixnli/prefixnli.hpp"

namespace prefixnli::cli {

using nlohmann::json;

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Backend: return 4;
  }
  return 1;
}

inline std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

inline void emit(std::ostream& out, const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    out << contents;
  } else {
    io::write_file_atomic(path, contents);
  }
}

template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Decoding configuration: flag > config file > built-in default.
struct DecodeFlags {
  std::string config_path;
  std::optional<std::string> mode;
  std::optional<double> lambda;
  std::optional<double> tau;
  std::optional<std::size_t> beam_width;
  std::optional<double> nucleus_mass;
  std::optional<std::size_t> candidate_cap;
  std::optional<std::size_t> max_new_tokens;
  std::optional<std::size_t> top_n;
  bool punctuation_only = false;
};

inline void add_decode_flags(CLI::App* cmd, DecodeFlags& f, bool with_mode) {
  cmd->add_option("--config", f.config_path, "JSON file with decoding settings (flags take precedence)");
  if (with_mode) cmd->add_option("--mode", f.mode, "vanilla | prefix | lookahead (default prefix)");
  cmd->add_option("--lambda", f.lambda, "Penalty scale (default 5)");
  cmd->add_option("--tau", f.tau, "Rectification threshold in (0, 1) (default 0.5)");
  cmd->add_option("-k,--beam-width", f.beam_width, "Beam width (default 3)");
  cmd->add_option("-p,--nucleus-mass", f.nucleus_mass, "Nucleus mass in (0, 1] (default 0.9)");
  cmd->add_option("--candidate-cap", f.candidate_cap, "Candidates kept per beam (default 20)");
  cmd->add_option("--max-new-tokens", f.max_new_tokens, "Token budget (default 128)");
  cmd->add_option("--top-n", f.top_n, "Candidates requested from the generator (default 50)");
  cmd->add_flag("--punctuation-only", f.punctuation_only, "Score only candidates that close a clause");
}

inline DecodingConfig apply_config_json(DecodingConfig c, const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "beam_width") c.beam_width = v.get<std::size_t>();
      else if (key == "nucleus_mass") c.nucleus_mass = v.get<double>();
      else if (key == "candidate_cap") c.candidate_cap = v.get<std::size_t>();
      else if (key == "max_new_tokens") c.max_new_tokens = v.get<std::size_t>();
      else if (key == "top_n") c.top_n = v.get<std::size_t>();
      else if (key == "mode") c.mode = parse_mode(v.get<std::string>());
      else if (key == "score_only_at_punctuation") c.score_only_at_punctuation = v.get<bool>();
      else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  return c;
}

inline DecodingConfig resolve_config(const DecodeFlags& f) {
  DecodingConfig c;
  if (!f.config_path.empty()) {
    json j;
    try {
      j = json::parse(io::read_file(f.config_path));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, f.config_path + ": " + e.what());
    }
    c = apply_config_json(c, j);
  }
  if (f.mode) c.mode = parse_mode(*f.mode);
  if (f.lambda) c.lambda = *f.lambda;
  if (f.tau) c.tau = *f.tau;
  if (f.beam_width) c.beam_width = *f.beam_width;
  if (f.nucleus_mass) c.nucleus_mass = *f.nucleus_mass;
  if (f.candidate_cap) c.candidate_cap = *f.candidate_cap;
  if (f.max_new_tokens) c.max_new_tokens = *f.max_new_tokens;
  if (f.top_n) c.top_n = *f.top_n;
  if (f.punctuation_only) c.score_only_at_punctuation = true;
  c.validate();
  return c;
}

// Backends: a mock fixture, remote endpoints, or a fixture with some parts
// replaced by endpoints.
struct BackendFlags {
  std::string fixture;
  std::string generator_url;
  std::string scorer_url;
  std::optional<long> timeout_ms;
  std::string detok = "concat";
  std::size_t scorer_batch = 60;
};

inline void add_backend_flags(CLI::App* cmd, BackendFlags& f, bool generator, bool scorer) {
  cmd->add_option("--fixture", f.fixture, "Mock fixture file (generator table, scorer rule, documents)");
  if (generator) {
    cmd->add_option("--generator-url", f.generator_url, "Generator endpoint [env PREFIXNLI_GENERATOR_URL]");
    cmd->add_option("--detok", f.detok, "Detokenization of a remote generator: concat | whitespace");
  }
  if (scorer) {
    cmd->add_option("--scorer-url", f.scorer_url, "Scorer endpoint [env PREFIXNLI_SCORER_URL]");
    cmd->add_option("--scorer-batch", f.scorer_batch, "Pairs per scoring request (default 60)");
  }
  cmd->add_option("--timeout-ms", f.timeout_ms, "Request timeout [env PREFIXNLI_TIMEOUT_MS, default 30000]");
}

struct Backends {
  std::optional<Fixture> fixture;
  std::shared_ptr<const Generator> generator;
  std::shared_ptr<const Scorer> scorer;
};

inline Backends open_backends(const BackendFlags& f) {
  Backends b;
  if (!f.fixture.empty()) {
    b.fixture = load_fixture(f.fixture);
    b.generator = b.fixture->generator;
    b.scorer = b.fixture->scorer;
  }
  HttpOptions http;
  long ms = 30000;
  if (f.timeout_ms) {
    ms = *f.timeout_ms;
  } else if (const auto env = env_or("PREFIXNLI_TIMEOUT_MS", ""); !env.empty()) {
    try {
      ms = std::stol(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "PREFIXNLI_TIMEOUT_MS must be an integer");
    }
  }
  if (ms <= 0) throw Error(ErrorCode::InvalidArgument, "timeout must be positive");
  http.timeout = std::chrono::milliseconds(ms);

  const auto gen_url = f.generator_url.empty() && f.fixture.empty() ? env_or("PREFIXNLI_GENERATOR_URL", "")
                                                                     : f.generator_url;
  const auto scorer_url = f.scorer_url.empty() && f.fixture.empty() ? env_or("PREFIXNLI_SCORER_URL", "")
                                                                     : f.scorer_url;
  if (!gen_url.empty()) b.generator = std::make_shared<HttpGenerator>(gen_url, http, parse_detok_rule(f.detok));
  if (!scorer_url.empty()) b.scorer = std::make_shared<HttpScorer>(scorer_url, http, f.scorer_batch);
  return b;
}

inline const Scorer& require_scorer(const Backends& b) {
  if (!b.scorer) throw Error(ErrorCode::InvalidArgument, "no scorer: give --fixture or --scorer-url");
  return *b.scorer;
}

inline const Generator& require_generator(const Backends& b) {
  if (!b.generator) throw Error(ErrorCode::InvalidArgument, "no generator: give --fixture or --generator-url");
  return *b.generator;
}

// ---------------------------------------------------------------- build-dataset

struct BuildDatasetArgs {
  std::string from_edits;
  std::string from_annotated;
  std::string out;
  std::string report;
  std::uint64_t seed = kDefaultBalanceSeed;
  bool no_balance = false;
  std::string tokenizer_id = "whitespace";
  std::string detok = "whitespace";
};

inline int build_dataset(const BuildDatasetArgs& a, std::ostream& out) {
  if (a.from_edits.empty() == a.from_annotated.empty()) {
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --from-edits or --from-annotated");
  }
  Corpus corpus;
  corpus.header.tokenizer_id = a.tokenizer_id;
  corpus.header.detok_rule = parse_detok_rule(a.detok);
  corpus.header.seed = a.seed;

  std::vector<PrefixInstance> built;
  std::map<std::string, std::string> premises;
  auto add_premise = [&](const Premise& p) {
    auto [it, inserted] = premises.emplace(p.id, p.text);
    if (!inserted && it->second != p.text) {
      throw Error(ErrorCode::ParseError, "premise id '" + p.id + "' is used for two different texts");
    }
    if (inserted) corpus.premises.push_back(p);
  };

  json report{{"source", a.from_edits.empty() ? "annotated" : "edits"}, {"seed", a.seed}};
  if (!a.from_edits.empty()) {
    const auto ingest = read_edit_pairs_file(a.from_edits);
    report["inputs"] = ingest.pairs.size() + ingest.rejected_multi_edit.size();
    report["rejected_multi_edit"] = ingest.rejected_multi_edit;
    for (const auto& pair : ingest.pairs) {
      add_premise(pair.premise);
      auto inst = instances_from_edit_pair(pair);
      built.insert(built.end(), inst.begin(), inst.end());
    }
  } else {
    const auto examples = read_annotated_file(a.from_annotated);
    report["inputs"] = examples.size();
    for (const auto& ex : examples) {
      add_premise(ex.premise);
      auto inst = instances_from_annotated(ex);
      built.insert(built.end(), inst.begin(), inst.end());
    }
  }
  report["instances_built"] = built.size();

  if (a.no_balance) {
    corpus.instances = std::move(built);
  } else {
    auto balanced = stratify_balance(built, a.seed);
    json buckets = json::array();
    for (const auto& b : balanced.buckets) {
      buckets.push_back({{"bucket", b.bucket},
                         {"entailed_in", b.entailed_in},
                         {"not_entailed_in", b.not_entailed_in},
                         {"kept_per_label", b.kept_per_label},
                         {"dropped", b.dropped}});
    }
    report["buckets"] = std::move(buckets);
    report["dropped_buckets"] = balanced.dropped_buckets();
    corpus.instances = std::move(balanced.instances);
  }
  std::size_t entailed = 0;
  for (const auto& i : corpus.instances) entailed += i.label == EntailmentLabel::Entailed;
  report["instances_kept"] = corpus.instances.size();
  report["entailed"] = entailed;
  report["not_entailed"] = corpus.instances.size() - entailed;

  write_corpus(corpus, a.out);
  emit(out, a.report, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- eval-scorer

struct EvalScorerArgs {
  BackendFlags backends;
  std::string corpus;
  std::string out_dir;
  double threshold = 0.5;
  std::vector<double> edges = default_bin_edges();
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::size_t batch = 60;
};

inline int eval_scorer(const EvalScorerArgs& a, std::ostream& out) {
  if (!(a.threshold >= 0.0 && a.threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "--threshold must lie in [0, 1)");
  }
  validate_edges(a.edges);
  const auto backends = open_backends(a.backends);
  const Scorer& scorer = require_scorer(backends);
  const auto corpus = read_corpus(a.corpus);
  if (corpus.instances.empty()) throw Error(ErrorCode::EmptyInput, a.corpus + ": corpus has no instances");

  std::map<std::string, const Premise*> premise_by_id;
  for (const auto& p : corpus.premises) premise_by_id[p.id] = &p;
  std::vector<ScoringPair> pairs;
  for (const auto& inst : corpus.instances) {
    auto it = premise_by_id.find(inst.premise_id);
    if (it == premise_by_id.end()) {
      throw Error(ErrorCode::ParseError, a.corpus + ": no premise text for '" + inst.premise_id + "'");
    }
    pairs.push_back({it->second->text, detokenize(inst.prefix.tokens, corpus.header.detok_rule)});
  }
  std::vector<double> probs;
  const std::size_t step = std::max<std::size_t>(1, a.batch);
  for (std::size_t off = 0; off < pairs.size(); off += step) {
    auto chunk = std::span<const ScoringPair>(pairs).subspan(off, std::min(step, pairs.size() - off));
    auto p = score_prefixes(scorer, chunk);
    probs.insert(probs.end(), p.begin(), p.end());
  }

  std::vector<PredictionRecord> records;
  std::string records_jsonl;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
    const auto& inst = corpus.instances[i];
    const auto predicted = probs[i] > a.threshold ? EntailmentLabel::Entailed : EntailmentLabel::NotEntailed;
    records.push_back({i, predicted, inst.label, inst.relative_position()});
    records_jsonl += json{{"index", i},
                          {"premise_id", inst.premise_id},
                          {"sentence_id", inst.prefix.sentence_id},
                          {"t", inst.prefix.t()},
                          {"relative_position", inst.relative_position()},
                          {"gold", std::string(to_string(inst.label))},
                          {"prob", probs[i]},
                          {"predicted", std::string(to_string(predicted))}}
                         .dump() +
                     "\n";
  }

  const auto unfaithful = micro_f1(records, EntailmentLabel::NotEntailed);
  const auto faithful = micro_f1(records, EntailmentLabel::Entailed);
  const auto bins = bin_with_ci(records, a.edges, EntailmentLabel::NotEntailed, {a.resamples, a.level, a.seed});
  json metrics{{"n", records.size()},
               {"threshold", a.threshold},
               {"unfaithful_f1", to_json(unfaithful)},
               {"faithful_f1", to_json(faithful)},
               {"bootstrap", {{"resamples", a.resamples}, {"level", a.level}, {"seed", a.seed}}},
               {"bins", to_json(bins)}};

  if (!a.out_dir.empty()) {
    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    io::write_file_atomic(dir / "records.jsonl", records_jsonl);
    io::write_file_atomic(dir / "metrics.json", metrics.dump(2) + "\n");
    io::write_file_atomic(dir / "bins.csv", bins_csv(bins));
  }
  out << "records " << records.size() << "\n";
  out << "unfaithful_f1 " << format_number(unfaithful.value) << (unfaithful.degenerate ? " (degenerate)" : "") << "\n";
  out << "faithful_f1 " << format_number(faithful.value) << (faithful.degenerate ? " (degenerate)" : "") << "\n";
  out << bins_csv(bins);
  return 0;
}

// ---------------------------------------------------------------- decode

struct DocumentFlags {
  std::string document;
  std::string premise;
  std::string context_id;
  std::string prompt;
};

inline DecodeDocument pick_document(const Backends& b, const DocumentFlags& f) {
  if (!f.premise.empty()) {
    DecodeDocument d;
    d.id = f.context_id.empty() ? "document" : f.context_id;
    d.premise = f.premise;
    d.context = {f.context_id.empty() ? d.id : f.context_id, f.prompt};
    return d;
  }
  if (!b.fixture || b.fixture->documents.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no document: give --premise or a fixture with documents");
  }
  return f.document.empty() ? b.fixture->documents.front() : b.fixture->document(f.document);
}

struct DecodeArgs {
  BackendFlags backends;
  DecodeFlags flags;
  DocumentFlags doc;
  std::string trace;
};

inline int decode_cmd(const DecodeArgs& a, std::ostream& out) {
  const auto config = resolve_config(a.flags);
  const auto backends = open_backends(a.backends);
  const Generator& gen = require_generator(backends);
  const Scorer* scorer = config.mode == DecodingMode::Vanilla ? backends.scorer.get() : &require_scorer(backends);
  const auto doc = pick_document(backends, a.doc);
  const auto result = decode(gen, config.mode == DecodingMode::Vanilla ? nullptr : scorer, doc.premise, doc.context,
                             config);
  out << result.text << "\n";
  if (!a.trace.empty()) {
    auto j = to_json(result);
    j["document"] = doc.id;
    const auto gen_shape = gen.info().shape;
    const auto scorer_shape = scorer != nullptr ? scorer->info().shape : gen_shape;
    j["cost"] = to_json(reconcile_trace(result.trace, gen_shape, scorer_shape));
    emit(out, a.trace, j.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  BackendFlags backends;
  DecodeFlags flags;
  std::string documents;
  std::vector<std::string> modes{"vanilla", "prefix", "lookahead"};
  std::string judge_url;
  double judge_threshold = 0.5;
  std::string out;
  std::string timing_out;
  std::string details;
  std::size_t jobs = 1;
};

inline std::vector<DecodeDocument> read_documents_file(const std::string& path) {
  std::vector<DecodeDocument> docs;
  std::istringstream in(io::read_file(path));
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      DecodeDocument d;
      d.id = j.at("id").get<std::string>();
      d.premise = j.at("premise").get<std::string>();
      d.context = {j.value("context_id", d.id), j.value("prompt", std::string())};
      d.reference = j.value("reference", std::string());
      docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

struct DocumentOutcome {
  DecodeResult result;
  std::optional<double> faithfulness;
  std::optional<double> rouge_l;
};

inline int compare_cmd(const CompareArgs& a, std::ostream& out) {
  const auto base = resolve_config(a.flags);
  if (a.jobs == 0) throw Error(ErrorCode::InvalidArgument, "--jobs must be positive");
  const auto backends = open_backends(a.backends);
  const Generator& gen = require_generator(backends);
  const Scorer& scorer = require_scorer(backends);
  std::shared_ptr<const Scorer> judge_remote;
  if (!a.judge_url.empty()) judge_remote = std::make_shared<HttpScorer>(a.judge_url);
  const Scorer& judge = judge_remote ? *judge_remote : scorer;

  std::vector<DecodeDocument> docs;
  if (!a.documents.empty()) {
    docs = read_documents_file(a.documents);
  } else if (backends.fixture) {
    docs = backends.fixture->documents;
  }
  if (docs.empty()) throw Error(ErrorCode::EmptyInput, "no documents to decode");

  std::vector<DecodingMode> modes;
  for (const auto& m : a.modes) modes.push_back(parse_mode(m));

  std::string csv =
      "method,documents,faithfulness,rouge_l,empty_outputs,generator_calls,completion_generator_calls,"
      "scorer_calls,tokens_generated\n";
  std::string timing = "method,wall_time_s,tokens_per_second\n";
  std::string details;
  for (const auto mode : modes) {
    auto config = base;
    config.mode = mode;
    std::vector<DocumentOutcome> outcomes(docs.size());
    parallel_for(docs.size(), a.jobs, [&](std::size_t i) {
      const auto& d = docs[i];
      auto& o = outcomes[i];
      o.result = decode(gen, mode == DecodingMode::Vanilla ? nullptr : &scorer, d.premise, d.context, config);
      const auto sentences = split_sentences(o.result.text);
      if (!sentences.empty()) {
        std::vector<ScoringPair> pairs;
        for (const auto& s : sentences) pairs.push_back({d.premise, s});
        const auto probs = score_prefixes(judge, pairs);
        std::vector<EntailmentLabel> labels;
        for (double p : probs) {
          labels.push_back(p > a.judge_threshold ? EntailmentLabel::Entailed : EntailmentLabel::NotEntailed);
        }
        o.faithfulness = faithfulness_proportion(labels);
      }
      if (!d.reference.empty()) {
        const auto cand = whitespace_tokenize(o.result.text);
        const auto ref = whitespace_tokenize(d.reference);
        o.rouge_l = cand.empty() || ref.empty() ? 0.0 : rouge_l_f1(cand, ref);
      }
    });

    double faith_sum = 0.0, rouge_sum = 0.0, wall = 0.0;
    std::size_t faith_n = 0, rouge_n = 0, empty = 0;
    TraceCounters total;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto& o = outcomes[i];
      if (o.faithfulness) faith_sum += *o.faithfulness, ++faith_n;
      else ++empty;
      if (o.rouge_l) rouge_sum += *o.rouge_l, ++rouge_n;
      const auto& k = o.result.trace.counters;
      total.generator_calls += k.generator_calls;
      total.completion_generator_calls += k.completion_generator_calls;
      total.scorer_calls += k.scorer_calls;
      total.tokens_generated += k.tokens_generated;
      wall += o.result.trace.wall_time_s;
      json dj{{"document", docs[i].id},
              {"method", std::string(to_string(mode))},
              {"text", o.result.text},
              {"exhausted", o.result.trace.exhausted},
              {"generator_calls", k.generator_calls},
              {"scorer_calls", k.scorer_calls},
              {"tokens_generated", k.tokens_generated}};
      dj["faithfulness"] = o.faithfulness ? json(*o.faithfulness) : json(nullptr);
      dj["rouge_l"] = o.rouge_l ? json(*o.rouge_l) : json(nullptr);
      details += dj.dump() + "\n";
    }
    csv += std::string(to_string(mode)) + "," + std::to_string(docs.size()) + "," +
           (faith_n ? format_number(faith_sum / static_cast<double>(faith_n)) : "") + "," +
           (rouge_n ? format_number(rouge_sum / static_cast<double>(rouge_n)) : "") + "," + std::to_string(empty) +
           "," + std::to_string(total.generator_calls) + "," + std::to_string(total.completion_generator_calls) + "," +
           std::to_string(total.scorer_calls) + "," + std::to_string(total.tokens_generated) + "\n";
    timing += std::string(to_string(mode)) + "," + format_number(wall) + "," +
              (wall > 0.0 ? format_number(static_cast<double>(total.tokens_generated) / wall) : "") + "\n";
  }

  emit(out, a.out, csv);
  if (!a.timing_out.empty()) emit(out, a.timing_out, timing);
  if (!a.details.empty()) emit(out, a.details, details);
  return 0;
}

// ---------------------------------------------------------------- cost

struct CostArgs {
  std::vector<double> n_lm{1.23e9};
  std::vector<double> n_ent{1.23e9};
  std::vector<double> m{6.0};
  std::optional<std::uint64_t> n_ctx;
  std::uint64_t lm_layers = 0, lm_d_model = 0, ent_layers = 0, ent_d_model = 0;
  bool sweep = false;
  std::string out;
};

inline int cost_cmd(const CostArgs& a, std::ostream& out) {
  const bool sweep = a.sweep || a.n_lm.size() > 1 || a.n_ent.size() > 1 || a.m.size() > 1;
  if (sweep) {
    if (a.n_ctx) throw Error(ErrorCode::InvalidArgument, "--n-ctx applies to a single point, not a sweep");
    emit(out, a.out, sweep_csv(cost_sweep(a.n_lm, a.n_ent, a.m)));
    return 0;
  }
  CostBreakdown c;
  json j;
  if (a.n_ctx) {
    const ModelShape lm{static_cast<std::uint64_t>(a.n_lm[0]), a.lm_layers, a.lm_d_model};
    const ModelShape ent{static_cast<std::uint64_t>(a.n_ent[0]), a.ent_layers, a.ent_d_model};
    if (!lm.valid() || !ent.valid()) {
      throw Error(ErrorCode::InvalidArgument, "--n-ctx needs --lm-layers, --lm-d-model, --ent-layers, --ent-d-model");
    }
    c = per_token_cost_full(lm, ent, a.m[0], *a.n_ctx);
    j = to_json(c);
    j["formula"] = "full";
    j["n_ctx"] = *a.n_ctx;
  } else {
    c = per_token_cost(a.n_lm[0], a.n_ent[0], a.m[0]);
    j = to_json(c);
    j["formula"] = "approx";
  }
  j["n_lm"] = a.n_lm[0];
  j["n_ent"] = a.n_ent[0];
  emit(out, a.out, j.dump(2) + "\n");
  if (!a.out.empty() && a.out != "-") out << "ratio " << format_number(c.theoretical_ratio) << "\n";
  return 0;
}

// ---------------------------------------------------------------- serve-mock

struct ServeArgs {
  std::string fixture;
  std::string host = "127.0.0.1";
  int port = 8080;
};

inline int serve_cmd(const ServeArgs& a, std::ostream& out) {
  const auto fx = load_fixture(a.fixture);
  httplib::Server server;
  mount_protocol(server, fx.generator.get(), fx.scorer.get());
  const int port = a.port == 0 ? server.bind_to_any_port(a.host) : (server.bind_to_port(a.host, a.port) ? a.port : -1);
  if (port < 0) throw Error(ErrorCode::Transport, "cannot bind " + a.host + ":" + std::to_string(a.port));
  out << "listening on http://" << a.host << ":" << port << std::endl;
  server.listen_after_bind();
  return 0;
}

// ---------------------------------------------------------------- entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Prefix-level entailment: dataset construction, scorer evaluation, guided decoding and cost models",
               "prefixnli"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  BuildDatasetArgs build;
  auto* build_cmd = app.add_subcommand("build-dataset", "Build a prefix corpus from annotated spans or edit pairs");
  build_cmd->add_option("--from-edits", build.from_edits, "Edit-pair JSONL (seed, modified, verdict)");
  build_cmd->add_option("--from-annotated", build.from_annotated, "Span-annotated JSONL (sentences, spans)");
  build_cmd->add_option("-o,--out", build.out, "Corpus output file")->required();
  build_cmd->add_option("--report", build.report, "Stratification report file (default stdout)");
  build_cmd->add_option("--seed", build.seed, "Balancing seed (default 17)");
  build_cmd->add_flag("--no-balance", build.no_balance, "Keep every instance; skip stratified balancing");
  build_cmd->add_option("--tokenizer-id", build.tokenizer_id, "Tokenizer recorded in the corpus header");
  build_cmd->add_option("--detok", build.detok, "Detokenization rule: whitespace | concat");

  EvalScorerArgs eval;
  auto* eval_cmd = app.add_subcommand("eval-scorer", "Score a corpus and report F1 overall and by prefix length");
  eval_cmd->add_option("--corpus", eval.corpus, "Corpus file")->required();
  add_backend_flags(eval_cmd, eval.backends, false, true);
  eval_cmd->add_option("--out-dir", eval.out_dir, "Directory for records.jsonl, metrics.json, bins.csv");
  eval_cmd->add_option("--threshold", eval.threshold, "Predict entailed when p > threshold (default 0.5)");
  eval_cmd->add_option("--edges", eval.edges, "Upper bin edges, ending at 1.0")->delimiter(',');
  eval_cmd->add_option("--resamples", eval.resamples, "Bootstrap resamples (default 1000)");
  eval_cmd->add_option("--level", eval.level, "Confidence level (default 0.95)");
  eval_cmd->add_option("--seed", eval.seed, "Bootstrap seed (default 0)");
  eval_cmd->add_option("--batch", eval.batch, "Pairs per scoring batch (default 60)");

  DecodeArgs dec;
  auto* decode_sub = app.add_subcommand("decode", "Decode one document and print the output");
  add_backend_flags(decode_sub, dec.backends, true, true);
  add_decode_flags(decode_sub, dec.flags, true);
  decode_sub->add_option("--document", dec.doc.document, "Fixture document id (default: first)");
  decode_sub->add_option("--premise", dec.doc.premise, "Premise text (instead of a fixture document)");
  decode_sub->add_option("--context-id", dec.doc.context_id, "Generation context id");
  decode_sub->add_option("--prompt", dec.doc.prompt, "Prompt text sent to the generator");
  decode_sub->add_option("--trace", dec.trace, "Write the decode trace as JSON ('-' for stdout)");

  CompareArgs cmp;
  auto* compare_sub = app.add_subcommand("compare", "Decode every document with each method and tabulate");
  add_backend_flags(compare_sub, cmp.backends, true, true);
  add_decode_flags(compare_sub, cmp.flags, false);
  compare_sub->add_option("--documents", cmp.documents, "Document JSONL (id, premise, context_id, prompt, reference)");
  compare_sub->add_option("--modes", cmp.modes, "Methods to run (default vanilla,prefix,lookahead)")->delimiter(',');
  compare_sub->add_option("--judge-url", cmp.judge_url, "Scorer endpoint judging output sentences (default: guide scorer)");
  compare_sub->add_option("--judge-threshold", cmp.judge_threshold, "Sentence is faithful when p > threshold");
  compare_sub->add_option("-o,--out", cmp.out, "Results CSV (default stdout)");
  compare_sub->add_option("--timing-out", cmp.timing_out, "Wall-clock CSV");
  compare_sub->add_option("--details", cmp.details, "Per-document JSONL");
  compare_sub->add_option("-j,--jobs", cmp.jobs, "Documents decoded in parallel (default 1)");

  CostArgs cost;
  auto* cost_sub = app.add_subcommand("cost", "Per-token FLOPs of vanilla and guided decoding");
  cost_sub->add_option("--n-lm", cost.n_lm, "Generator non-embedding parameters (several values sweep)")->delimiter(',');
  cost_sub->add_option("--n-ent", cost.n_ent, "Scorer non-embedding parameters (several values sweep)")->delimiter(',');
  cost_sub->add_option("--m", cost.m, "Scored candidates per token (several values sweep)")->delimiter(',');
  cost_sub->add_flag("--sweep", cost.sweep, "Emit CSV even for a single point");
  cost_sub->add_option("--n-ctx", cost.n_ctx, "Context length; switches to the formula with the attention term");
  cost_sub->add_option("--lm-layers", cost.lm_layers, "Generator layers (with --n-ctx)");
  cost_sub->add_option("--lm-d-model", cost.lm_d_model, "Generator hidden size (with --n-ctx)");
  cost_sub->add_option("--ent-layers", cost.ent_layers, "Scorer layers (with --n-ctx)");
  cost_sub->add_option("--ent-d-model", cost.ent_d_model, "Scorer hidden size (with --n-ctx)");
  cost_sub->add_option("-o,--out", cost.out, "Output file (default stdout)");

  ServeArgs serve;
  auto* serve_sub = app.add_subcommand("serve-mock", "Serve a mock fixture over the wire protocol");
  serve_sub->add_option("--fixture", serve.fixture, "Mock fixture file")->required();
  serve_sub->add_option("--host", serve.host, "Bind address (default 127.0.0.1)");
  serve_sub->add_option("--port", serve.port, "Port; 0 picks a free one (default 8080)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (build_cmd->parsed()) return build_dataset(build, out);
    if (eval_cmd->parsed()) return eval_scorer(eval, out);
    if (decode_sub->parsed()) return decode_cmd(dec, out);
    if (compare_sub->parsed()) return compare_cmd(cmp, out);
    if (cost_sub->parsed()) return cost_cmd(cost, out);
    if (serve_sub->parsed()) return serve_cmd(serve, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.category()) << "): " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const json::exception& e) {
    err << "error (data): " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (data): " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace prefixnli::cli
