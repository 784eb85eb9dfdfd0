/*
 * Copyright 2026 The sardec Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sardec/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sardec/base_trainer.hpp"
#include "sardec/decoder.hpp"
#include "sardec/grammar.hpp"
#include "sardec/soft_store.hpp"
#include "sardec/tuner.hpp"
#include "sardec/vocab.hpp"

namespace sardec {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kOutputRootEnv = "SARDEC_OUTPUT_ROOT";
constexpr const char* kTimingBanner =
    "wall-clock figures come from a small CPU model and do not reflect the "
    "memory-bandwidth-bound regime of large models; compare forward passes instead";

template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  f("config_file", c.config_file);
  f("out_dir", c.out_dir);
  f("corpus", c.corpus);
  f("questions", c.questions);
  f("prompts", c.prompts);
  f("weights", c.weights);
  f("dataset", c.dataset);
  f("soft", c.soft);
  f("dim", c.dim);
  f("n_layers", c.n_layers);
  f("n_heads", c.n_heads);
  f("hidden", c.hidden);
  f("max_positions", c.max_positions);
  f("base_steps", c.base_steps);
  f("base_batch", c.base_batch);
  f("base_lr", c.base_lr);
  f("base_warmup", c.base_warmup);
  f("grad_clip", c.grad_clip);
  f("heldout_fraction", c.heldout_fraction);
  f("ce_threshold", c.ce_threshold);
  f("init_scale", c.init_scale);
  f("base_seed", c.base_seed);
  f("synth_docs", c.synth_docs);
  f("grammar_seed", c.grammar_seed);
  f("corpus_seed", c.corpus_seed);
  f("gen_max_new", c.gen_max_new);
  f("samples_per_pair", c.samples_per_pair);
  f("data_seed", c.data_seed);
  f("prompting", c.prompting);
  f("prompt_len", c.prompt_len);
  f("n_masks", c.n_masks);
  f("epochs", c.epochs);
  f("tune_batch", c.tune_batch);
  f("lr0", c.lr0);
  f("optimizer", c.optimizer);
  f("tune_seed", c.tune_seed);
  f("mode", c.mode);
  f("n", c.n);
  f("k", c.k);
  f("k_list", c.k_list);
  f("max_new", c.max_new);
  f("eos", c.eos);
  f("query", c.query);
  f("untrained_baseline", c.untrained_baseline);
  f("trials", c.trials);
  f("verify_seed", c.verify_seed);
  f("inject_fault", c.inject_fault);
}

template <class T>
const char* kind_of() {
  if constexpr (std::is_same_v<T, std::string>) return "string";
  else if constexpr (std::is_same_v<T, int>) return "int";
  else if constexpr (std::is_same_v<T, double>) return "real";
  else if constexpr (std::is_same_v<T, std::uint64_t>) return "seed";
  else if constexpr (std::is_same_v<T, bool>) return "bool";
  else return "int_list";
}

template <class T>
T parse_number(std::string_view name, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(name));
  }
  return value;
}

void parse_into(std::string_view, std::string_view text, std::string& out) {
  out = std::string(text);
}
void parse_into(std::string_view name, std::string_view text, int& out) {
  out = parse_number<int>(name, text);
}
void parse_into(std::string_view name, std::string_view text, double& out) {
  out = parse_number<double>(name, text);
}
void parse_into(std::string_view name, std::string_view text, std::uint64_t& out) {
  out = parse_number<std::uint64_t>(name, text);
}
void parse_into(std::string_view name, std::string_view text, bool& out) {
  if (text == "true" || text == "1") {
    out = true;
  } else if (text == "false" || text == "0") {
    out = false;
  } else {
    throw ConfigError("invalid boolean '" + std::string(text) + "' for " + std::string(name));
  }
}
void parse_into(std::string_view name, std::string_view text, std::vector<int>& out) {
  out.clear();
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    out.push_back(parse_number<int>(name, text.substr(start, comma - start)));
    start = comma + 1;
  }
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

json config_json(const RunConfig& c) { return json::parse(run_config_json(c)); }

// Line-oriented artifacts (JSONL, CSV) carry their configuration in a sidecar.
void write_sidecar(const RunConfig& c, const std::string& artifact, json extra = json::object()) {
  json meta;
  meta["artifact"] = fs::path(artifact).filename().string();
  meta["config"] = config_json(c);
  for (auto& [key, value] : extra.items()) meta[key] = value;
  write_text(artifact + ".config.json", meta.dump(1) + "\n");
}

std::map<std::string, std::string> lineage_of(const RunConfig& c, std::string_view stage) {
  return {{"stage", std::string(stage)},
          {"run_config", run_config_json(c, -1)},
          {"base_seed", std::to_string(c.base_seed)},
          {"data_seed", std::to_string(c.data_seed)},
          {"tune_seed", std::to_string(c.tune_seed)}};
}

ModelWeights load_weights(const RunConfig& c) {
  return weights_from_checkpoint(load(output_path(c, c.weights)));
}

SoftParams load_soft(const RunConfig& c, const ModelWeights& w) {
  return soft_from_checkpoint(load(output_path(c, c.soft)), w.config);
}

std::vector<std::string> corpus_texts(const RunConfig& c) {
  if (c.corpus.empty()) throw ConfigError("a corpus path is required");
  return read_jsonl_field(c.corpus, "text");
}

std::vector<std::string> question_texts(const RunConfig& c) {
  if (!c.questions.empty()) return read_jsonl_field(c.questions, "question");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& text : corpus_texts(c)) {
    std::string q = question_of(text);
    if (!q.empty() && seen.insert(q).second) out.push_back(std::move(q));
  }
  if (out.empty()) throw ConfigError("corpus holds no question documents");
  return out;
}

std::vector<std::string> prompt_texts(const RunConfig& c) {
  if (!c.prompts.empty()) return read_jsonl_field(c.prompts, "question");
  return question_texts(c);
}

TokenSequences encode_questions(const std::vector<std::string>& texts) {
  const Vocabulary& vocab = Vocabulary::standard();
  TokenSequences out;
  for (const auto& q : texts) out.push_back(vocab.encode_question(q));
  return out;
}

long first_divergence(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  const std::size_t m = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < m; ++i) {
    if (a[i] != b[i]) return static_cast<long>(i);
  }
  return a.size() == b.size() ? -1 : static_cast<long>(m);
}

json trial_json(const LosslessTrial& t) {
  json j;
  j["index"] = t.index;
  j["weights_seed"] = t.weights_seed;
  j["soft_seed"] = t.soft_seed;
  j["query"] = t.query;
  j["prompting"] = to_string(t.prompting);
  j["n"] = t.n;
  j["k"] = t.k;
  j["n_masks"] = t.n_masks;
  j["max_new"] = t.max_new;
  j["reference"] = t.reference;
  j["divergence"] = t.divergence;
  j["passes"] = t.passes;
  return j;
}

struct BenchMode {
  std::string name;
  std::string decode_mode;
  int k = 0;
  bool untrained = false;
};

template <class F>
int run_stage(std::string_view stage, F&& f) {
  const auto label = [&](const std::exception& e) {
    return "[" + std::string(stage) + "] " + e.what();
  };
  try {
    return f();
  } catch (const VerificationError& e) {
    throw VerificationError(label(e));
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(label(e));
  } catch (const NumericError& e) {
    throw NumericError(label(e));
  } catch (const ShapeError& e) {
    throw ShapeError(label(e));
  } catch (const ChecksumError& e) {
    throw ChecksumError(label(e));
  } catch (const VersionError& e) {
    throw VersionError(label(e));
  } catch (const IoError& e) {
    throw IoError(label(e));
  } catch (const Error& e) {
    throw ConfigError(label(e));
  } catch (const fs::filesystem_error& e) {
    throw IoError(label(e));
  }
}

}  // namespace

const std::vector<ConfigField>& run_config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> out;
    RunConfig c;
    visit_fields(c, [&](const char* name, auto& member) {
      out.push_back({name, kind_of<std::decay_t<decltype(member)>>()});
    });
    return out;
  }();
  return fields;
}

void apply_setting(RunConfig& config, std::string_view name, std::string_view value) {
  bool found = false;
  visit_fields(config, [&](const char* field, auto& member) {
    if (name == field) {
      parse_into(name, value, member);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown setting '" + std::string(name) + "'");
}

void apply_config_file(RunConfig& config, const std::string& path) {
  const json j = load_json_file(path);
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    visit_fields(config, [&](const char* field, auto& member) {
      if (key != field) return;
      found = true;
      try {
        value.get_to(member);
      } catch (const json::exception&) {
        throw ConfigError(path + ": wrong type for '" + key + "'");
      }
    });
    if (!found) throw ConfigError(path + ": unknown setting '" + key + "'");
  }
  const fs::path base = fs::path(path).parent_path();
  for (std::string* input : {&config.corpus, &config.questions, &config.prompts}) {
    if (!input->empty() && fs::path(*input).is_relative()) {
      *input = (base / *input).lexically_normal().string();
    }
  }
}

RunConfig resolve_config(const std::string& config_file,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig c;
  if (!config_file.empty()) {
    apply_config_file(c, config_file);
    c.config_file = config_file;
  }
  for (const auto& [name, value] : overrides) apply_setting(c, name, value);
  return c;
}

std::string run_config_json(const RunConfig& config, int indent) {
  json j;
  RunConfig copy = config;
  visit_fields(copy, [&](const char* name, auto& member) {
    if (std::string_view(name) != "out_dir") j[name] = member;
  });
  return j.dump(indent);
}

std::string output_root(const RunConfig& config) {
  const fs::path dir(config.out_dir);
  const char* root = std::getenv(kOutputRootEnv);
  if (dir.is_relative() && root != nullptr && *root != '\0') return (fs::path(root) / dir).string();
  return dir.string();
}

std::string output_path(const RunConfig& config, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (fs::path(output_root(config)) / p).string();
}

ModelConfig model_config_of(const RunConfig& c) {
  ModelConfig m;
  m.vocab_size = Vocabulary::standard().size();
  m.dim = c.dim;
  m.n_layers = c.n_layers;
  m.n_heads = c.n_heads;
  m.hidden = c.hidden;
  m.max_positions = c.max_positions;
  validate_config(m);
  return m;
}

std::vector<std::string> read_jsonl_field(const std::string& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw ConfigError(where + ": not valid JSON");
    }
    if (!j.is_object() || !j.contains(field) || !j[field].is_string()) {
      throw ConfigError(where + ": expected a string field \"" + field + "\"");
    }
    out.push_back(j[field].get<std::string>());
  }
  if (out.empty()) throw ConfigError(path + ": no records");
  return out;
}

int cmd_synth_corpus(const RunConfig& c) {
  if (c.synth_docs < 1) throw ConfigError("synth_docs must be positive");
  const Grammar grammar = make_demo_grammar(c.grammar_seed);
  const auto docs = sample_documents(grammar, static_cast<std::size_t>(c.synth_docs), c.corpus_seed);
  std::string corpus, questions;
  std::set<std::string> seen;
  for (const auto& d : docs) {
    corpus += json{{"text", d}}.dump() + "\n";
    std::string q = question_of(d);
    if (!q.empty() && seen.insert(q).second) questions += json{{"question", q}}.dump() + "\n";
  }
  const std::string corpus_path = output_path(c, c.corpus.empty() ? "corpus.jsonl" : c.corpus);
  const std::string question_path =
      output_path(c, c.questions.empty() ? "questions.jsonl" : c.questions);
  write_text(corpus_path, corpus);
  write_text(question_path, questions);
  std::cout << "wrote " << docs.size() << " documents to " << corpus_path << " and "
            << seen.size() << " questions to " << question_path << "\n";
  return 0;
}

int cmd_train_base(const RunConfig& c) {
  const Vocabulary& vocab = Vocabulary::standard();
  TokenSequences corpus;
  for (const auto& text : corpus_texts(c)) corpus.push_back(vocab.encode_document(text));

  BaseTrainConfig tc;
  tc.model = model_config_of(c);
  tc.steps = c.base_steps;
  tc.batch_size = c.base_batch;
  tc.lr = c.base_lr;
  tc.warmup_steps = c.base_warmup;
  tc.grad_clip = c.grad_clip;
  tc.heldout_fraction = c.heldout_fraction;
  tc.ce_threshold = c.ce_threshold;
  tc.seed = c.base_seed;
  tc.init_scale = c.init_scale;
  const BaseTrainResult r = train_base_lm(corpus, tc);

  const std::string path = output_path(c, c.weights);
  save(to_checkpoint(r.weights, lineage_of(c, "train-base")), path);

  json report;
  report["config"] = config_json(c);
  report["documents"] = corpus.size();
  report["heldout_ce"] = r.heldout_ce;
  report["train_ce"] = r.train_ce;
  report["weights_checksum"] = weights_checksum(r.weights);
  report["loss_curve"] = r.loss_curve;
  write_text(output_path(c, "train_base.json"), report.dump(1) + "\n");
  std::cout << "base model: held-out CE " << r.heldout_ce << " nats/token, train CE "
            << r.train_ce << ", saved " << path << "\n";
  return 0;
}

int cmd_gen_data(const RunConfig& c) {
  if (c.samples_per_pair < 1) throw ConfigError("samples_per_pair must be positive");
  if (c.gen_max_new < 1) throw ConfigError("gen_max_new must be positive");
  const ModelWeights w = load_weights(c);
  const auto texts = question_texts(c);
  const SelfGenResult gen = self_generate(w, encode_questions(texts),
                                          static_cast<std::size_t>(c.gen_max_new), c.eos, c.n_masks);
  if (gen.pairs.empty()) throw ConfigError("every self-generated answer was too short to slice");

  std::mt19937_64 rng(c.data_seed);
  std::vector<TrainSample> samples;
  for (const auto& pair : gen.pairs) {
    for (int s = 0; s < c.samples_per_pair; ++s) samples.push_back(make_sample(pair, c.n_masks, rng));
  }
  const std::string path = output_path(c, c.dataset);
  write_dataset_jsonl(path, samples);

  const Vocabulary& vocab = Vocabulary::standard();
  json answers = json::array();
  for (const auto& pair : gen.pairs) {
    answers.push_back({{"question", texts[pair.source]}, {"answer", vocab.decode(pair.answer)}});
  }
  write_sidecar(c, path,
                {{"pairs", gen.pairs.size()},
                 {"dropped", gen.dropped},
                 {"samples", samples.size()},
                 {"weights_checksum", weights_checksum(w)},
                 {"answers", answers}});
  std::cout << "self-generated " << gen.pairs.size() << " pairs (" << gen.dropped
            << " dropped), wrote " << samples.size() << " samples to " << path << "\n";
  return 0;
}

int cmd_tune(const RunConfig& c) {
  const ModelWeights w = load_weights(c);
  const auto samples = read_dataset_jsonl(output_path(c, c.dataset));
  TuneConfig tc;
  tc.epochs = c.epochs;
  tc.batch_size = c.tune_batch;
  tc.lr0 = c.lr0;
  tc.seed = c.tune_seed;
  tc.mode = prompting_mode_from_string(c.prompting);
  tc.prompt_len = c.prompt_len;
  tc.n_masks = c.n_masks;
  tc.optimizer = tune_optimizer_from_string(c.optimizer);
  const TuneResult r = tune(w, samples, tc);

  auto lineage = lineage_of(c, "tune");
  lineage["weights_checksum"] = weights_checksum(w);
  const std::string path = output_path(c, c.soft);
  save(to_checkpoint(r.soft, w.config, lineage), path);
  const std::string log_path = output_path(c, "tune_log.csv");
  write_tune_log_csv(log_path, r.log);
  write_sidecar(c, log_path, {{"steps", r.log.size()}});
  std::cout << "tuned " << r.log.size() << " steps, loss " << r.log.front().loss << " -> "
            << r.log.back().loss << ", saved " << path << "\n";
  return 0;
}

int cmd_decode(const RunConfig& c) {
  if (c.query.empty()) throw ConfigError("a query is required");
  if (c.max_new < 0) throw ConfigError("max_new must be non-negative");
  const Vocabulary& vocab = Vocabulary::standard();
  const ModelWeights w = load_weights(c);
  const auto query = vocab.encode_question(c.query);
  DecodeResult r;
  if (c.mode == "ar") {
    r = decode_ar(w, query, static_cast<std::size_t>(c.max_new), c.eos);
  } else {
    const SoftParams soft = load_soft(c, w);
    StreamConfig sc;
    sc.max_new = static_cast<std::size_t>(c.max_new);
    sc.eos = c.eos;
    sc.mode = decode_mode_from_string(c.mode);
    sc.n = c.n;
    sc.k = c.k;
    r = decode_streamlined(w, soft, query, sc);
  }
  std::cout << vocab.decode(r.tokens) << "\n";
  std::cout << "mode " << c.mode << ": " << r.stats.tokens_emitted << " tokens in "
            << r.stats.forward_passes << " passes (" << r.stats.mean_accepted_per_pass()
            << " accepted per pass)\n";
  return 0;
}

bool LosslessTrial::identical() const {
  return std::all_of(divergence.begin(), divergence.end(),
                     [](const auto& kv) { return kv.second < 0; });
}

LosslessTrial run_lossless_trial(std::uint64_t base_seed, std::size_t index, bool inject_fault) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  const auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  LosslessTrial t;
  t.index = index;
  t.weights_seed = rng();
  t.soft_seed = rng();
  t.n = uniform(1, 4);
  t.k = uniform(1, 3);
  t.n_masks = uniform(t.n, 4);
  t.prompting = static_cast<PromptingMode>(uniform(0, 2));
  const int prompt_len = t.prompting == PromptingMode::mask_only ? 0 : uniform(1, 4);
  t.max_new = static_cast<std::size_t>(uniform(1, 20));
  ModelConfig mc;
  mc.vocab_size = 32;
  mc.dim = 32;
  mc.n_layers = 2;
  mc.n_heads = 4;
  mc.hidden = 64;
  mc.max_positions = 256;
  const int query_len = uniform(1, 8);
  for (int i = 0; i < query_len; ++i) t.query.push_back(uniform(0, mc.vocab_size - 1));

  const ModelWeights w = init_weights(mc, t.weights_seed);
  SoftParams soft = init_soft(mc, prompt_len, t.n_masks, t.soft_seed, t.prompting);
  soft.for_each_array([](const std::string&, Tensor& a) {
    for (double& v : a.data) v *= 50.0;
  });

  constexpr TokenId kEos = 1;
  const DecodeResult ar = decode_ar(w, t.query, t.max_new, kEos);
  t.reference = ar.tokens;
  t.passes["ar"] = ar.stats.forward_passes;
  for (DecodeMode mode : {DecodeMode::straightforward, DecodeMode::efficient, DecodeMode::full}) {
    StreamConfig sc;
    sc.max_new = t.max_new;
    sc.eos = kEos;
    sc.mode = mode;
    sc.n = t.n;
    sc.k = t.k;
    sc.fault = inject_fault ? VerifyFault::misranked_pick : VerifyFault::none;
    const DecodeResult out = decode_streamlined(w, soft, t.query, sc);
    t.divergence[to_string(mode)] = first_divergence(t.reference, out.tokens);
    t.passes[to_string(mode)] = out.stats.forward_passes;
  }
  return t;
}

int cmd_verify_lossless(const RunConfig& c) {
  if (c.trials < 1) throw ConfigError("trials must be at least 1");
  std::vector<LosslessTrial> trials;
  std::size_t passed = 0;
  for (int i = 0; i < c.trials; ++i) {
    trials.push_back(run_lossless_trial(c.verify_seed, static_cast<std::size_t>(i), c.inject_fault));
    if (trials.back().identical()) ++passed;
  }

  json report;
  report["config"] = config_json(c);
  report["trials"] = trials.size();
  report["identical"] = passed;
  json results = json::array();
  for (const auto& t : trials) {
    results.push_back({{"index", t.index}, {"identical", t.identical()}, {"divergence", t.divergence}, {"passes", t.passes}});
  }
  report["results"] = results;
  write_text(output_path(c, "verify_report.json"), report.dump(1) + "\n");
  std::cout << passed << "/" << trials.size() << " trials identical to greedy decoding\n";
  if (passed == trials.size()) return 0;

  // Smallest failing trial: the first one, cut off just past its earliest divergence.
  const auto bad = std::find_if(trials.begin(), trials.end(),
                                [](const LosslessTrial& t) { return !t.identical(); });
  LosslessTrial minimal = *bad;
  long first = -1;
  for (const auto& [mode, at] : bad->divergence) {
    if (at >= 0 && (first < 0 || at < first)) first = at;
  }
  json dump;
  dump["verify_seed"] = c.verify_seed;
  dump["inject_fault"] = c.inject_fault;
  dump["first_divergent_index"] = first;
  dump["trial"] = trial_json(minimal);
  minimal.max_new = static_cast<std::size_t>(first + 1);
  minimal.reference.resize(std::min(minimal.reference.size(), minimal.max_new));
  dump["minimal_max_new"] = minimal.max_new;
  const std::string path = output_path(c, "counterexample.json");
  write_text(path, dump.dump(1) + "\n");
  std::cout << "mismatch in trial " << bad->index << " at index " << first
            << "; counterexample written to " << path << "\n";
  return 1;
}

int cmd_bench(const RunConfig& c) {
  if (c.max_new < 1) throw ConfigError("max_new must be positive");
  const ModelWeights w = load_weights(c);
  const SoftParams soft = load_soft(c, w);
  const SoftParams untrained = init_soft(w.config, soft.prompt_len, soft.n_masks, c.tune_seed, soft.mode);
  const auto prompts = encode_questions(prompt_texts(c));
  const std::size_t max_new = static_cast<std::size_t>(c.max_new);

  std::vector<BenchMode> modes = {{"ar", "ar", 0, false},
                                  {"straightforward", "straightforward", 0, false},
                                  {"efficient", "efficient", c.k, false}};
  for (int k : c.k_list) modes.push_back({"full_k" + std::to_string(k), "full", k, false});
  if (c.untrained_baseline) modes.push_back({"efficient_untrained", "efficient", c.k, true});

  std::vector<DecodeResult> reference;
  json mode_reports = json::array();
  json timing = json::object();
  std::ostringstream csv;
  csv << "mode,decode_mode,n,k,prompt,forward_passes,tokens_emitted,tokens_appended,"
         "mean_accepted_per_pass,pass_reduction\n";
  csv.precision(17);

  for (const auto& m : modes) {
    std::vector<DecodeResult> results;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (m.decode_mode == "ar") {
        results.push_back(decode_ar(w, prompts[i], max_new, c.eos));
        continue;
      }
      StreamConfig sc;
      sc.max_new = max_new;
      sc.eos = c.eos;
      sc.mode = decode_mode_from_string(m.decode_mode);
      sc.n = c.n;
      sc.k = std::max(m.k, 1);
      results.push_back(decode_streamlined(w, m.untrained ? untrained : soft, prompts[i], sc));
      const long at = first_divergence(reference[i].tokens, results.back().tokens);
      if (at >= 0) {
        throw VerificationError("mode " + m.name + " diverged from greedy decoding on prompt " +
                                std::to_string(i) + " at index " + std::to_string(at) +
                                "; no metrics reported");
      }
    }
    if (m.decode_mode == "ar") reference = results;

    std::size_t passes = 0, ar_passes = 0, emitted = 0, appended = 0;
    double wall = 0.0;
    std::map<std::size_t, std::size_t> histogram;
    json per_prompt = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
      const DecodeStats& s = results[i].stats;
      passes += s.forward_passes;
      ar_passes += reference[i].stats.forward_passes;
      emitted += s.tokens_emitted;
      appended += s.tokens_appended;
      wall += s.wall_seconds;
      for (const auto& [tokens, count] : s.histogram) histogram[tokens] += count;
      const double reduction =
          s.forward_passes ? static_cast<double>(reference[i].stats.forward_passes) / s.forward_passes : 0.0;
      per_prompt.push_back({{"forward_passes", s.forward_passes},
                            {"tokens_emitted", s.tokens_emitted},
                            {"tokens_appended", s.tokens_appended},
                            {"mean_accepted_per_pass", s.mean_accepted_per_pass()},
                            {"pass_reduction", reduction}});
      csv << m.name << ',' << m.decode_mode << ',' << c.n << ',' << m.k << ',' << i << ','
          << s.forward_passes << ',' << s.tokens_emitted << ',' << s.tokens_appended << ','
          << s.mean_accepted_per_pass() << ',' << reduction << '\n';
    }
    const double mean_accepted = passes ? static_cast<double>(appended) / passes : 0.0;
    const double reduction = passes ? static_cast<double>(ar_passes) / passes : 0.0;
    csv << m.name << ',' << m.decode_mode << ',' << c.n << ',' << m.k << ",all," << passes << ','
        << emitted << ',' << appended << ',' << mean_accepted << ',' << reduction << '\n';
    json hist = json::object();
    for (const auto& [tokens, count] : histogram) hist[std::to_string(tokens)] = count;
    mode_reports.push_back({{"name", m.name},
                            {"decode_mode", m.decode_mode},
                            {"n", m.decode_mode == "ar" ? 0 : c.n},
                            {"k", m.k},
                            {"untrained_soft", m.untrained},
                            {"forward_passes", passes},
                            {"tokens_emitted", emitted},
                            {"tokens_appended", appended},
                            {"mean_accepted_per_pass", mean_accepted},
                            {"pass_reduction", reduction},
                            {"histogram", hist},
                            {"per_prompt", per_prompt}});
    timing[m.name] = {{"wall_seconds", wall}, {"seconds_per_token", emitted ? wall / emitted : 0.0}};
  }

  json report;
  report["config"] = config_json(c);
  report["prompts"] = prompts.size();
  report["outputs_identical_to_greedy"] = true;
  report["modes"] = mode_reports;
  const std::string bench_path = output_path(c, "bench.json");
  write_text(bench_path, report.dump(1) + "\n");
  const std::string csv_path = output_path(c, "bench.csv");
  write_text(csv_path, csv.str());
  write_sidecar(c, csv_path);
  json timing_report;
  timing_report["warning"] = kTimingBanner;
  timing_report["config"] = config_json(c);
  timing_report["modes"] = timing;
  write_text(output_path(c, "timing.json"), timing_report.dump(1) + "\n");

  std::cerr << "warning: " << kTimingBanner << "\n";
  for (const auto& m : mode_reports) {
    std::cout << m["name"].get<std::string>() << ": " << m["forward_passes"].get<std::size_t>()
              << " passes, " << m["mean_accepted_per_pass"].get<double>()
              << " accepted/pass, pass reduction " << m["pass_reduction"].get<double>() << "\n";
  }
  std::cout << "metrics written to " << bench_path << "\n";
  return 0;
}

int cmd_pipeline(const RunConfig& c) {
  run_stage("setup", [&] {
    if (c.corpus.empty()) throw ConfigError("a corpus path is required");
    if (!fs::exists(c.corpus)) throw IoError("corpus not found: " + c.corpus);
    write_text(output_path(c, "config.json"), run_config_json(c) + "\n");
    return 0;
  });
  run_stage("train-base", [&] { return cmd_train_base(c); });
  run_stage("gen-data", [&] { return cmd_gen_data(c); });
  run_stage("tune", [&] { return cmd_tune(c); });
  return run_stage("bench", [&] { return cmd_bench(c); });
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const VerificationError*>(&error)) return 1;
  if (dynamic_cast<const NumericError*>(&error)) return 1;
  if (dynamic_cast<const Error*>(&error)) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&error)) return 2;
  return 1;
}

}  // namespace sardec
