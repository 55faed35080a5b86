#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smishing/bundle.hpp"
#include "smishing/config.hpp"
#include "smishing/corpus.hpp"
#include "smishing/error.hpp"
#include "smishing/eval.hpp"
#include "smishing/log.hpp"
#include "smishing/pipeline.hpp"
#include "smishing/synthetic.hpp"

namespace fs = std::filesystem;
using namespace smishing;

namespace {

struct Options {
  std::string config;
  std::string corpus;
  std::string bundle;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format = "table";
  std::string text;
  bool have_text = false;
  std::string input;
  std::size_t size = 4000;
  std::string noise;
  bool verbose = false;
  bool quiet = false;
};

RunConfig load_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig() : RunConfig::load(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<int> targets_of(const std::vector<LabeledMessage>& messages) {
  std::vector<int> t;
  t.reserve(messages.size());
  for (const auto& m : messages) t.push_back(m.binary_target);
  return t;
}

std::vector<PreparedMessage> prepare_messages(const std::vector<LabeledMessage>& messages,
                                              const TaggingResources& resources, std::size_t threads) {
  std::vector<std::string> texts;
  texts.reserve(messages.size());
  for (const auto& m : messages) texts.push_back(m.text);
  return prepare_all(texts, resources, threads);
}

std::vector<LabeledMessage> read_corpus(const std::string& path) {
  if (path.empty()) throw ConfigError("--corpus is required");
  auto messages = read_corpus_jsonl(path);
  if (messages.empty()) throw DataError("corpus " + path + " is empty");
  return messages;
}

int cmd_ingest(const Options& o) {
  const RunConfig config = load_config(o);
  if (config.datasets.empty()) throw ConfigError("config lists no datasets");
  const KeywordLexicon lexicon = config.load_relabel_lexicon();
  const LabelMap labels = config.label_map();

  std::vector<LabeledMessage> messages;
  std::size_t rejected = 0;
  for (const auto& d : config.datasets) {
    auto result = ingest_dataset(d.path, d.schema);
    rejected += result.rejected;
    log::info(d.schema.source_id + ": " + std::to_string(result.records.size()) + " records from " +
              d.path.string());
    for (const auto& r : result.records) messages.push_back(normalize(r, labels));
  }
  const CorpusStats before = corpus_stats(messages);
  const auto relabeled = relabel_spam(messages, lexicon);
  std::vector<DuplicateConflict> conflicts;
  const auto corpus = dedupe(relabeled, &conflicts);
  for (const auto& c : conflicts) {
    log::debug("duplicate " + c.id + ": kept " + std::string(to_string(c.kept)) + ", dropped " +
               std::string(to_string(c.dropped)));
  }
  const fs::path out = o.out.empty() ? config.output_dir / "corpus.jsonl" : fs::path(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_corpus_jsonl(out, corpus);

  const nlohmann::json report{{"corpus", out.string()},
                              {"rejected_rows", rejected},
                              {"duplicate_conflicts", conflicts.size()},
                              {"before_relabel", before.to_json()},
                              {"after_relabel", corpus_stats(relabeled).to_json()},
                              {"final", corpus_stats(corpus).to_json()}};
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_generate(const Options& o) {
  const RunConfig config = load_config(o);
  const TaggingResources resources = config.load_resources();
  SyntheticConfig sc;
  sc.size = o.size;
  sc.seed = config.seed;
  if (!o.noise.empty()) sc.noise_signal = parse_stream_id(o.noise);
  const auto corpus = generate_synthetic(sc, resources);
  const fs::path out = o.out.empty() ? config.output_dir / "synthetic.jsonl" : fs::path(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_corpus_jsonl(out, corpus.messages);
  std::cout << corpus_stats(corpus.messages).to_json().dump(2) << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const RunConfig config = load_config(o);
  // Every resource is read before the corpus so that a bad path fails fast.
  TaggingResources resources = config.load_resources();
  const auto messages = read_corpus(o.corpus);
  const fs::path out = o.out.empty() ? config.output_dir : fs::path(o.out);
  fs::create_directories(out);

  const CorpusSplit parts = split(messages, config.train_fraction, config.seed, config.stratify);
  write_json(out / "config.json", config.to_json());
  write_corpus_jsonl(out / "train.jsonl", parts.train);
  write_corpus_jsonl(out / "test.jsonl", parts.test);
  log::info("training on " + std::to_string(parts.train.size()) + " messages, holding out " +
            std::to_string(parts.test.size()));

  const auto prepared = prepare_messages(parts.train, resources, config.threads);
  const auto targets = targets_of(parts.train);
  const Pipeline pipeline =
      Pipeline::train(prepared, targets, std::move(resources), config.pipeline, config.seed, config.threads);
  const std::string hash = save_bundle(pipeline, out / "bundle");

  const auto& s = pipeline.streams();
  write_loss_csv(out / "loss.csv", {{"char_cnn", s.char_cnn->history()},
                                    {"context_head", s.context_head->history()},
                                    {"fusion", pipeline.fusion().history()}});
  write_json(out / "history.json", {{"char_cnn", s.char_cnn->history().to_json()},
                                    {"context_head", s.context_head->history().to_json()},
                                    {"fusion", pipeline.fusion().history().to_json()}});
  std::cout << nlohmann::json{{"bundle", (out / "bundle").string()},
                              {"manifest_sha256", hash},
                              {"test_corpus", (out / "test.jsonl").string()}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  if (o.bundle.empty()) throw ConfigError("--bundle is required");
  const Pipeline pipeline = load_bundle(o.bundle);
  const auto messages = read_corpus(o.corpus);
  const std::size_t threads = o.config.empty() ? 0 : load_config(o).threads;
  const auto prepared = prepare_messages(messages, pipeline.resources(), threads);
  const EvalReport report = evaluate(pipeline, prepared, targets_of(messages), threads);

  nlohmann::json j = report.to_json();
  nlohmann::json countries = nlohmann::json::object();
  for (const auto& [country, c] : country_label_cooccurrence(messages, pipeline.resources().gazetteer)) {
    countries[country] = {{"smishing", c.smishing}, {"other", c.other}};
  }
  j["countries"] = countries;
  if (!o.out.empty()) write_json(o.out, j);
  if (o.format == "json") {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << report.table();
  }
  return 0;
}

int cmd_ablate(const Options& o) {
  const RunConfig config = load_config(o);
  const TaggingResources resources = config.load_resources();
  const auto messages = read_corpus(o.corpus);
  const CorpusSplit parts = split(messages, config.train_fraction, config.seed, config.stratify);
  const auto train = prepare_messages(parts.train, resources, config.threads);
  const auto test = prepare_messages(parts.test, resources, config.threads);
  const AblationReport report = run_ablation(train, targets_of(parts.train), test, targets_of(parts.test),
                                             resources, config.pipeline, config.seed, config.threads);
  if (!o.out.empty()) {
    write_json(fs::path(o.out) / "ablation.json", report.to_json());
    write_json(fs::path(o.out) / "config.json", config.to_json());
  }
  if (o.format == "json") {
    std::cout << report.to_json().dump(2) << '\n';
  } else {
    std::cout << report.table();
  }
  return 0;
}

void print_prediction(const Prediction& p, const nlohmann::json& id, const std::string& format) {
  if (format == "json") {
    nlohmann::json j = p.to_json();
    if (!id.is_null()) j["id"] = id;
    std::cout << j.dump() << '\n';
    return;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f\t%d", p.probability, p.label);
  std::cout << buf;
  for (std::size_t s = 0; s < kStreamCount; ++s) {
    std::snprintf(buf, sizeof buf, "\t%.4f", p.attention[s]);
    std::cout << buf;
  }
  std::cout << '\t';
  for (std::size_t i = 0; i < p.tags.size(); ++i) std::cout << (i ? "," : "") << p.tags[i].tag;
  std::cout << '\n';
}

int cmd_predict(const Options& o) {
  if (o.bundle.empty()) throw ConfigError("--bundle is required");
  if (o.have_text == !o.input.empty()) throw ConfigError("give exactly one of --text and --input");
  const Pipeline pipeline = load_bundle(o.bundle);
  if (o.have_text) {
    print_prediction(pipeline.classify(o.text), nullptr, o.format);
    return 0;
  }
  std::ifstream in(o.input, std::ios::binary);
  if (!in) throw DataError("input file not found: " + o.input);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    nlohmann::json id;
    std::string text;
    if (j.is_string()) {
      text = j.get<std::string>();
    } else if (j.is_object() && j.contains("text") && j["text"].is_string()) {
      text = j["text"].get<std::string>();
      if (j.contains("id")) id = j["id"];
    } else {
      throw DataError(o.input + ":" + std::to_string(line_no) + ": expected a string or an object with \"text\"");
    }
    print_prediction(pipeline.classify(text), id, o.format);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stream smishing detector"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_flag("-v,--verbose", o.verbose, "Debug logging");
  app.add_flag("-q,--quiet", o.quiet, "Errors only");

  auto with_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Override the configured seed");
  };
  auto with_format = [&](CLI::App* cmd) {
    cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "table"}));
  };

  auto* ingest = app.add_subcommand("ingest", "Merge, relabel and deduplicate the configured datasets");
  with_config(ingest);
  ingest->add_option("--out", o.out, "Corpus JSONL to write");

  auto* generate = app.add_subcommand("generate-synthetic", "Write the four-signal synthetic corpus");
  with_config(generate);
  generate->add_option("--out", o.out, "Corpus JSONL to write");
  generate->add_option("--size", o.size, "Number of messages");
  generate->add_option("--noise", o.noise, "Stream whose signal becomes label-independent noise")
      ->check(CLI::IsMember({"semantic", "structural", "char", "contextual"}));

  auto* train = app.add_subcommand("train", "Train all streams and the fusion model");
  with_config(train);
  train->add_option("--corpus", o.corpus, "Corpus JSONL")->required();
  train->add_option("--out", o.out, "Run directory");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a bundle on a corpus");
  evaluate_cmd->add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--bundle", o.bundle, "Bundle directory")->required();
  evaluate_cmd->add_option("--corpus", o.corpus, "Corpus JSONL")->required();
  evaluate_cmd->add_option("--out", o.out, "Report JSON to write");
  with_format(evaluate_cmd);

  auto* ablate = app.add_subcommand("ablate", "Measure each stream's contribution");
  with_config(ablate);
  ablate->add_option("--corpus", o.corpus, "Corpus JSONL")->required();
  ablate->add_option("--out", o.out, "Directory for the report");
  with_format(ablate);

  auto* predict = app.add_subcommand("predict", "Classify one message or a JSONL batch");
  predict->add_option("--bundle", o.bundle, "Bundle directory")->required();
  predict->add_option("--text", o.text, "Message text");
  predict->add_option("--input", o.input, "JSONL file, one string or {\"id\", \"text\"} object per line");
  predict->add_option("--format", o.format, "Output format")
      ->check(CLI::IsMember({"json", "table"}))
      ->default_val("json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  o.have_text = predict->count("--text") > 0;
  log::set_level(o.quiet ? log::Level::kError : o.verbose ? log::Level::kDebug : log::Level::kInfo);

  try {
    if (*ingest) return cmd_ingest(o);
    if (*generate) return cmd_generate(o);
    if (*train) return cmd_train(o);
    if (*evaluate_cmd) return cmd_evaluate(o);
    if (*ablate) return cmd_ablate(o);
    if (*predict) return cmd_predict(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
