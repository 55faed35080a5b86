#include "smishing/bundle.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "smishing/error.hpp"
#include "smishing/hash.hpp"

namespace smishing {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError("bundle file " + path.string() + " is missing");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw BundleError("bundle file " + path.string() + " is not valid JSON");
  return j;
}

std::string lines(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += s + "\n";
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string stem(StreamId id) { return "fusion/projection_" + std::string(to_string(id)); }

std::vector<std::string> bundle_files() {
  std::vector<std::string> written{"tagging/gazetteer.tsv",
                                   "tagging/legitimate_phrases.txt",
                                   "tagging/smishing_phrases.txt",
                                   "tagging/patterns.json",
                                   "streams/semantic_vocabulary.json",
                                   "streams/semantic_forest.json",
                                   "streams/structural_vocabulary.json",
                                   "streams/structural_forest.json",
                                   "streams/charset.json",
                                   "streams/char_cnn.f32",
                                   "streams/char_cnn.shapes.json",
                                   "streams/context_head.f32",
                                   "streams/context_head.shapes.json",
                                   "fusion/model.f32",
                                   "fusion/model.shapes.json",
                                   "fusion/history.json",
                                   "threshold"};
  for (auto id : kStreamOrder) {
    written.push_back(stem(id) + ".f32");
    written.push_back(stem(id) + ".shapes.json");
  }
  return written;
}

}  // namespace

std::string save_bundle(const Pipeline& pipeline, const fs::path& directory) {
  const auto& s = pipeline.streams();
  s.require_complete();
  for (const char* sub : {"tagging", "streams", "fusion"}) fs::create_directories(directory / sub);

  write_file(directory / "tagging/gazetteer.tsv", pipeline.resources().gazetteer.serialize());
  write_file(directory / "tagging/legitimate_phrases.txt", lines(pipeline.resources().phrases.legitimate()));
  write_file(directory / "tagging/smishing_phrases.txt", lines(pipeline.resources().phrases.smishing()));
  write_file(directory / "tagging/patterns.json",
             nlohmann::json{{"version", patterns::kVersion},
                            {"url", patterns::kUrl},
                            {"email", patterns::kEmail},
                            {"phone", patterns::kPhone},
                            {"money", patterns::kMoney},
                            {"fingerprint", patterns::fingerprint()}}
                     .dump(2) + "\n");

  write_file(directory / "streams/semantic_vocabulary.json", s.semantic_vocab->to_json().dump() + "\n");
  write_file(directory / "streams/semantic_forest.json", s.semantic_forest->to_json().dump() + "\n");
  write_file(directory / "streams/structural_vocabulary.json", s.structural_vocab->to_json().dump() + "\n");
  write_file(directory / "streams/structural_forest.json", s.structural_forest->to_json().dump() + "\n");
  write_file(directory / "streams/charset.json", s.charset->to_json().dump(1) + "\n");
  s.char_cnn->parameters().save(directory / "streams/char_cnn.f32", directory / "streams/char_cnn.shapes.json");
  s.context_head->parameters().save(directory / "streams/context_head.f32",
                                    directory / "streams/context_head.shapes.json");

  nlohmann::json projections = nlohmann::json::array();
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    const auto& p = pipeline.projections()[i];
    const auto base = stem(kStreamOrder[i]);
    p.save(directory / (base + ".f32"), directory / (base + ".shapes.json"));
    projections.push_back({{"stream", to_string(kStreamOrder[i])},
                           {"k", p.k},
                           {"dimension", p.dimension},
                           {"pass_through", p.pass_through},
                           {"mean_centered", !p.pass_through}});
  }
  pipeline.fusion().parameters().save(directory / "fusion/model.f32", directory / "fusion/model.shapes.json");
  write_file(directory / "fusion/history.json",
             nlohmann::json{{"char_cnn", s.char_cnn->history().to_json()},
                            {"context_head", s.context_head->history().to_json()},
                            {"fusion", pipeline.fusion().history().to_json()}}
                     .dump(2) + "\n");
  write_file(directory / "threshold", format_double(pipeline.threshold()) + "\n");

  nlohmann::json files = nlohmann::json::object();
  for (const auto& rel : bundle_files()) files[rel] = sha256_file(directory / rel);
  std::vector<std::string> order;
  for (auto id : kStreamOrder) order.emplace_back(to_string(id));
  const nlohmann::json manifest{
      {"bundle_format", kBundleFormat},
      {"seed", pipeline.seed()},
      {"tagging_patterns", {{"version", patterns::kVersion}, {"fingerprint", patterns::fingerprint()}}},
      {"stream_order", order},
      {"config", pipeline.config().to_json()},
      {"char_vocab_size", s.charset->size()},
      {"projections", projections},
      {"threshold", pipeline.threshold()},
      {"files", files}};
  const std::string text = manifest.dump(2) + "\n";
  write_file(directory / "manifest.json", text);
  return sha256_hex(text);
}

std::string bundle_hash(const fs::path& directory) { return sha256_file(directory / "manifest.json"); }

Pipeline load_bundle(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw BundleError("bundle directory " + directory.string() + " not found");
  const auto manifest = read_json(directory / "manifest.json");
  if (!manifest.is_object()) throw BundleError("manifest.json is not an object");
  if (manifest.value("bundle_format", -1) != kBundleFormat) {
    throw BundleError("bundle format " + manifest.value("bundle_format", nlohmann::json()).dump() +
                      " is not supported (expected " + std::to_string(kBundleFormat) + ")");
  }
  const auto patterns_it = manifest.find("tagging_patterns");
  if (patterns_it == manifest.end() || !patterns_it->is_object() || !patterns_it->contains("fingerprint")) {
    throw BundleError("manifest.json lacks the tagging pattern fingerprint; refusing to load");
  }
  if ((*patterns_it)["fingerprint"] != patterns::fingerprint()) {
    throw BundleError("bundle was built with tagging patterns " +
                      patterns_it->value("version", std::string("?")) +
                      " whose fingerprint differs from this build's " + std::string(patterns::kVersion));
  }
  const auto files = manifest.value("files", nlohmann::json::object());
  for (const auto& rel : bundle_files()) {
    if (!files.contains(rel)) throw BundleError("manifest.json does not cover " + rel);
  }
  for (auto it = files.begin(); it != files.end(); ++it) {
    const auto path = directory / it.key();
    if (!fs::exists(path)) throw BundleError("bundle file " + it.key() + " is missing");
    if (sha256_file(path) != it.value().get<std::string>()) {
      throw BundleError("bundle file " + it.key() + " failed its SHA-256 check");
    }
  }

  try {
    auto config = PipelineConfig::from_json(manifest.at("config"));
    TaggingResources resources{
        EntityGazetteer::load(directory / "tagging/gazetteer.tsv"),
        PhraseLexicon::load(directory / "tagging/legitimate_phrases.txt",
                            directory / "tagging/smishing_phrases.txt")};
    StreamArtifacts s;
    s.semantic_vocab = TfidfVocabulary::from_json(read_json(directory / "streams/semantic_vocabulary.json"));
    s.semantic_forest = RandomForest::from_json(read_json(directory / "streams/semantic_forest.json"));
    s.structural_vocab = TfidfVocabulary::from_json(read_json(directory / "streams/structural_vocabulary.json"));
    s.structural_forest = RandomForest::from_json(read_json(directory / "streams/structural_forest.json"));
    s.charset = Charset::from_json(read_json(directory / "streams/charset.json"));
    s.char_cnn = CharCnn(config.streams.char_cnn, s.charset->size(),
                         nn::ParameterSet::load(directory / "streams/char_cnn.f32",
                                                directory / "streams/char_cnn.shapes.json"));
    s.encoder = make_encoder(config.streams.encoder);
    s.context_head = ContextHead(config.streams.context_head, config.streams.encoder.token_dim,
                                 nn::ParameterSet::load(directory / "streams/context_head.f32",
                                                        directory / "streams/context_head.shapes.json"));
    std::array<SvdProjection, kStreamCount> projections;
    for (std::size_t i = 0; i < kStreamCount; ++i) {
      const auto base = stem(kStreamOrder[i]);
      projections[i] = SvdProjection::load(directory / (base + ".f32"), directory / (base + ".shapes.json"));
    }
    FusionModel fusion(config.fusion, kAllStreams,
                       nn::ParameterSet::load(directory / "fusion/model.f32", directory / "fusion/model.shapes.json"));
    const auto history = read_json(directory / "fusion/history.json");
    s.char_cnn->set_history(nn::TrainingHistory::from_json(history.at("char_cnn")));
    s.context_head->set_history(nn::TrainingHistory::from_json(history.at("context_head")));
    fusion.set_history(nn::TrainingHistory::from_json(history.at("fusion")));
    Pipeline pipeline(std::move(resources), config, manifest.at("seed").get<std::uint64_t>(), std::move(s),
                      std::move(projections), std::move(fusion));
    pipeline.set_threshold(std::stod(read_file(directory / "threshold")));
    return pipeline;
  } catch (const BundleError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw BundleError(std::string("bundle ") + directory.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw BundleError(std::string("bundle ") + directory.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw BundleError("bundle file threshold is malformed");
  }
}

}  // namespace smishing
