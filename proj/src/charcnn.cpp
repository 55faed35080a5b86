#include "smishing/charcnn.hpp"

#include <algorithm>
#include <map>

#include "smishing/error.hpp"
#include "smishing/random.hpp"
#include "smishing/text.hpp"

namespace smishing {

void CharCnnConfig::validate() const {
  if (embed_dim == 0 || filters == 0 || hidden == 0 || widths.empty()) {
    throw ConfigError("char CNN sizes must be at least 1");
  }
  for (auto w : widths) {
    if (w == 0 || w >= max_len) {
      throw ConfigError("char CNN filter width " + std::to_string(w) +
                        " must be in [1, max_len)");
    }
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("char CNN dropout must be in [0, 1)");
  if (learning_rate <= 0.0) throw ConfigError("char CNN learning rate must be positive");
}

nlohmann::json CharCnnConfig::to_json() const {
  return {{"max_len", max_len},   {"embed_dim", embed_dim},       {"widths", widths},
          {"filters", filters},   {"hidden", hidden},             {"dropout", dropout},
          {"epochs", epochs},     {"batch_size", batch_size},     {"learning_rate", learning_rate},
          {"non_ascii_chars", non_ascii_chars}};
}

CharCnnConfig CharCnnConfig::from_json(const nlohmann::json& j) {
  CharCnnConfig c;
  try {
    c.max_len = j.value("max_len", c.max_len);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.widths = j.value("widths", c.widths);
    c.filters = j.value("filters", c.filters);
    c.hidden = j.value("hidden", c.hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.non_ascii_chars = j.value("non_ascii_chars", c.non_ascii_chars);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("char CNN config: ") + e.what());
  }
  c.validate();
  return c;
}

Charset::Charset(std::vector<char32_t> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], static_cast<std::int32_t>(i + 2)).second) {
      throw DataError("duplicate charset symbol");
    }
  }
}

Charset Charset::build(std::span<const std::string> texts, std::size_t non_ascii) {
  std::vector<char32_t> symbols;
  for (char32_t c = 0x20; c < 0x7F; ++c) symbols.push_back(c);
  std::map<char32_t, std::size_t> counts;
  for (const auto& t : texts) {
    for (char32_t cp : text::decode_utf8(t)) {
      if (cp >= 0x80) ++counts[cp];
    }
  }
  std::vector<std::pair<char32_t, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ranked.size() && i < non_ascii; ++i) symbols.push_back(ranked[i].first);
  return Charset(std::move(symbols));
}

std::int32_t Charset::index_of(char32_t cp) const {
  auto it = index_.find(cp);
  return it == index_.end() ? kUnk : it->second;
}

nlohmann::json Charset::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (char32_t cp : symbols_) out.push_back(text::encode_utf8(std::u32string(1, cp)));
  return out;
}

Charset Charset::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("charset must be a JSON array");
  std::vector<char32_t> symbols;
  for (const auto& s : j) {
    if (!s.is_string()) throw DataError("charset entries must be strings");
    const auto cps = text::decode_utf8(s.get<std::string>());
    if (cps.size() != 1) throw DataError("charset entry must be a single character");
    symbols.push_back(cps[0]);
  }
  return Charset(std::move(symbols));
}

CharSequence encode_chars(std::string_view text, std::size_t max_len, const Charset& charset) {
  CharSequence out(max_len, Charset::kPad);
  const auto cps = text::decode_utf8(text);
  for (std::size_t i = 0; i < cps.size() && i < max_len; ++i) out[i] = charset.index_of(cps[i]);
  return out;
}

CharCnn::CharCnn(CharCnnConfig config, std::size_t vocab_size, std::uint64_t seed)
    : config_(std::move(config)), vocab_size_(vocab_size) {
  config_.validate();
  const auto e = config_.embed_dim;
  Rng rng(derive_seed(seed, 1));
  nn::Matrix embedding(vocab_size_, e);
  for (Eigen::Index i = 0; i < embedding.size(); ++i) embedding.data()[i] = rng.uniform(-0.05, 0.05);
  params_.add("embedding", std::move(embedding));
  conv_ = nn::ConvBank(config_.widths, config_.filters, e);
  conv_.add_parameters(params_, "conv", derive_seed(seed, 2));
  const auto pooled = conv_.output_size();
  params_.add("dense.weight", nn::glorot(config_.hidden, pooled, pooled, config_.hidden, derive_seed(seed, 3)));
  params_.add("dense.bias", nn::Matrix::Zero(config_.hidden, 1));
  params_.add("output.weight", nn::glorot(1, config_.hidden, config_.hidden, 1, derive_seed(seed, 4)));
  params_.add("output.bias", nn::Matrix::Zero(1, 1));
  bind();
}

CharCnn::CharCnn(CharCnnConfig config, std::size_t vocab_size, nn::ParameterSet params)
    : config_(std::move(config)), vocab_size_(vocab_size) {
  config_.validate();
  CharCnn reference(config_, vocab_size_, 0);
  const auto& expected = reference.params_;
  if (params.names != expected.names) throw DataError("char CNN tensor names do not match its config");
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    if (params.values[i].rows() != expected.values[i].rows() ||
        params.values[i].cols() != expected.values[i].cols()) {
      throw DataError("char CNN tensor '" + params.names[i] + "' has the wrong shape");
    }
  }
  params_ = std::move(params);
  conv_ = nn::ConvBank(config_.widths, config_.filters, config_.embed_dim);
  bind();
}

void CharCnn::bind() {
  embedding_ = params_.index("embedding");
  conv_.bind(params_.index("conv.w" + std::to_string(config_.widths.front()) + ".kernel"));
  dense_w_ = params_.index("dense.weight");
  dense_b_ = params_.index("dense.bias");
  out_w_ = params_.index("output.weight");
  out_b_ = params_.index("output.bias");
}

void CharCnn::check_length(const CharSequence& sequence) const {
  if (sequence.size() != config_.max_len) {
    throw DataError("char sequence length " + std::to_string(sequence.size()) + " differs from " +
                    std::to_string(config_.max_len));
  }
}

void CharCnn::forward(const CharSequence& sequence, Forward& f, std::uint64_t dropout_seed,
                      bool training, bool keep_cache) const {
  check_length(sequence);
  const nn::Matrix& table = params_.values[embedding_];
  f.embedded.resize(static_cast<Eigen::Index>(sequence.size()), table.cols());
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    auto idx = sequence[t];
    if (idx < 0 || static_cast<std::size_t>(idx) >= vocab_size_) idx = Charset::kUnk;
    f.embedded.row(static_cast<Eigen::Index>(t)) = table.row(idx);
  }
  f.pooled = conv_.forward(params_, f.embedded, keep_cache ? &f.conv : nullptr);
  f.hidden = (params_.values[dense_w_] * f.pooled + params_.values[dense_b_]).cwiseMax(0.0);
  if (training && config_.dropout > 0.0) {
    f.mask = nn::dropout_mask(config_.hidden, config_.dropout, dropout_seed);
  } else {
    f.mask = nn::Vector::Ones(config_.hidden);
  }
  f.logit = (params_.values[out_w_] * f.hidden.cwiseProduct(f.mask))(0, 0) + params_.values[out_b_](0, 0);
}

double CharCnn::accumulate_gradient(const CharSequence& sequence, int target, nn::Gradients& grads,
                                    double scale, std::uint64_t dropout_seed, bool training) const {
  Forward f;
  forward(sequence, f, dropout_seed, training, true);
  const double loss = nn::bce_with_logit(f.logit, target);
  const double dlogit = scale * (nn::sigmoid(f.logit) - target);
  const nn::Vector dropped = f.hidden.cwiseProduct(f.mask);
  grads[out_w_] += dlogit * dropped.transpose();
  grads[out_b_](0, 0) += dlogit;
  nn::Vector dhidden = dlogit * params_.values[out_w_].transpose();
  dhidden = dhidden.cwiseProduct(f.mask);
  for (Eigen::Index i = 0; i < dhidden.size(); ++i) {
    if (f.hidden(i) <= 0.0) dhidden(i) = 0.0;
  }
  grads[dense_w_] += dhidden * f.pooled.transpose();
  grads[dense_b_] += dhidden;
  const nn::Vector dpooled = params_.values[dense_w_].transpose() * dhidden;
  nn::Matrix& table_grad = grads[embedding_];
  conv_.backward(params_, f.embedded, f.conv, dpooled, grads,
                 [&](std::size_t row, const Eigen::RowVectorXd& g) {
                   auto idx = sequence[row];
                   if (idx < 0 || static_cast<std::size_t>(idx) >= vocab_size_) idx = Charset::kUnk;
                   table_grad.row(idx) += g;
                 });
  return loss;
}

double CharCnn::loss(const CharSequence& sequence, int target, std::uint64_t dropout_seed,
                     bool training) const {
  Forward f;
  forward(sequence, f, dropout_seed, training, false);
  return nn::bce_with_logit(f.logit, target);
}

nn::Vector CharCnn::features(const CharSequence& sequence) const {
  Forward f;
  forward(sequence, f, 0, false, false);
  return f.hidden;
}

double CharCnn::predict(const CharSequence& sequence) const {
  Forward f;
  forward(sequence, f, 0, false, false);
  return nn::sigmoid(f.logit);
}

CharCnn CharCnn::train(std::span<const CharSequence> sequences, std::span<const int> targets,
                       const CharCnnConfig& config, std::size_t vocab_size, std::uint64_t seed,
                       std::size_t threads) {
  if (sequences.size() != targets.size()) throw DataError("char CNN: sequence/target count mismatch");
  const auto positives = std::count(targets.begin(), targets.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(targets.size())) {
    throw DataError("char CNN: training data must contain both classes");
  }
  CharCnn model(config, vocab_size, seed);
  nn::TrainOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.adam.learning_rate = config.learning_rate;
  options.seed = derive_seed(seed, 5);
  options.threads = threads;
  model.history_ = nn::fit(
      model.params_, sequences.size(), options,
      [&](std::size_t i, nn::Gradients& grads, double scale, std::uint64_t dropout_seed) {
        return model.accumulate_gradient(sequences[i], targets[i], grads, scale, dropout_seed, true);
      },
      "char CNN");
  model.params_.round_to_float();
  return model;
}

}  // namespace smishing
