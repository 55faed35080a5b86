#include "smishing/contextual.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "smishing/error.hpp"
#include "smishing/hash.hpp"
#include "smishing/random.hpp"
#include "smishing/text.hpp"

namespace smishing {
namespace {

std::mutex registry_mutex;

std::map<std::string, EncoderFactory>& registry() {
  static std::map<std::string, EncoderFactory> factories{
      {"hash-fallback-v1",
       [](const ContextualEncoderSpec& spec) { return std::make_unique<HashEncoder>(spec); }}};
  return factories;
}

}  // namespace

void ContextualEncoderSpec::validate() const {
  if (embedding_dim == 0 || token_dim == 0 || max_tokens == 0) {
    throw ConfigError("contextual encoder dimensions must be at least 1");
  }
}

nlohmann::json ContextualEncoderSpec::to_json() const {
  return {{"encoder_id", encoder_id},
          {"embedding_dim", embedding_dim},
          {"token_dim", token_dim},
          {"max_tokens", max_tokens},
          {"seed", seed}};
}

ContextualEncoderSpec ContextualEncoderSpec::from_json(const nlohmann::json& j) {
  ContextualEncoderSpec s;
  try {
    s.encoder_id = j.value("encoder_id", s.encoder_id);
    s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
    s.token_dim = j.value("token_dim", s.token_dim);
    s.max_tokens = j.value("max_tokens", s.max_tokens);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("contextual encoder config: ") + e.what());
  }
  s.validate();
  return s;
}

HashEncoder::HashEncoder(ContextualEncoderSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  projection_.resize(spec_.embedding_dim, spec_.token_dim);
  std::uint64_t state = spec_.seed ^ 0x9E3779B97F4A7C15ULL;
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec_.token_dim));
  for (Eigen::Index r = 0; r < projection_.rows(); ++r) {
    for (Eigen::Index c = 0; c < projection_.cols(); ++c) {
      projection_(r, c) = (2.0 * unit_interval(splitmix64(state)) - 1.0) * scale;
    }
  }
}

nn::Vector HashEncoder::token_vector(std::string_view token) const {
  std::uint64_t state = fnv1a64(token) ^ spec_.seed;
  nn::Vector v(spec_.token_dim);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 2.0 * unit_interval(splitmix64(state)) - 1.0;
  return v / v.norm();
}

ContextualEncoding HashEncoder::encode(std::string_view text) const {
  auto tokens = text::tokenize(text);
  if (tokens.size() > spec_.max_tokens) tokens.resize(spec_.max_tokens);
  ContextualEncoding out;
  out.tokens.resize(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(spec_.token_dim));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.tokens.row(static_cast<Eigen::Index>(i)) = token_vector(tokens[i]).transpose();
  }
  if (tokens.empty()) {
    out.pooled = nn::Vector::Zero(spec_.embedding_dim);
  } else {
    out.pooled = projection_ * out.tokens.colwise().mean().transpose();
  }
  return out;
}

void register_encoder(const std::string& encoder_id, EncoderFactory factory) {
  std::lock_guard lock(registry_mutex);
  registry()[encoder_id] = std::move(factory);
}

std::unique_ptr<ContextualEncoder> make_encoder(const ContextualEncoderSpec& spec) {
  spec.validate();
  EncoderFactory factory;
  {
    std::lock_guard lock(registry_mutex);
    auto it = registry().find(spec.encoder_id);
    if (it == registry().end()) {
      throw ConfigError("contextual encoder '" + spec.encoder_id +
                        "' is not available in this build; set contextual.encoder.encoder_id to "
                        "\"hash-fallback-v1\" to use the built-in fallback encoder");
    }
    factory = it->second;
  }
  return factory(spec);
}

void ContextHeadConfig::validate() const {
  if (widths.empty() || filters == 0) throw ConfigError("context head sizes must be at least 1");
  for (auto w : widths) {
    if (w == 0) throw ConfigError("context head filter width must be at least 1");
  }
  if (learning_rate <= 0.0) throw ConfigError("context head learning rate must be positive");
}

nlohmann::json ContextHeadConfig::to_json() const {
  return {{"widths", widths},
          {"filters", filters},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate}};
}

ContextHeadConfig ContextHeadConfig::from_json(const nlohmann::json& j) {
  ContextHeadConfig c;
  try {
    c.widths = j.value("widths", c.widths);
    c.filters = j.value("filters", c.filters);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("context head config: ") + e.what());
  }
  c.validate();
  return c;
}

ContextHead::ContextHead(ContextHeadConfig config, std::size_t token_dim, std::uint64_t seed)
    : config_(std::move(config)), token_dim_(token_dim) {
  config_.validate();
  conv_ = nn::ConvBank(config_.widths, config_.filters, token_dim_);
  conv_.add_parameters(params_, "conv", derive_seed(seed, 1));
  const auto pooled = conv_.output_size();
  params_.add("output.weight", nn::glorot(1, pooled, pooled, 1, derive_seed(seed, 2)));
  params_.add("output.bias", nn::Matrix::Zero(1, 1));
  bind();
}

ContextHead::ContextHead(ContextHeadConfig config, std::size_t token_dim, nn::ParameterSet params)
    : config_(std::move(config)), token_dim_(token_dim) {
  ContextHead reference(config_, token_dim_, 0);
  if (params.names != reference.params_.names) {
    throw DataError("context head tensor names do not match its config");
  }
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    if (params.values[i].rows() != reference.params_.values[i].rows() ||
        params.values[i].cols() != reference.params_.values[i].cols()) {
      throw DataError("context head tensor '" + params.names[i] + "' has the wrong shape");
    }
  }
  params_ = std::move(params);
  conv_ = nn::ConvBank(config_.widths, config_.filters, token_dim_);
  bind();
}

void ContextHead::bind() {
  conv_.bind(params_.index("conv.w" + std::to_string(config_.widths.front()) + ".kernel"));
  out_w_ = params_.index("output.weight");
  out_b_ = params_.index("output.bias");
}

nn::RowMatrix ContextHead::padded(const nn::RowMatrix& tokens) const {
  if (tokens.cols() != static_cast<Eigen::Index>(token_dim_) && tokens.rows() > 0) {
    throw DataError("token matrix width " + std::to_string(tokens.cols()) + " differs from " +
                    std::to_string(token_dim_));
  }
  const auto rows = std::max<Eigen::Index>(tokens.rows(), static_cast<Eigen::Index>(conv_.max_width()));
  nn::RowMatrix out = nn::RowMatrix::Zero(rows, static_cast<Eigen::Index>(token_dim_));
  if (tokens.rows() > 0) out.topRows(tokens.rows()) = tokens;
  return out;
}

double ContextHead::logit(const nn::RowMatrix& input, nn::ConvBank::Cache* cache,
                          nn::Vector* pooled) const {
  nn::Vector p = conv_.forward(params_, input, cache);
  const double z = (params_.values[out_w_] * p)(0, 0) + params_.values[out_b_](0, 0);
  if (pooled) *pooled = std::move(p);
  return z;
}

double ContextHead::accumulate_gradient(const nn::RowMatrix& tokens, int target, nn::Gradients& grads,
                                        double scale) const {
  const nn::RowMatrix input = padded(tokens);
  nn::ConvBank::Cache cache;
  nn::Vector pooled;
  const double z = logit(input, &cache, &pooled);
  const double dz = scale * (nn::sigmoid(z) - target);
  grads[out_w_] += dz * pooled.transpose();
  grads[out_b_](0, 0) += dz;
  const nn::Vector dpooled = dz * params_.values[out_w_].transpose();
  conv_.backward(params_, input, cache, dpooled, grads, {});
  return nn::bce_with_logit(z, target);
}

double ContextHead::loss(const nn::RowMatrix& tokens, int target) const {
  return nn::bce_with_logit(logit(padded(tokens), nullptr, nullptr), target);
}

double ContextHead::predict(const nn::RowMatrix& tokens) const {
  return nn::sigmoid(logit(padded(tokens), nullptr, nullptr));
}

ContextHead ContextHead::train(std::span<const nn::RowMatrix> token_matrices, std::span<const int> targets,
                               const ContextHeadConfig& config, std::size_t token_dim,
                               std::uint64_t seed, std::size_t threads) {
  if (token_matrices.size() != targets.size()) {
    throw DataError("context head: matrix/target count mismatch");
  }
  const auto positives = std::count(targets.begin(), targets.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(targets.size())) {
    throw DataError("context head: training data must contain both classes");
  }
  ContextHead head(config, token_dim, seed);
  nn::TrainOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.adam.learning_rate = config.learning_rate;
  options.seed = derive_seed(seed, 3);
  options.threads = threads;
  head.history_ = nn::fit(
      head.params_, token_matrices.size(), options,
      [&](std::size_t i, nn::Gradients& grads, double scale, std::uint64_t) {
        return head.accumulate_gradient(token_matrices[i], targets[i], grads, scale);
      },
      "context head");
  head.params_.round_to_float();
  return head;
}

}  // namespace smishing
