#include "smishing/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "smishing/error.hpp"
#include "smishing/random.hpp"

namespace smishing {

std::string_view to_string(StreamId id) {
  switch (id) {
    case StreamId::kSemantic:
      return "semantic";
    case StreamId::kStructural:
      return "structural";
    case StreamId::kChar:
      return "char";
    case StreamId::kContextual:
      return "contextual";
  }
  return "unknown";
}

StreamId parse_stream_id(std::string_view name) {
  for (auto id : kStreamOrder) {
    if (to_string(id) == name) return id;
  }
  throw ConfigError("unknown stream '" + std::string(name) + "'");
}

nn::Vector fuse(std::span<const StreamBlock> blocks, std::size_t k) {
  if (blocks.size() != kStreamCount) {
    throw DataError("fusion expects " + std::to_string(kStreamCount) + " blocks, got " +
                    std::to_string(blocks.size()));
  }
  nn::Vector out(static_cast<Eigen::Index>(k * kStreamCount));
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    if (blocks[i].stream != kStreamOrder[i]) {
      throw DataError("fusion block " + std::to_string(i) + " is '" +
                      std::string(to_string(blocks[i].stream)) + "', expected '" +
                      std::string(to_string(kStreamOrder[i])) + "'");
    }
    if (static_cast<std::size_t>(blocks[i].values.size()) != k) {
      throw DataError("fusion block '" + std::string(to_string(blocks[i].stream)) + "' has length " +
                      std::to_string(blocks[i].values.size()) + ", expected " + std::to_string(k));
    }
    out.segment(static_cast<Eigen::Index>(i * k), static_cast<Eigen::Index>(k)) = blocks[i].values;
  }
  return out;
}

void FusionConfig::validate() const {
  if (k == 0) throw ConfigError("fusion k must be at least 1");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("fusion hidden sizes must be at least 1");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("fusion dropout must be in [0, 1)");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("decision threshold must be in (0, 1)");
  if (learning_rate <= 0.0) throw ConfigError("fusion learning rate must be positive");
}

nlohmann::json FusionConfig::to_json() const {
  return {{"k", k},           {"hidden", hidden},         {"dropout", dropout},
          {"epochs", epochs}, {"batch_size", batch_size}, {"learning_rate", learning_rate},
          {"seed", seed},     {"threshold", threshold}};
}

FusionConfig FusionConfig::from_json(const nlohmann::json& j) {
  FusionConfig c;
  try {
    c.k = j.value("k", c.k);
    c.hidden = j.value("hidden", c.hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.threshold = j.value("threshold", c.threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("fusion config: ") + e.what());
  }
  c.validate();
  return c;
}

FusionModel::FusionModel(FusionConfig config, StreamMask active, std::uint64_t seed)
    : config_(std::move(config)), active_(active) {
  config_.validate();
  if (std::none_of(active_.begin(), active_.end(), [](bool a) { return a; })) {
    throw ConfigError("fusion needs at least one active stream");
  }
  const auto k = config_.k;
  params_.add("gate.weight", nn::glorot(kStreamCount, k, k, 1, derive_seed(seed, 1)));
  params_.add("gate.bias", nn::Matrix::Zero(kStreamCount, 1));
  std::size_t in = input_size();
  for (std::size_t l = 0; l < config_.hidden.size(); ++l) {
    const auto out = config_.hidden[l];
    params_.add("layer" + std::to_string(l) + ".weight", nn::glorot(out, in, in, out, derive_seed(seed, 2, l)));
    params_.add("layer" + std::to_string(l) + ".bias", nn::Matrix::Zero(out, 1));
    in = out;
  }
  params_.add("output.weight", nn::glorot(1, in, in, 1, derive_seed(seed, 3)));
  params_.add("output.bias", nn::Matrix::Zero(1, 1));
  bind();
}

FusionModel::FusionModel(FusionConfig config, StreamMask active, nn::ParameterSet params)
    : config_(std::move(config)), active_(active) {
  const FusionModel reference(config_, active_, 0);
  if (params.names != reference.params_.names) throw DataError("fusion tensor names do not match its config");
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    if (params.values[i].rows() != reference.params_.values[i].rows() ||
        params.values[i].cols() != reference.params_.values[i].cols()) {
      throw DataError("fusion tensor '" + params.names[i] + "' has the wrong shape");
    }
  }
  params_ = std::move(params);
  bind();
}

void FusionModel::bind() {
  gate_w_ = params_.index("gate.weight");
  gate_b_ = params_.index("gate.bias");
  layer_w_.clear();
  layer_b_.clear();
  for (std::size_t l = 0; l < config_.hidden.size(); ++l) {
    layer_w_.push_back(params_.index("layer" + std::to_string(l) + ".weight"));
    layer_b_.push_back(params_.index("layer" + std::to_string(l) + ".bias"));
  }
  out_w_ = params_.index("output.weight");
  out_b_ = params_.index("output.bias");
}

void FusionModel::forward(const nn::Vector& fused, Forward& f, std::uint64_t dropout_seed,
                          bool training) const {
  if (static_cast<std::size_t>(fused.size()) != input_size()) {
    throw DataError("fused vector has length " + std::to_string(fused.size()) + ", expected " +
                    std::to_string(input_size()));
  }
  const auto k = static_cast<Eigen::Index>(config_.k);
  const nn::Matrix& gw = params_.values[gate_w_];
  const nn::Matrix& gb = params_.values[gate_b_];
  std::array<double, kStreamCount> score{};
  double top = -INFINITY;
  std::size_t n_active = 0;
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    if (!active_[i]) continue;
    ++n_active;
    const auto at = static_cast<Eigen::Index>(i);
    score[i] = gw.row(at).dot(fused.segment(at * k, k)) + gb(at, 0);
    top = std::max(top, score[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    f.alpha[i] = active_[i] ? std::exp(score[i] - top) : 0.0;
    total += f.alpha[i];
  }
  f.gated = nn::Vector::Zero(fused.size());
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    f.alpha[i] /= total;
    const auto at = static_cast<Eigen::Index>(i);
    if (active_[i]) f.gated.segment(at * k, k) = static_cast<double>(n_active) * f.alpha[i] * fused.segment(at * k, k);
  }
  f.hidden.resize(config_.hidden.size());
  f.masks.resize(config_.hidden.size());
  const nn::Vector* in = &f.gated;
  nn::Vector dropped;
  for (std::size_t l = 0; l < config_.hidden.size(); ++l) {
    f.hidden[l] = (params_.values[layer_w_[l]] * *in + params_.values[layer_b_[l]]).cwiseMax(0.0);
    if (training && config_.dropout > 0.0) {
      f.masks[l] = nn::dropout_mask(config_.hidden[l], config_.dropout, derive_seed(dropout_seed, l));
    } else {
      f.masks[l] = nn::Vector::Ones(config_.hidden[l]);
    }
    dropped = f.hidden[l].cwiseProduct(f.masks[l]);
    in = &dropped;
  }
  f.logit = (params_.values[out_w_] * *in)(0, 0) + params_.values[out_b_](0, 0);
}

double FusionModel::accumulate_gradient(const nn::Vector& fused, int target, nn::Gradients& grads,
                                        double scale, std::uint64_t dropout_seed, bool training) const {
  Forward f;
  forward(fused, f, dropout_seed, training);
  const double dz = scale * (nn::sigmoid(f.logit) - target);
  const std::size_t layers = config_.hidden.size();
  auto layer_input = [&](std::size_t l) -> nn::Vector {
    return l == 0 ? f.gated : nn::Vector(f.hidden[l - 1].cwiseProduct(f.masks[l - 1]));
  };
  const nn::Vector last = layer_input(layers);
  grads[out_w_] += dz * last.transpose();
  grads[out_b_](0, 0) += dz;
  nn::Vector d = dz * params_.values[out_w_].transpose();
  for (std::size_t l = layers; l-- > 0;) {
    d = d.cwiseProduct(f.masks[l]);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (f.hidden[l](i) <= 0.0) d(i) = 0.0;
    }
    grads[layer_w_[l]] += d * layer_input(l).transpose();
    grads[layer_b_[l]] += d;
    d = params_.values[layer_w_[l]].transpose() * d;
  }
  // d is now dLoss/dgated. Back through the gates.
  const auto k = static_cast<Eigen::Index>(config_.k);
  double n_active = 0.0;
  for (bool a : active_) n_active += a ? 1.0 : 0.0;
  std::array<double, kStreamCount> dalpha{};
  double weighted = 0.0;
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    if (!active_[i]) continue;
    const auto at = static_cast<Eigen::Index>(i);
    dalpha[i] = n_active * d.segment(at * k, k).dot(fused.segment(at * k, k));
    weighted += f.alpha[i] * dalpha[i];
  }
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    if (!active_[i]) continue;
    const auto at = static_cast<Eigen::Index>(i);
    const double dscore = f.alpha[i] * (dalpha[i] - weighted);
    grads[gate_w_].row(at) += dscore * fused.segment(at * k, k).transpose();
    grads[gate_b_](at, 0) += dscore;
  }
  return nn::bce_with_logit(f.logit, target);
}

double FusionModel::loss(const nn::Vector& fused, int target, std::uint64_t dropout_seed,
                         bool training) const {
  Forward f;
  forward(fused, f, dropout_seed, training);
  return nn::bce_with_logit(f.logit, target);
}

FusionOutput FusionModel::predict(const nn::Vector& fused) const {
  Forward f;
  forward(fused, f, 0, false);
  return {nn::sigmoid(f.logit), f.alpha};
}

FusionModel FusionModel::train(std::span<const nn::Vector> fused, std::span<const int> targets,
                               const FusionConfig& config, StreamMask active, std::size_t threads) {
  if (fused.size() != targets.size()) throw DataError("fusion: vector/target count mismatch");
  const auto positives = std::count(targets.begin(), targets.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(targets.size())) {
    throw DataError("fusion: training data must contain both classes");
  }
  FusionModel model(config, active, config.seed);
  nn::TrainOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.adam.learning_rate = config.learning_rate;
  options.seed = derive_seed(config.seed, 4);
  options.threads = threads;
  model.history_ = nn::fit(
      model.params_, fused.size(), options,
      [&](std::size_t i, nn::Gradients& grads, double scale, std::uint64_t dropout_seed) {
        return model.accumulate_gradient(fused[i], targets[i], grads, scale, dropout_seed, true);
      },
      "fusion");
  model.params_.round_to_float();
  return model;
}

}  // namespace smishing
