#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace smishing::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Named trainable tensors. Gradients use the same layout.
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Matrix> values;

  std::size_t add(std::string name, Matrix value);
  std::size_t index(const std::string& name) const;
  std::size_t scalar_count() const;
  std::vector<Matrix> zeros_like() const;

  // Rounds every value to the nearest float32 so that in-memory models match
  // their persisted form exactly.
  void round_to_float();

  // Raw little-endian float32 tensors plus a JSON shape manifest.
  void save(const std::filesystem::path& weights, const std::filesystem::path& shapes) const;
  static ParameterSet load(const std::filesystem::path& weights, const std::filesystem::path& shapes);
};

using Gradients = std::vector<Matrix>;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy of sigmoid(logit) against a 0/1 target, computed
// from the logit for numerical stability.
inline double bce_with_logit(double logit, int target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig config);
  void step(ParameterSet& params, const Gradients& grads);

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

// Glorot-uniform initialisation.
Matrix glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              std::uint64_t seed);

// Parallel 1-D convolutions (one per width, ReLU) each followed by a global
// max pool over positions. Input rows are positions, columns channels.
class ConvBank {
 public:
  ConvBank() = default;
  ConvBank(std::vector<std::size_t> widths, std::size_t filters, std::size_t channels)
      : widths_(std::move(widths)), filters_(filters), channels_(channels) {}

  // Registers one weight ((width*channels) x filters) and one bias (1 x
  // filters) per width. Returns the index of the first tensor.
  std::size_t add_parameters(ParameterSet& params, const std::string& prefix, std::uint64_t seed) const;
  void bind(std::size_t first_param) { first_param_ = first_param; }

  std::size_t output_size() const { return widths_.size() * filters_; }
  std::size_t max_width() const;
  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t filters() const { return filters_; }

  struct Cache {
    std::vector<Eigen::VectorXi> argmax;
    std::vector<Vector> max_value;
  };

  // input must have at least max_width() rows.
  Vector forward(const ParameterSet& params, const RowMatrix& input, Cache* cache) const;

  // Accumulates parameter gradients. When input_grad is set it is called
  // with (row, gradient row) for every contribution to the input.
  void backward(const ParameterSet& params, const RowMatrix& input, const Cache& cache,
                const Vector& pooled_grad, Gradients& grads,
                const std::function<void(std::size_t, const Eigen::RowVectorXd&)>& input_grad) const;

 private:
  std::vector<std::size_t> widths_;
  std::size_t filters_ = 0;
  std::size_t channels_ = 0;
  std::size_t first_param_ = 0;
};

struct TrainOptions {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

struct TrainingHistory {
  // Mean training-mode loss over each epoch.
  std::vector<double> epoch_loss;

  nlohmann::json to_json() const { return {{"epoch_loss", epoch_loss}}; }
  static TrainingHistory from_json(const nlohmann::json& j) {
    return {j.at("epoch_loss").get<std::vector<double>>()};
  }
};

// Per-sample gradient accumulator: adds scale * dLoss/dParams into grads and
// returns the sample loss. dropout_seed drives the sample's dropout masks.
using SampleGradient =
    std::function<double(std::size_t sample, Gradients& grads, double scale, std::uint64_t dropout_seed)>;

// Minibatch Adam over n samples. Gradient accumulation is split into a fixed
// number of chunks summed in order, so results do not depend on the thread
// count. Throws TrainingError when the loss becomes non-finite.
TrainingHistory fit(ParameterSet& params, std::size_t n, const TrainOptions& options,
                    const SampleGradient& sample_gradient, std::string_view model_name);

// Inverted dropout mask (entries 0 or 1/(1-rate)).
Vector dropout_mask(std::size_t size, double rate, std::uint64_t seed);

}  // namespace smishing::nn
