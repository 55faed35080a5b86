#include "smishing/nn.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <thread>

#include "smishing/error.hpp"
#include "smishing/log.hpp"
#include "smishing/random.hpp"

namespace smishing::nn {
namespace {

constexpr std::size_t kGradientChunks = 4;

}  // namespace

std::size_t ParameterSet::add(std::string name, Matrix value) {
  names.push_back(std::move(name));
  values.push_back(std::move(value));
  return values.size() - 1;
}

std::size_t ParameterSet::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("missing tensor '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += static_cast<std::size_t>(v.size());
  return n;
}

std::vector<Matrix> ParameterSet::zeros_like() const {
  std::vector<Matrix> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(Matrix::Zero(v.rows(), v.cols()));
  return out;
}

void ParameterSet::round_to_float() {
  for (auto& v : values) v = v.cast<float>().cast<double>();
}

void ParameterSet::save(const std::filesystem::path& weights,
                        const std::filesystem::path& shapes) const {
  std::ofstream out(weights, std::ios::binary);
  if (!out) throw DataError("cannot write " + weights.string());
  nlohmann::json manifest{{"dtype", "float32"}, {"endianness", "little"}, {"order", "row-major"}};
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    const Matrix& m = values[t];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
        const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                               static_cast<char>((bits >> 16) & 0xFF),
                               static_cast<char>((bits >> 24) & 0xFF)};
        out.write(bytes, 4);
      }
    }
    tensors.push_back({{"name", names[t]}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::size_t>(m.size());
  }
  manifest["tensors"] = tensors;
  manifest["count"] = offset;
  std::ofstream(shapes, std::ios::binary) << manifest.dump(2) << '\n';
}

ParameterSet ParameterSet::load(const std::filesystem::path& weights,
                                const std::filesystem::path& shapes) {
  std::ifstream shape_in(shapes, std::ios::binary);
  if (!shape_in) throw DataError("cannot read " + shapes.string());
  nlohmann::json manifest = nlohmann::json::parse(shape_in, nullptr, false);
  if (manifest.is_discarded() || manifest.value("dtype", "") != "float32") {
    throw DataError("malformed shape manifest " + shapes.string());
  }
  std::ifstream in(weights, std::ios::binary);
  if (!in) throw DataError("cannot read " + weights.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ParameterSet params;
  try {
    const auto count = manifest.at("count").get<std::size_t>();
    if (bytes.size() != 4 * count) {
      throw DataError("weight file " + weights.string() + " has " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(4 * count));
    }
    for (const auto& t : manifest.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<std::size_t>();
      const auto cols = t.at("shape").at(1).get<std::size_t>();
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset + rows * cols > count) throw DataError("tensor out of range in " + shapes.string());
      Matrix m(rows, cols);
      std::size_t k = offset * 4;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c, k += 4) {
          const std::uint32_t bits = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[k])) |
                                     static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[k + 1])) << 8 |
                                     static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[k + 2])) << 16 |
                                     static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[k + 3])) << 24;
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::bit_cast<float>(bits);
        }
      }
      if (!m.allFinite()) throw DataError("non-finite weights in " + weights.string());
      params.add(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed shape manifest " + shapes.string() + ": " + e.what());
  }
  return params;
}

Adam::Adam(const ParameterSet& params, AdamConfig config)
    : config_(config), m_(params.zeros_like()), v_(params.zeros_like()) {}

void Adam::step(ParameterSet& params, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
    params.values[i].array() -= config_.learning_rate * (m_[i].array() / c1) /
                                ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

Matrix glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              std::uint64_t seed) {
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-limit, limit);
  }
  return m;
}

std::size_t ConvBank::add_parameters(ParameterSet& params, const std::string& prefix,
                                     std::uint64_t seed) const {
  const std::size_t first = params.values.size();
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    const std::size_t w = widths_[i];
    const std::string tag = prefix + ".w" + std::to_string(w);
    params.add(tag + ".kernel",
               glorot(w * channels_, filters_, w * channels_, filters_, derive_seed(seed, i)));
    params.add(tag + ".bias", Matrix::Zero(1, filters_));
  }
  return first;
}

std::size_t ConvBank::max_width() const {
  return widths_.empty() ? 0 : *std::max_element(widths_.begin(), widths_.end());
}

Vector ConvBank::forward(const ParameterSet& params, const RowMatrix& input, Cache* cache) const {
  const auto positions_total = static_cast<std::size_t>(input.rows());
  Vector pooled(output_size());
  if (cache) {
    cache->argmax.resize(widths_.size());
    cache->max_value.resize(widths_.size());
  }
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    const std::size_t w = widths_[i];
    const Matrix& kernel = params.values[first_param_ + 2 * i];
    const Matrix& bias = params.values[first_param_ + 2 * i + 1];
    const std::size_t positions = positions_total - w + 1;
    // Row-major rows t..t+w-1 are contiguous, so each window is one row of
    // this strided view.
    Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>> windows(
        input.data(), static_cast<Eigen::Index>(positions), static_cast<Eigen::Index>(w * channels_),
        Eigen::OuterStride<>(static_cast<Eigen::Index>(channels_)));
    const Matrix response = windows * kernel;
    Eigen::VectorXi argmax(filters_);
    Vector best(filters_);
    for (std::size_t f = 0; f < filters_; ++f) {
      Eigen::Index row = 0;
      best(f) = response.col(f).maxCoeff(&row) + bias(0, f);
      argmax(f) = static_cast<int>(row);
      pooled(i * filters_ + f) = std::max(best(f), 0.0);
    }
    if (cache) {
      cache->argmax[i] = std::move(argmax);
      cache->max_value[i] = std::move(best);
    }
  }
  return pooled;
}

void ConvBank::backward(
    const ParameterSet& params, const RowMatrix& input, const Cache& cache, const Vector& pooled_grad,
    Gradients& grads,
    const std::function<void(std::size_t, const Eigen::RowVectorXd&)>& input_grad) const {
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    const std::size_t w = widths_[i];
    const Matrix& kernel = params.values[first_param_ + 2 * i];
    Matrix& kernel_grad = grads[first_param_ + 2 * i];
    Matrix& bias_grad = grads[first_param_ + 2 * i + 1];
    for (std::size_t f = 0; f < filters_; ++f) {
      const double g = pooled_grad(i * filters_ + f);
      if (g == 0.0 || cache.max_value[i](f) <= 0.0) continue;
      const auto t = static_cast<std::size_t>(cache.argmax[i](f));
      Eigen::Map<const Eigen::RowVectorXd> window(input.data() + t * channels_,
                                                  static_cast<Eigen::Index>(w * channels_));
      kernel_grad.col(f) += g * window.transpose();
      bias_grad(0, f) += g;
      if (input_grad) {
        for (std::size_t r = 0; r < w; ++r) {
          input_grad(t + r, g * kernel.col(f)
                                    .segment(static_cast<Eigen::Index>(r * channels_),
                                             static_cast<Eigen::Index>(channels_))
                                    .transpose());
        }
      }
    }
  }
}

Vector dropout_mask(std::size_t size, double rate, std::uint64_t seed) {
  Vector mask = Vector::Ones(size);
  if (rate <= 0.0) return mask;
  Rng rng(seed);
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < size; ++i) mask(i) = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

TrainingHistory fit(ParameterSet& params, std::size_t n, const TrainOptions& options,
                    const SampleGradient& sample_gradient, std::string_view model_name) {
  if (n == 0) throw TrainingError(std::string(model_name) + ": no training samples");
  TrainingHistory history;
  Adam adam(params, options.adam);
  Rng order_rng(derive_seed(options.seed, 0x6f72646572));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t threads =
      std::min(kGradientChunks, options.threads ? options.threads
                                                : std::max(1u, std::thread::hardware_concurrency()));
  std::vector<Gradients> chunk_grads(kGradientChunks, params.zeros_like());
  std::vector<double> chunk_loss(kGradientChunks, 0.0);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      auto run_chunk = [&](std::size_t c) {
        for (auto& g : chunk_grads[c]) g.setZero();
        chunk_loss[c] = 0.0;
        const std::size_t size = end - start;
        const std::size_t lo = start + size * c / kGradientChunks;
        const std::size_t hi = start + size * (c + 1) / kGradientChunks;
        for (std::size_t k = lo; k < hi; ++k) {
          const std::size_t sample = order[k];
          chunk_loss[c] += sample_gradient(sample, chunk_grads[c], scale,
                                           derive_seed(options.seed, epoch + 1, sample));
        }
      };
      if (threads <= 1) {
        for (std::size_t c = 0; c < kGradientChunks; ++c) run_chunk(c);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
          pool.emplace_back([&, t] {
            for (std::size_t c = t; c < kGradientChunks; c += threads) run_chunk(c);
          });
        }
      }
      for (std::size_t c = 1; c < kGradientChunks; ++c) {
        for (std::size_t p = 0; p < chunk_grads[0].size(); ++p) chunk_grads[0][p] += chunk_grads[c][p];
        chunk_loss[0] += chunk_loss[c];
      }
      if (!std::isfinite(chunk_loss[0])) {
        throw TrainingError(std::string(model_name) + ": non-finite loss in epoch " +
                            std::to_string(epoch + 1) + " (batch starting at " +
                            std::to_string(start) + "); reduce the learning rate");
      }
      for (const auto& g : chunk_grads[0]) {
        if (!g.allFinite()) {
          throw TrainingError(std::string(model_name) + ": non-finite gradient in epoch " +
                              std::to_string(epoch + 1) + "; reduce the learning rate");
        }
      }
      adam.step(params, chunk_grads[0]);
      epoch_loss += chunk_loss[0];
    }
    history.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    log::debug(std::string(model_name) + " epoch " + std::to_string(epoch + 1) + " loss " +
               std::to_string(history.epoch_loss.back()));
  }
  return history;
}

}  // namespace smishing::nn
