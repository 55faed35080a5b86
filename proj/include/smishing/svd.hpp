#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

#include "smishing/nn.hpp"
#include "smishing/tfidf.hpp"

namespace smishing {

// Projection onto the top-k right singular directions of the mean-centred
// training matrix. In pass-through mode (native dimension <= k) inputs are
// copied unchanged and zero-padded to k.
struct SvdProjection {
  std::size_t k = 0;
  std::size_t dimension = 0;
  bool pass_through = false;
  nn::Matrix components;        // k x dimension, orthonormal rows
  nn::Vector singular_values;   // nonincreasing
  nn::Vector mean;              // dimension

  nn::Vector project(const nn::Vector& x) const;
  nn::Vector project(const SparseVector& x) const;
  // components^T * y + mean; the inverse on the component span.
  nn::Vector unproject(const nn::Vector& y) const;

  // Rounds stored values to float32, matching the persisted form.
  void round_to_float();
  void save(const std::filesystem::path& weights, const std::filesystem::path& shapes) const;
  static SvdProjection load(const std::filesystem::path& weights, const std::filesystem::path& shapes);
};

struct SvdOptions {
  std::size_t oversample = 10;
  std::size_t max_iterations = 100;
  double tolerance = 1e-12;
  std::uint64_t seed = 0;
};

// Rows of x are samples. Requires k <= min(rows, cols); throws DataError
// otherwise. Each component's largest-magnitude entry is made positive.
SvdProjection fit_svd(const nn::Matrix& x, std::size_t k, const SvdOptions& options = {});
SvdProjection fit_svd(std::span<const SparseVector> x, std::size_t k, const SvdOptions& options = {});

// Pass-through when the native dimension is <= k, fit_svd otherwise.
SvdProjection fit_projection(const nn::Matrix& x, std::size_t k, const SvdOptions& options = {});
SvdProjection fit_projection(std::span<const SparseVector> x, std::size_t k,
                             const SvdOptions& options = {});

}  // namespace smishing
