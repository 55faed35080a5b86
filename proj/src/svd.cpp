#include "smishing/svd.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCore>

#include "smishing/error.hpp"
#include "smishing/random.hpp"

namespace smishing {
namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

nn::Matrix orthonormal_basis(const nn::Matrix& m) {
  Eigen::HouseholderQR<nn::Matrix> qr(m);
  return qr.householderQ() * nn::Matrix::Identity(m.rows(), m.cols());
}

// Subspace iteration on the implicitly centred matrix. multiply(V) must
// return Xc * V and multiply_t(U) must return Xc^T * U.
template <typename Multiply, typename MultiplyT>
SvdProjection subspace_iteration(std::size_t n, std::size_t d, std::size_t k, nn::Vector mean,
                                 const SvdOptions& options, Multiply multiply, MultiplyT multiply_t) {
  if (k == 0) throw ConfigError("SVD target dimension must be at least 1");
  if (k > n || k > d) {
    throw DataError("SVD target dimension " + std::to_string(k) + " exceeds min(samples " +
                    std::to_string(n) + ", dimension " + std::to_string(d) + ")");
  }
  const std::size_t b = std::min({d, n, k + options.oversample});
  Rng rng(options.seed);
  nn::Matrix v(d, b);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
  v = orthonormal_basis(v);

  nn::Vector values;
  nn::Matrix vectors;
  nn::Vector previous = nn::Vector::Constant(k, -1.0);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const nn::Matrix y = multiply(v);
    // Rayleigh-Ritz on the current subspace.
    Eigen::SelfAdjointEigenSolver<nn::Matrix> eig(y.transpose() * y);
    values = eig.eigenvalues().reverse().cwiseMax(0.0).cwiseSqrt();
    vectors = v * eig.eigenvectors().rowwise().reverse();
    const nn::Vector top = values.head(k);
    const double scale = std::max(top(0), 1e-300);
    const bool converged = (top - previous).cwiseAbs().maxCoeff() <= options.tolerance * scale;
    previous = top;
    if (b == d || (converged && it >= 4)) break;
    v = orthonormal_basis(multiply_t(y));
  }

  SvdProjection p;
  p.k = k;
  p.dimension = d;
  p.mean = std::move(mean);
  p.singular_values = values.head(k);
  p.components = vectors.leftCols(k).transpose();
  for (Eigen::Index r = 0; r < p.components.rows(); ++r) {
    Eigen::Index at = 0;
    p.components.row(r).cwiseAbs().maxCoeff(&at);
    if (p.components(r, at) < 0.0) p.components.row(r) *= -1.0;
  }
  return p;
}

SvdProjection make_pass_through(std::size_t d, std::size_t k) {
  SvdProjection p;
  p.k = k;
  p.dimension = d;
  p.pass_through = true;
  p.components = nn::Matrix::Zero(0, d);
  p.singular_values = nn::Vector::Zero(0);
  p.mean = nn::Vector::Zero(d);
  return p;
}

}  // namespace

nn::Vector SvdProjection::project(const nn::Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension) {
    throw DataError("projection input has dimension " + std::to_string(x.size()) + ", expected " +
                    std::to_string(dimension));
  }
  if (pass_through) {
    nn::Vector out = nn::Vector::Zero(k);
    out.head(x.size()) = x;
    return out;
  }
  return components * (x - mean);
}

nn::Vector SvdProjection::project(const SparseVector& x) const {
  if (x.dimension != dimension) {
    throw DataError("projection input has dimension " + std::to_string(x.dimension) + ", expected " +
                    std::to_string(dimension));
  }
  if (pass_through) {
    nn::Vector out = nn::Vector::Zero(k);
    for (const auto& [i, v] : x.entries) out(i) = v;
    return out;
  }
  nn::Vector out = -(components * mean);
  for (const auto& [i, v] : x.entries) out += v * components.col(i);
  return out;
}

nn::Vector SvdProjection::unproject(const nn::Vector& y) const {
  if (pass_through) return y.head(static_cast<Eigen::Index>(dimension));
  return components.transpose() * y + mean;
}

void SvdProjection::round_to_float() {
  components = components.cast<float>().cast<double>();
  singular_values = singular_values.cast<float>().cast<double>();
  mean = mean.cast<float>().cast<double>();
}

void SvdProjection::save(const std::filesystem::path& weights, const std::filesystem::path& shapes) const {
  nn::ParameterSet set;
  set.add("components", components);
  set.add("singular_values", singular_values);
  set.add("mean", mean);
  set.add("meta", (nn::Matrix(1, 3) << static_cast<double>(k), static_cast<double>(dimension),
                   pass_through ? 1.0 : 0.0)
                      .finished());
  set.save(weights, shapes);
}

SvdProjection SvdProjection::load(const std::filesystem::path& weights, const std::filesystem::path& shapes) {
  const auto set = nn::ParameterSet::load(weights, shapes);
  SvdProjection p;
  const nn::Matrix& meta = set.values[set.index("meta")];
  if (meta.size() != 3) throw DataError("malformed projection " + weights.string());
  p.k = static_cast<std::size_t>(meta(0, 0));
  p.dimension = static_cast<std::size_t>(meta(0, 1));
  p.pass_through = meta(0, 2) != 0.0;
  p.components = set.values[set.index("components")];
  p.singular_values = set.values[set.index("singular_values")];
  p.mean = set.values[set.index("mean")];
  const auto rows = p.pass_through ? 0u : p.k;
  if (static_cast<std::size_t>(p.components.rows()) != rows ||
      static_cast<std::size_t>(p.components.cols()) != p.dimension ||
      static_cast<std::size_t>(p.mean.size()) != p.dimension) {
    throw DataError("projection shapes in " + weights.string() + " are inconsistent");
  }
  return p;
}

SvdProjection fit_svd(const nn::Matrix& x, std::size_t k, const SvdOptions& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  nn::Vector mean = n ? nn::Vector(x.colwise().mean().transpose()) : nn::Vector::Zero(d);
  const nn::Matrix centred = x.rowwise() - mean.transpose();
  return subspace_iteration(
      n, d, k, mean, options, [&](const nn::Matrix& v) -> nn::Matrix { return centred * v; },
      [&](const nn::Matrix& u) -> nn::Matrix { return centred.transpose() * u; });
}

SvdProjection fit_svd(std::span<const SparseVector> x, std::size_t k, const SvdOptions& options) {
  const std::size_t n = x.size();
  const std::size_t d = n ? x[0].dimension : 0;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < n; ++r) {
    if (x[r].dimension != d) throw DataError("SVD inputs differ in dimension");
    for (const auto& [c, v] : x[r].entries) triplets.emplace_back(r, c, v);
  }
  SparseRows a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  a.setFromTriplets(triplets.begin(), triplets.end());
  nn::Vector mean = nn::Vector::Zero(d);
  for (const auto& t : triplets) mean(t.col()) += t.value();
  if (n) mean /= static_cast<double>(n);
  return subspace_iteration(
      n, d, k, mean, options,
      [&](const nn::Matrix& v) -> nn::Matrix {
        nn::Matrix out = a * v;
        out.rowwise() -= (mean.transpose() * v);
        return out;
      },
      [&](const nn::Matrix& u) -> nn::Matrix {
        nn::Matrix out = a.transpose() * u;
        out -= mean * u.colwise().sum();
        return out;
      });
}

SvdProjection fit_projection(const nn::Matrix& x, std::size_t k, const SvdOptions& options) {
  if (static_cast<std::size_t>(x.cols()) <= k) return make_pass_through(x.cols(), k);
  return fit_svd(x, k, options);
}

SvdProjection fit_projection(std::span<const SparseVector> x, std::size_t k, const SvdOptions& options) {
  const std::size_t d = x.empty() ? 0 : x[0].dimension;
  if (d <= k) return make_pass_through(d, k);
  return fit_svd(x, k, options);
}

}  // namespace smishing
