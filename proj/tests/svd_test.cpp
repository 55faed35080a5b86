#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smishing/error.hpp"
#include "smishing/random.hpp"
#include "smishing/svd.hpp"

namespace smishing {
namespace {

using oracle::random_matrix;
using oracle::reconstruction_error;

TEST(Svd, ExactRankTwoReconstruction) {
  Rng rng(1);
  const nn::Matrix basis = random_matrix(rng, 2, 6);
  const nn::Matrix coeffs = random_matrix(rng, 30, 2);
  const nn::Matrix x = coeffs * basis;
  const auto p = fit_svd(x, 2);
  EXPECT_LT(reconstruction_error(x, p), 1e-9);
}

TEST(Svd, DiagonalDirectionIsPositive) {
  nn::Matrix x(5, 2);
  for (int i = 0; i < 5; ++i) x.row(i) << i - 2.0, i - 2.0;
  const auto p = fit_svd(x, 1);
  EXPECT_NEAR(p.components(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(p.components(0, 1), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Svd, RandomFiftyByTenMatchesFullSvdOracle) {
  Rng rng(2);
  const nn::Matrix x = random_matrix(rng, 50, 10);
  const auto p = fit_svd(x, 5);
  EXPECT_NEAR(reconstruction_error(x, p), oracle::discarded_energy(x, 5), 1e-8);
}

TEST(Svd, PropertySuiteOnRandomShapes) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(59));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(12));
    const std::size_t k = 1 + rng.below(static_cast<std::size_t>(std::min(n, d)));
    nn::Matrix x = random_matrix(rng, n, d);
    if (trial % 3 == 0) x.col(0) *= 10.0;
    SvdOptions options;
    options.seed = static_cast<std::uint64_t>(trial);
    const auto p = fit_svd(x, k, options);
    const nn::Matrix gram = p.components * p.components.transpose();
    ASSERT_LT((gram - nn::Matrix::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-6);
    for (Eigen::Index i = 1; i < p.singular_values.size(); ++i) {
      ASSERT_LE(p.singular_values(i), p.singular_values(i - 1));
    }
    ASSERT_NEAR(reconstruction_error(x, p), oracle::discarded_energy(x, k), 1e-8)
        << "n=" << n << " d=" << d << " k=" << k;
    const auto again = fit_svd(x, k, options);
    ASSERT_EQ(again.components, p.components);
    for (Eigen::Index r = 0; r < p.components.rows(); ++r) {
      Eigen::Index at = 0;
      p.components.row(r).cwiseAbs().maxCoeff(&at);
      ASSERT_GT(p.components(r, at), 0.0);
    }
  }
}

TEST(Svd, SparseAndDenseFitsAgree) {
  Rng rng(4);
  std::vector<SparseVector> rows;
  nn::Matrix dense = nn::Matrix::Zero(40, 30);
  for (Eigen::Index r = 0; r < 40; ++r) {
    SparseVector v;
    v.dimension = 30;
    for (std::uint32_t c = 0; c < 30; ++c) {
      if (rng.bernoulli(0.2)) {
        const double value = rng.uniform();
        v.entries.emplace_back(c, value);
        dense(r, c) = value;
      }
    }
    rows.push_back(v);
  }
  const auto sp = fit_svd(std::span<const SparseVector>(rows), 4);
  const auto de = fit_svd(dense, 4);
  EXPECT_LT((sp.singular_values - de.singular_values).cwiseAbs().maxCoeff(), 1e-9);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const nn::Vector row = dense.row(static_cast<Eigen::Index>(r)).transpose();
    EXPECT_LT((sp.project(rows[r]) - de.project(row)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((sp.project(rows[r]) - sp.project(row)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_NEAR(reconstruction_error(dense, sp), oracle::discarded_energy(dense, 4), 1e-8);
}

TEST(Svd, LargeSparseSubspaceIterationConverges) {
  Rng rng(5);
  std::vector<SparseVector> rows;
  nn::Matrix dense = nn::Matrix::Zero(300, 200);
  for (Eigen::Index r = 0; r < 300; ++r) {
    SparseVector v;
    v.dimension = 200;
    const auto topic = static_cast<std::uint32_t>(rng.below(5));
    for (std::uint32_t c = 0; c < 200; ++c) {
      const bool on = c / 40 == topic ? rng.bernoulli(0.3) : rng.bernoulli(0.02);
      if (on) {
        v.entries.emplace_back(c, 1.0);
        dense(r, c) = 1.0;
      }
    }
    rows.push_back(v);
  }
  const auto p = fit_svd(std::span<const SparseVector>(rows), 8);
  Eigen::JacobiSVD<nn::Matrix> oracle(dense.rowwise() - dense.colwise().mean());
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(p.singular_values(i), oracle.singularValues()(i), 1e-8);
}

TEST(Svd, ProjectionContractsAndCentres) {
  Rng rng(6);
  const nn::Matrix x = random_matrix(rng, 20, 6);
  const auto p = fit_svd(x, 3);
  EXPECT_LT(p.project(p.mean).norm(), 1e-12);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const nn::Vector row = x.row(r).transpose();
    EXPECT_LE((p.unproject(p.project(row)) - p.mean).norm(), (row - p.mean).norm() + 1e-12);
  }
  EXPECT_THROW(p.project(nn::Vector::Zero(5)), DataError);
}

TEST(Svd, ErrorsAndPassThrough) {
  const nn::Matrix x = nn::Matrix::Ones(3, 5);
  EXPECT_THROW(fit_svd(x, 4), DataError);
  const auto p = fit_projection(x, 8);
  EXPECT_TRUE(p.pass_through);
  nn::Vector v(5);
  v << 1, 2, 3, 4, 5;
  nn::Vector expected = nn::Vector::Zero(8);
  expected.head(5) = v;
  EXPECT_EQ(p.project(v), expected);
}

TEST(Svd, SaveLoadRoundTrip) {
  Rng rng(7);
  auto p = fit_svd(random_matrix(rng, 15, 7), 3);
  p.round_to_float();
  const auto dir = std::filesystem::temp_directory_path() / "smishing_svd_test";
  std::filesystem::create_directories(dir);
  p.save(dir / "p.f32", dir / "p.json");
  const auto q = SvdProjection::load(dir / "p.f32", dir / "p.json");
  EXPECT_EQ(q.components, p.components);
  EXPECT_EQ(q.mean, p.mean);
  EXPECT_EQ(q.k, 3u);
  EXPECT_FALSE(q.pass_through);
}

TEST(Svd, GoldenFixtureProjection) {
  nn::Matrix x(4, 3);
  x << 1, 0, 2,
       0, 1, 1,
       3, 1, 0,
       2, 2, 1;
  const auto p = fit_svd(x, 2);
  nn::Vector probe(3);
  probe << 1, 1, 1;
  // Reference values from numpy.linalg.svd of the centred matrix.
  const auto y = p.project(probe);
  EXPECT_NEAR(y(0), -0.42201481437299282, 1e-12);
  EXPECT_NEAR(y(1), 0.22454939255564338, 1e-12);
}

}  // namespace
}  // namespace smishing
