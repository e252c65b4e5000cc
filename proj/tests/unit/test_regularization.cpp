#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "posenc/regularization.hpp"

using namespace posenc;

namespace {

EmbeddingTable rows(const std::vector<std::vector<double>>& r) {
  Matrix h(r.size(), r.front().size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r[i].size(); ++j) h(i, j) = r[i][j];
  return EmbeddingTable(BinGrid(0, 1, r.size()), Interpolation::CubicHermite, h, Matrix());
}

// Central differences of smoothness_loss with respect to every value entry.
Matrix fd_gradient(EmbeddingTable t, double eps) {
  Matrix g(t.n_bin(), t.dim());
  for (std::size_t k = 0; k < t.values().size(); ++k) {
    double& p = t.values().flat()[k];
    const double keep = p;
    p = keep + eps;
    const double up = smoothness_loss(t).loss;
    p = keep - eps;
    const double dn = smoothness_loss(t).loss;
    p = keep;
    g.flat()[k] = (up - dn) / (2 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("smoothness_loss examples") {
  CHECK(smoothness_loss(rows({{1, 0}, {1, 0}, {1, 0}, {1, 0}})).loss == 0.0);
  const auto r = smoothness_loss(rows({{1, 0}, {0, 1}}));
  CHECK(r.numerator == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r.denominator == 1.0);
  CHECK(std::abs(r.loss - std::sqrt(2.0)) <= 1e-12);
  CHECK_FALSE(r.degenerate);
}

TEST_CASE("smoothness_loss matches a loop recomputation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = oracle::random_table(8, 3, Interpolation::CubicHermite, seed);
    CHECK(std::abs(smoothness_loss(t).loss - oracle::smoothness(t)) <= 1e-12);
  }
}

TEST_CASE("degenerate denominator") {
  EmbeddingTable t(BinGrid(0, 1, 5), 3, Interpolation::CubicHermite);
  auto r = smoothness_loss(t);
  CHECK(r.degenerate);
  CHECK(r.loss == 0.0);
  auto g = smoothness_backward(t);
  CHECK(g.degenerate);
  for (double v : g.grad.values.flat()) CHECK(v == 0.0);
  // only the last row is non-zero: still degenerate, it is outside the denominator
  t.values()(4, 0) = 1.0;
  CHECK(smoothness_loss(t).degenerate);
}

TEST_CASE("smoothness_loss invariances") {
  const auto base = oracle::random_table(10, 4, Interpolation::CubicHermite, 77);
  const double l0 = smoothness_loss(base).loss;
  for (double f : {0.1, 3.0, -2.0}) {
    auto t = base;
    for (double& v : t.values().flat()) v *= f;
    CHECK(std::abs(smoothness_loss(t).loss - l0) <= 1e-10);
  }
  // column permutation
  auto p = base;
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  for (std::size_t i = 0; i < p.n_bin(); ++i)
    for (std::size_t j = 0; j < 4; ++j) p.values()(i, j) = base.values()(i, perm[j]);
  CHECK(std::abs(smoothness_loss(p).loss - l0) <= 1e-12);
  // tangents are not read
  auto q = base;
  for (double& v : q.tangents().flat()) v += 5.0;
  CHECK(smoothness_loss(q).loss == l0);
}

TEST_CASE("smoothness_backward") {
  SUBCASE("constant non-zero table has zero gradient") {
    const auto g = smoothness_backward(rows({{0.5, -1}, {0.5, -1}, {0.5, -1}}));
    for (double v : g.grad.values.flat()) CHECK(std::abs(v) <= 1e-15);
  }
  SUBCASE("two-row table against finite differences") {
    const auto t = rows({{1, 0}, {0, 1}});
    const auto g = smoothness_backward(t);
    const auto fd = fd_gradient(t, 1e-6);
    for (std::size_t k = 0; k < fd.size(); ++k) CHECK(oracle::rel_error(g.grad.values.flat()[k], fd.flat()[k]) <= 1e-6);
  }
  SUBCASE("tangent gradient is identically zero") {
    const auto t = oracle::random_table(6, 2, Interpolation::CubicHermite, 8);
    const auto g = smoothness_backward(t);
    for (double v : g.grad.tangents.flat()) CHECK(v == 0.0);
  }
  SUBCASE("20 random tables against finite differences") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      const auto t = oracle::random_table(7, 3, Interpolation::CubicHermite, seed);
      const auto g = smoothness_backward(t);
      const auto fd = fd_gradient(t, 1e-6);
      for (std::size_t k = 0; k < fd.size(); ++k)
        CHECK(oracle::rel_error(g.grad.values.flat()[k], fd.flat()[k]) <= 1e-6);
    }
  }
  SUBCASE("equal adjacent rows use the zero subgradient") {
    const auto g = smoothness_backward(rows({{1, 2}, {1, 2}, {0, 3}}));
    for (double v : g.grad.values.flat()) CHECK(std::isfinite(v));
  }
  SUBCASE("accumulate scales by lambda") {
    const auto t = oracle::random_table(5, 2, Interpolation::CubicHermite, 3);
    const auto g1 = smoothness_backward(t);
    TableGrad acc(t);
    accumulate_smoothness(t, 2.5, acc);
    for (std::size_t k = 0; k < acc.values.size(); ++k)
      CHECK(acc.values.flat()[k] == doctest::Approx(2.5 * g1.grad.values.flat()[k]).epsilon(1e-13));
  }
}

TEST_CASE("combined_loss") {
  CHECK(combined_loss(0.5, 0.2, 0.0) == 0.5);
  CHECK(combined_loss(0.5, 0.2, 1.0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(combined_loss(0.0, 0.3, 4.0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK_THROWS_AS(combined_loss(0.5, 0.2, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(combined_loss(std::nan(""), 0.2, 1.0), std::invalid_argument);
}
