#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "posenc/errors.hpp"
#include "posenc/regularization.hpp"
#include "posenc/train.hpp"

using namespace posenc;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Dataset line_data(std::size_t n) {
  Dataset ds;
  ds.name = "line";
  ds.y = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    ds.x.push_back(static_cast<double>(i) / static_cast<double>(n - 1));
    ds.y(i, 0) = 2.0 * ds.x.back() + 1.0;
  }
  return ds;
}

}  // namespace

TEST_CASE("adam_step") {
  AdamParams hp;
  hp.learning_rate = 0.1;

  SUBCASE("zero gradients leave parameters unchanged") {
    std::vector<double> p = {1.0, -2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    std::vector<std::span<double>> ps = {p};
    std::vector<std::span<const double>> gs = {g};
    AdamState st;
    for (int k = 0; k < 5; ++k) adam_step(ps, gs, st, hp);
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
  }
  SUBCASE("first step moves each parameter by about lr against the gradient sign") {
    std::vector<double> p = {0.0, 0.0};
    const std::vector<double> g = {4.0, -0.001};
    std::vector<std::span<double>> ps = {p};
    std::vector<std::span<const double>> gs = {g};
    AdamState st;
    adam_step(ps, gs, st, hp);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-4));
    CHECK(st.step == 1);
    CHECK(st.first[0][0] == doctest::Approx(0.4));
    CHECK(st.second[0][0] == doctest::Approx(0.016));
  }
  SUBCASE("three steps on w^2 decrease the loss") {
    std::vector<double> w = {1.0};
    AdamState st;
    double prev = w[0] * w[0];
    for (int k = 0; k < 3; ++k) {
      const std::vector<double> g = {2.0 * w[0]};
      std::vector<std::span<double>> ps = {w};
      std::vector<std::span<const double>> gs = {g};
      adam_step(ps, gs, st, hp);
      CHECK(w[0] * w[0] < prev);
      prev = w[0] * w[0];
    }
  }
  SUBCASE("moments decay geometrically once the gradient vanishes") {
    std::vector<double> p = {0.0};
    std::vector<double> g = {1.0};
    std::vector<std::span<double>> ps = {p};
    std::vector<std::span<const double>> gs = {g};
    AdamState st;
    adam_step(ps, gs, st, hp);
    const double m1 = st.first[0][0], v1 = st.second[0][0];
    g[0] = 0.0;
    adam_step(ps, gs, st, hp);
    CHECK(st.first[0][0] == doctest::Approx(hp.beta1 * m1));
    CHECK(st.second[0][0] == doctest::Approx(hp.beta2 * v1));
  }
  SUBCASE("shape changes are rejected") {
    std::vector<double> p = {0.0}, q = {0.0, 0.0};
    const std::vector<double> g = {1.0}, h = {1.0, 1.0};
    AdamState st;
    std::vector<std::span<double>> ps = {p};
    std::vector<std::span<const double>> gs = {g};
    adam_step(ps, gs, st, hp);
    std::vector<std::span<double>> qs = {q};
    std::vector<std::span<const double>> hs = {h};
    CHECK_THROWS_AS(adam_step(qs, hs, st, hp), std::invalid_argument);
  }
}

TEST_CASE("fit recovers a line") {
  TrainConfig c;
  c.kind = ModelKind::LinearRegression;
  c.optimizer = OptimizerKind::Sgd;
  c.adam.learning_rate = 0.5;
  c.epochs = 2000;
  const auto res = fit(c, line_data(50));
  CHECK(res.log.back().train_mse < 1e-6);
  CHECK(res.log.size() == 2000);
  CHECK(std::isnan(res.log.back().test_mse));
}

TEST_CASE("fit is deterministic in the seed") {
  TrainConfig c;
  c.kind = ModelKind::PosEncMlp;
  c.hidden = {8};
  c.embedding_size = 4;
  c.n_bin = 16;
  c.epochs = 30;
  c.batch_size = 32;
  c.adam.learning_rate = 1e-2;
  c.seed = 9;
  const Dataset train = gen_toy(1, 200, 0.1);
  const auto a = fit(c, train);
  const auto b = fit(c, train);
  CHECK(a.log.back().train_mse == b.log.back().train_mse);
  CHECK(a.model.encoder->values() == b.model.encoder->values());
  c.seed = 10;
  const auto d = fit(c, train);
  CHECK(a.log.back().train_mse != d.log.back().train_mse);
}

TEST_CASE("config validation reports every problem") {
  TrainConfig c;
  c.lambda = -1.0;
  c.adam.learning_rate = 0.0;
  c.n_bin = 1;
  c.epochs = 0;
  const auto errs = validation_errors(c);
  CHECK(errs.size() == 4);
  CHECK_THROWS_AS(fit(c, gen_toy(1, 10, 0.0)), ValidationError);

  TrainConfig d;
  CHECK_THROWS_AS(merge_json(nlohmann::json{{"learning_rate", 0.1}}, d), ValidationError);
  CHECK_THROWS_AS(merge_json(nlohmann::json{{"epochs", "many"}}, d), ValidationError);
  merge_json(nlohmann::json{{"lr", 0.02}, {"model", "mlp"}, {"hidden", {3, 4}}}, d);
  CHECK(d.adam.learning_rate == 0.02);
  CHECK(d.kind == ModelKind::Mlp);
  CHECK(d.hidden == std::vector<std::size_t>{3, 4});

  TrainConfig e;
  merge_json(to_json(d), e);
  CHECK(to_json(e) == to_json(d));
}

TEST_CASE("bins away from the data keep their initial values without smoothing") {
  TrainConfig c;
  c.kind = ModelKind::PosEncLinear;
  c.embedding_size = 4;
  c.n_bin = 20;
  c.epochs = 50;
  c.adam.learning_rate = 1e-2;
  c.x_min = 0.0;
  c.x_max = 1.0;
  Dataset train = gen_toy(2, 100, 0.0);
  for (double& x : train.x) x *= 0.5;
  const Model start = initial_model(c, train);
  const auto res = fit(c, train);
  const auto& grid = res.model.encoder->grid();
  std::size_t checked = 0;
  for (std::size_t i = 0; i < grid.n_bin(); ++i) {
    if (grid.center(i) <= 0.5 + grid.spacing()) continue;
    ++checked;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(res.model.encoder->values()(i, j) == start.encoder->values()(i, j));
      CHECK(res.model.encoder->tangents()(i, j) == start.encoder->tangents()(i, j));
    }
  }
  CHECK(checked > 5);

  c.lambda = 1.0;
  const auto smoothed = fit(c, train);
  CHECK(!(smoothed.model.encoder->values() == start.encoder->values()));
}

TEST_CASE("smoothing weight lowers roughness and training error trends down") {
  TrainConfig c;
  c.kind = ModelKind::PosEncLinear;
  c.embedding_size = 8;
  c.n_bin = 32;
  c.epochs = 300;
  c.adam.learning_rate = 1e-2;
  c.seed = 4;
  const Dataset train = gen_toy(3, 400, 0.2);
  const auto rough = fit(c, train);
  c.lambda = 1.0;
  const auto smooth = fit(c, train);
  CHECK(smooth.log.back().smoothness_loss < rough.log.back().smoothness_loss);

  std::vector<double> head, tail;
  for (std::size_t k = 0; k < 20; ++k) {
    head.push_back(rough.log[k].train_mse);
    tail.push_back(rough.log[rough.log.size() - 1 - k].train_mse);
  }
  CHECK(median(tail) < median(head));
}

TEST_CASE("test set is scored every epoch") {
  TrainConfig c;
  c.kind = ModelKind::LinearRegression;
  c.epochs = 3;
  const Dataset train = gen_toy(1, 50, 0.0);
  const Dataset test = gen_toy(2, 30, 0.0);
  const auto res = fit(c, train, &test);
  for (const auto& row : res.log) CHECK(std::isfinite(row.test_mse));
  Dataset wide = test;
  wide.y = Matrix(30, 2);
  CHECK_THROWS_AS(fit(c, train, &wide), std::invalid_argument);
}
