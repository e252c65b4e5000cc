// Acceptance checks A1-A9. One [PASS]/[FAIL] line per criterion; exit status is
// the number of failures. Pass criterion names (e.g. "A3 A5") to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "posenc/analysis.hpp"
#include "posenc/cli.hpp"
#include "posenc/data.hpp"
#include "posenc/kernels.hpp"
#include "posenc/regularization.hpp"
#include "posenc/train.hpp"

using namespace posenc;
namespace fs = std::filesystem;

namespace {

// Tolerances and fixed settings.
constexpr double kA1LinregRatio = 0.1;
constexpr double kA1MlpRatio = 0.5;
constexpr double kA2Rel = 1e-6;
constexpr double kA3Rel = 1e-4;
constexpr double kA3Step = 1e-5;
constexpr double kA4Exact = 1e-12;
constexpr double kA4Scale = 1e-10;
constexpr double kA5Margin = 2.0;
constexpr double kA6Moved = 1e-6;
constexpr double kA7Oracle = 1e-12;
constexpr double kA7Closed = 1e-9;
constexpr double kA8Rel = 1e-5;
constexpr double kA8Step = 1e-6;
constexpr double kRelFloor = 1e-6;

// Default Adam settings for every training criterion, so no arm gets a different optimizer budget.
constexpr double kLearningRate = AdamParams{}.learning_rate;
constexpr std::size_t kEpochs = 2000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

TrainConfig base_config(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.epochs = kEpochs;
  c.adam.learning_rate = kLearningRate;
  c.seed = 11;
  c.n_bin = 64;
  c.embedding_size = 16;
  c.mode = Interpolation::CubicHermite;
  return c;
}

Dataset toy_train() { return gen_toy(7, 512, 0.02); }
Dataset toy_test() { return gen_toy(1007, 512, 0.02); }

// ---------------------------------------------------------------------------

Outcome a1_toy_fit() {
  const Dataset train = toy_train();
  auto lr = base_config(ModelKind::LinearRegression);
  auto pe = base_config(ModelKind::PosEncLinear);
  pe.lambda = 1.0;
  const double linreg = fit(lr, train).log.back().train_mse;
  const double posenc = fit(pe, train).log.back().train_mse;

  double best_mlp = INFINITY;
  std::string mlp_detail;
  for (const std::vector<std::size_t>& hidden : {std::vector<std::size_t>{64}, {64, 64}, {64, 64, 64}}) {
    auto c = base_config(ModelKind::Mlp);
    c.hidden = hidden;
    const double m = fit(c, train).log.back().train_mse;
    best_mlp = std::min(best_mlp, m);
    mlp_detail += " mlp" + std::to_string(hidden.size()) + "x64=" + fmt(m);
  }
  const bool pass = posenc < kA1LinregRatio * linreg && posenc < kA1MlpRatio * best_mlp;
  return {pass, "posenc=" + fmt(posenc) + " linreg=" + fmt(linreg) + mlp_detail};
}

Outcome a2_differentiability() {
  auto worst_gap = [](Interpolation mode, std::uint64_t seed) {
    const auto t = oracle::random_table(20, 4, mode, seed, -1.0, 2.0);
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < t.n_bin(); ++i) {
      const auto left = derivative_on_interval(t, i - 1, 1.0);
      const auto right = derivative_on_interval(t, i, 0.0);
      for (std::size_t j = 0; j < t.dim(); ++j) worst = std::max(worst, oracle::rel_error(left[j], right[j], kRelFloor));
    }
    return worst;
  };
  double hermite = 0.0;
  std::size_t linear_breaks = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    hermite = std::max(hermite, worst_gap(Interpolation::CubicHermite, seed));
    if (worst_gap(Interpolation::Linear, seed) > kA2Rel) ++linear_breaks;
  }
  return {hermite <= kA2Rel && linear_breaks >= 1,
          "hermite worst=" + fmt(hermite) + " linear tables with a kink=" + std::to_string(linear_breaks) + "/50"};
}

Outcome a3_gradients() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u01(0.0, 1.0), u11(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const bool mlp = trial % 2 == 1;
    ModelSpec spec{mlp ? ModelKind::PosEncMlp : ModelKind::PosEncLinear, 2, 6, Interpolation::CubicHermite, {12, 8}, 0.5};
    Model m = build_model(spec, BinGrid(0.0, 1.0, 16), 1000 + trial);
    for (double& v : m.encoder->tangents().flat()) v = u11(rng);

    Dataset ds;
    ds.y = Matrix(40, 2);
    for (std::size_t k = 0; k < 40; ++k) {
      ds.x.push_back(u01(rng));
      ds.y(k, 0) = u11(rng);
      ds.y(k, 1) = u11(rng);
    }
    const BatchView batch{ds.x, &ds.y, {}};
    auto loss = [&] {
      return combined_loss(evaluate_batch(m, batch, false).mse, smoothness_loss(*m.encoder).loss, m.lambda);
    };
    BatchEval eval = evaluate_batch(m, batch, true);
    accumulate_smoothness(*m.encoder, m.lambda, *eval.grad.encoder);
    auto params = parameter_blocks(m);
    const auto grads = gradient_blocks(m, eval.grad);
    for (int probe = 0; probe < 100; ++probe) {
      const auto b = std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng);
      const auto i = std::uniform_int_distribution<std::size_t>(0, params[b].size() - 1)(rng);
      const double keep = params[b][i];
      params[b][i] = keep + kA3Step;
      const double up = loss();
      params[b][i] = keep - kA3Step;
      const double dn = loss();
      params[b][i] = keep;
      worst = std::max(worst, oracle::rel_error(grads[b][i], (up - dn) / (2.0 * kA3Step), kRelFloor));
    }
  }
  return {worst <= kA3Rel, "worst relative error=" + fmt(worst) + " over 2000 probes"};
}

Outcome a4_smoothness_identities() {
  EmbeddingTable constant(BinGrid(0, 1, 8), 3, Interpolation::CubicHermite);
  constant.values().fill(0.7);
  const double c = smoothness_loss(constant).loss;

  Matrix two(2, 2);
  two(0, 0) = 1.0;
  two(1, 1) = 1.0;
  const EmbeddingTable pair(BinGrid(0, 1, 2), Interpolation::CubicHermite, two, Matrix());
  const double p = smoothness_loss(pair).loss;

  const auto t = oracle::random_table(30, 5, Interpolation::CubicHermite, 4);
  const double base = smoothness_loss(t).loss;
  double worst = 0.0;
  for (double k : {0.1, 3.0, -2.0}) {
    auto s = t;
    for (double& v : s.values().flat()) v *= k;
    worst = std::max(worst, std::abs(smoothness_loss(s).loss - base));
  }
  const bool pass = std::abs(c) <= kA4Exact && std::abs(p - std::sqrt(2.0)) <= kA4Exact && worst <= kA4Scale;
  return {pass, "constant=" + fmt(c) + " two-row=" + fmt(p) + " scale drift=" + fmt(worst)};
}

// sweep.csv rows keyed by (value, lambda) -> test_mse
std::map<std::pair<std::size_t, double>, double> run_sweep(const fs::path& dir, const std::string& axis,
                                                           const std::string& values, const std::string& fixed_flag,
                                                           const std::string& fixed_value, std::string& problem) {
  std::ostringstream out, err;
  const int code = cli::run({"sweep", "--axis", axis, "--values", values, "--lambda-star", "1", "--train",
                             (dir / "train.csv").string(), "--test", (dir / "test.csv").string(), "--out",
                             (dir / axis).string(), "--model", "posenc-linear", "--epochs", std::to_string(kEpochs),
                             "--lr", fmt(kLearningRate), "--seed", "11", fixed_flag, fixed_value},
                            out, err);
  std::map<std::pair<std::size_t, double>, double> rows;
  if (code != 0) {
    problem = "sweep exited " + std::to_string(code) + ": " + err.str();
    return rows;
  }
  std::ifstream in(dir / axis / "sweep.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() < 8 || f[7] != "ok") {
      problem = "sweep point failed: " + line;
      continue;
    }
    rows[{std::stoul(f[1]), std::stod(f[2])}] = std::stod(f[5]);
  }
  return rows;
}

Outcome a5_sizing_trends() {
  const fs::path dir = fs::temp_directory_path() / "posenc_acceptance_a5";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_csv(dir / "train.csv", toy_train());
  write_csv(dir / "test.csv", toy_test());

  std::string problem;
  auto s_rows = run_sweep(dir, "embedding_size", "1,2,4,8,16", "--nbin", "64", problem);
  auto n_rows = run_sweep(dir, "n_bin", "16,64,256,1024", "--s", "16", problem);
  if (!problem.empty()) return {false, problem};

  const double s1 = s_rows[{1, 0.0}], s16 = s_rows[{16, 0.0}];
  const double n64 = n_rows[{64, 0.0}], n1024 = n_rows[{1024, 0.0}], n1024_reg = n_rows[{1024, 1.0}];
  const bool i = s1 > kA5Margin * s16;
  const bool ii = n1024 > n64;
  const bool iii = n1024_reg < n1024;
  std::string detail = std::string("(i)") + (i ? "ok" : "NO") + " s1=" + fmt(s1) + " s16=" + fmt(s16) + "; (ii)" +
                       (ii ? "ok" : "NO") + " n1024=" + fmt(n1024) + " n64=" + fmt(n64) + "; (iii)" +
                       (iii ? "ok" : "NO") + " n1024 smoothed=" + fmt(n1024_reg);
  return {i && ii && iii, detail};
}

Outcome a6_untrained_bins() {
  Dataset train = gen_toy(21, 400, 0.02);
  Dataset kept;
  kept.name = train.name;
  std::vector<double> ys;
  for (std::size_t k = 0; k < train.size(); ++k)
    if (train.x[k] < 0.4 || train.x[k] > 0.6) {
      kept.x.push_back(train.x[k]);
      ys.push_back(train.y(k, 0));
    }
  kept.y = Matrix(ys.size(), 1);
  for (std::size_t k = 0; k < ys.size(); ++k) kept.y(k, 0) = ys[k];

  auto c = base_config(ModelKind::PosEncLinear);
  c.epochs = 300;
  c.x_min = 0.0;
  c.x_max = 1.0;
  const BinGrid grid = grid_for(c, kept);
  std::vector<bool> touched(grid.n_bin(), false);
  for (double x : kept.x) {
    const auto loc = grid.locate(x);
    touched[loc.lower] = true;
    touched[loc.lower + 1] = true;
  }
  std::vector<std::size_t> untouched;
  for (std::size_t i = 0; i < grid.n_bin(); ++i)
    if (!touched[i]) untouched.push_back(i);
  if (untouched.empty()) return {false, "no untouched rows in the held-out interval"};

  const Model init = initial_model(c, kept);
  auto moved = [&](const Model& m, std::size_t i) {
    double d = 0.0;
    for (std::size_t j = 0; j < m.encoder->dim(); ++j)
      d = std::max(d, std::abs(m.encoder->values()(i, j) - init.encoder->values()(i, j)));
    return d;
  };
  const Model plain = fit(c, kept).model;
  c.lambda = 1.0;
  const Model smooth = fit(c, kept).model;

  bool frozen = true;
  double least_moved = INFINITY;
  for (std::size_t i : untouched) {
    frozen = frozen && moved(plain, i) == 0.0;
    least_moved = std::min(least_moved, moved(smooth, i));
  }
  return {frozen && least_moved >= kA6Moved, std::to_string(untouched.size()) + " untouched rows; lambda=0 " +
                                                 (frozen ? "unchanged" : "CHANGED") +
                                                 "; lambda=1 least movement=" + fmt(least_moved)};
}

Outcome a7_metric_oracles() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::vector<EmbeddingTable> a = {oracle::random_table(32, 6, Interpolation::CubicHermite, seed)};
    const std::vector<EmbeddingTable> b = {oracle::random_table(32, 6, Interpolation::CubicHermite, seed + 50)};
    const EmbeddingSample sa(a), sb(b);
    worst = std::max({worst, std::abs(non_linearity(sa) - oracle::non_linearity(a)),
                      std::abs(non_monotonicity(sa) - oracle::non_monotonicity(a)),
                      std::abs(diversity(sa) - oracle::diversity(a)),
                      std::abs(task_similarity(sa, sb) - oracle::similarity(a, b))});
  }

  EmbeddingTable lin(BinGrid(-1, 1, 21), 2, Interpolation::CubicHermite);
  EmbeddingTable sq(BinGrid(-1, 1, 21), 1, Interpolation::CubicHermite);
  EmbeddingTable same(BinGrid(-1, 1, 21), 3, Interpolation::CubicHermite);
  for (std::size_t i = 0; i < 21; ++i) {
    const double x = lin.grid().center(i);
    lin.values()(i, 0) = 3.0 * x - 1.0;
    lin.values()(i, 1) = -x;
    sq.values()(i, 0) = std::pow(static_cast<double>(i) - 10.0, 2);
    for (std::size_t j = 0; j < 3; ++j) same.values()(i, j) = std::sin(3.0 * x);
  }
  const EmbeddingSample l({lin}), q({sq}), d({same});
  const double closed = std::max({std::abs(non_linearity(l)), std::abs(non_monotonicity(l)),
                                  std::abs(non_linearity(q) - 1.0), std::abs(non_monotonicity(q) - 1.0),
                                  std::abs(diversity(d))});
  return {worst <= kA7Oracle && closed <= kA7Closed,
          "oracle worst=" + fmt(worst) + " closed-form worst=" + fmt(closed)};
}

Outcome a8_force_path() {
  const double eps = 1.0, sigma = 1.0, r_min = 0.9, r_max = 2.5;
  const Dataset train = select_targets(gen_lennard_jones(31, 512, eps, sigma, r_min, r_max), {0});
  auto c = base_config(ModelKind::PosEncLinear);
  c.epochs = 500;
  c.lambda = 1.0;
  const Model m = fit(c, train).model;

  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> ur(r_min, r_max);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double r = ur(rng);
    const double analytic = predict_derivative(m, r)[0];
    const double fd = oracle::central_difference([&](double z) { return forward(m, z).prediction[0]; }, r, kA8Step);
    worst = std::max(worst, oracle::rel_error(analytic, fd, kRelFloor));
  }
  return {worst <= kA8Rel, "worst relative error=" + fmt(worst) + " over 50 held-out r"};
}

Outcome a9_regularization_smooths() {
  const Dataset train = toy_train();
  auto c = base_config(ModelKind::PosEncLinear);
  const Model plain = fit(c, train).model;
  c.lambda = 1.0;
  const Model smooth = fit(c, train).model;
  const auto a = smoothness_metric(EmbeddingSample({*plain.encoder}));
  const auto b = smoothness_metric(EmbeddingSample({*smooth.encoder}));
  return {b.raw >= a.raw, "lambda=1 smoothness=" + fmt(b.raw) + " lambda=0 smoothness=" + fmt(a.raw)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Outcome()>>>> criteria = {
      {"A1", {"toy fit", a1_toy_fit}},
      {"A2", {"differentiability", a2_differentiability}},
      {"A3", {"gradient exactness", a3_gradients}},
      {"A4", {"smoothness-loss identities", a4_smoothness_identities}},
      {"A5", {"sizing trends", a5_sizing_trends}},
      {"A6", {"untrained-bin propagation", a6_untrained_bins}},
      {"A7", {"metric oracles", a7_metric_oracles}},
      {"A8", {"force path", a8_force_path}},
      {"A9", {"regularization smooths", a9_regularization_smooths}},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ' ' << entry.first << ": " << o.detail << " (" << fmt(secs)
              << " s)" << std::endl;
  }
  return failures;
}
