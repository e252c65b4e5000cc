#include "posenc/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "posenc/errors.hpp"
#include "posenc/format.hpp"
#include "posenc/kernels.hpp"
#include "posenc/regularization.hpp"

namespace posenc {

namespace {

void check_blocks(std::size_t n_params, std::size_t n_grads) {
  if (n_params != n_grads) throw std::invalid_argument("optimizer: parameter and gradient block counts differ");
}

bool uses_encoder(ModelKind k) { return k == ModelKind::PosEncLinear || k == ModelKind::PosEncMlp; }
bool uses_hidden(ModelKind k) { return k == ModelKind::Mlp || k == ModelKind::PosEncMlp; }

std::uint64_t shuffle_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL; }

}  // namespace

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamParams& hp) {
  check_blocks(params.size(), grads.size());
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.size(), 0.0);
      state.second.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first.size() != params.size()) throw std::invalid_argument("adam_step: state has a different block count");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(hp.beta1, t);
  const double correct2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.first[b];
    auto& v = state.second[b];
    if (p.size() != g.size() || p.size() != m.size()) throw std::invalid_argument("adam_step: block shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      p[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
    }
  }
}

void sgd_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
              double learning_rate) {
  check_blocks(params.size(), grads.size());
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) throw std::invalid_argument("sgd_step: block shape mismatch");
    for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= learning_rate * grads[b][i];
  }
}

std::vector<std::string> validation_errors(const TrainConfig& c) {
  std::vector<std::string> errs;
  if (c.epochs < 1) errs.push_back("epochs must be >= 1");
  if (!(c.adam.learning_rate > 0.0) || !std::isfinite(c.adam.learning_rate)) errs.push_back("learning rate must be > 0");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) errs.push_back("lambda must be finite and >= 0");
  if (!(c.padding >= 0.0) || !std::isfinite(c.padding)) errs.push_back("padding must be finite and >= 0");
  if (c.optimizer == OptimizerKind::Adam) {
    if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0)) errs.push_back("beta1 must lie in [0, 1)");
    if (!(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) errs.push_back("beta2 must lie in [0, 1)");
    if (!(c.adam.epsilon > 0.0)) errs.push_back("adam epsilon must be > 0");
  }
  if (uses_encoder(c.kind)) {
    if (c.n_bin < 2) errs.push_back("n_bin must be >= 2");
    if (c.embedding_size < 1) errs.push_back("embedding size must be >= 1");
  }
  if (uses_hidden(c.kind)) {
    if (c.hidden.empty()) errs.push_back("MLP needs at least one hidden layer");
    if (std::find(c.hidden.begin(), c.hidden.end(), std::size_t{0}) != c.hidden.end())
      errs.push_back("hidden widths must be >= 1");
  }
  if (c.x_min.has_value() != c.x_max.has_value()) errs.push_back("x_min and x_max must be given together");
  if (c.x_min && c.x_max && !(*c.x_max > *c.x_min)) errs.push_back("x_max must be greater than x_min");
  return errs;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {
      {"model", std::string(to_string(c.kind))},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
      {"lr", c.adam.learning_rate},
      {"beta1", c.adam.beta1},
      {"beta2", c.adam.beta2},
      {"eps", c.adam.epsilon},
      {"lambda", c.lambda},
      {"seed", c.seed},
      {"padding", c.padding},
      {"n_bin", c.n_bin},
      {"s", c.embedding_size},
      {"mode", std::string(to_string(c.mode))},
      {"hidden", c.hidden},
  };
  if (c.x_min) j["x_min"] = *c.x_min;
  if (c.x_max) j["x_max"] = *c.x_max;
  return j;
}

void merge_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  static const std::vector<std::string> known = {"model", "epochs", "batch_size", "optimizer", "lr",   "beta1",
                                                 "beta2", "eps",    "lambda",     "seed",      "padding", "n_bin",
                                                 "s",     "mode",   "hidden",     "x_min",     "x_max"};
  std::vector<std::string> errs;
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) errs.push_back("unknown config key '" + key + "'");
  if (!errs.empty()) throw ValidationError(errs);
  try {
    if (j.contains("model")) c.kind = parse_model_kind(j["model"].get<std::string>());
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("optimizer")) {
      const auto o = j["optimizer"].get<std::string>();
      if (o == "adam") c.optimizer = OptimizerKind::Adam;
      else if (o == "sgd") c.optimizer = OptimizerKind::Sgd;
      else throw std::invalid_argument("unknown optimizer '" + o + "'");
    }
    if (j.contains("lr")) c.adam.learning_rate = j["lr"].get<double>();
    if (j.contains("beta1")) c.adam.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) c.adam.beta2 = j["beta2"].get<double>();
    if (j.contains("eps")) c.adam.epsilon = j["eps"].get<double>();
    if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("padding")) c.padding = j["padding"].get<double>();
    if (j.contains("n_bin")) c.n_bin = j["n_bin"].get<std::size_t>();
    if (j.contains("s")) c.embedding_size = j["s"].get<std::size_t>();
    if (j.contains("mode")) c.mode = parse_interpolation(j["mode"].get<std::string>());
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<std::size_t>>();
    if (j.contains("x_min")) c.x_min = j["x_min"].get<double>();
    if (j.contains("x_max")) c.x_max = j["x_max"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({std::string("bad config value: ") + e.what()});
  }
}

BinGrid grid_for(const TrainConfig& c, const Dataset& train) {
  if (c.x_min && c.x_max) return BinGrid(*c.x_min, *c.x_max, c.n_bin);
  validate(train);
  const auto [lo, hi] = std::minmax_element(train.x.begin(), train.x.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw std::invalid_argument("training inputs span an empty range; set x_min/x_max explicitly");
  return BinGrid(*lo - c.padding * range, *hi + c.padding * range, c.n_bin);
}

Model initial_model(const TrainConfig& c, const Dataset& train) {
  if (auto errs = validation_errors(c); !errs.empty()) throw ValidationError(std::move(errs));
  validate(train);
  ModelSpec spec;
  spec.kind = c.kind;
  spec.out_dim = train.targets();
  spec.embedding_size = c.embedding_size;
  spec.mode = c.mode;
  spec.hidden = c.hidden;
  spec.lambda = c.lambda;
  std::optional<BinGrid> grid;
  if (uses_encoder(c.kind)) grid = grid_for(c, train);
  return build_model(spec, grid, c.seed);
}

FitResult fit(const TrainConfig& c, const Dataset& train, const Dataset* test) {
  FitResult res{initial_model(c, train), {}};
  Model& model = res.model;
  if (test) {
    validate(*test);
    if (test->targets() != train.targets()) throw std::invalid_argument("test set has a different number of targets");
  }

  const std::size_t n = train.size();
  const std::size_t batch = (c.batch_size == 0 || c.batch_size >= n) ? n : c.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(shuffle_seed(c.seed));

  const BatchView full_train{train.x, &train.y, {}};
  GradientWorkspace workspace;
  AdamState adam;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  res.log.reserve(c.epochs);

  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const BatchView view{train.x, &train.y, std::span<const std::size_t>(order).subspan(start, len)};
      BatchEval eval = evaluate_batch(model, view, true, &workspace);
      if (!std::isfinite(eval.mse))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      if (model.encoder && c.lambda > 0.0) accumulate_smoothness(*model.encoder, c.lambda, *eval.grad.encoder);

      const auto params = parameter_blocks(model);
      const auto grads = gradient_blocks(model, eval.grad);
      if (c.optimizer == OptimizerKind::Adam) adam_step(params, grads, adam, c.adam);
      else sgd_step(params, grads, c.adam.learning_rate);
    }

    TrainLogRow row;
    row.epoch = epoch;
    row.train_mse = evaluate_batch(model, full_train, false).mse;
    row.test_mse = test ? evaluate_batch(model, BatchView{test->x, &test->y, {}}, false).mse : nan;
    row.smoothness_loss = model.encoder ? smoothness_loss(*model.encoder).loss : 0.0;
    if (!std::isfinite(row.train_mse) || !std::isfinite(row.smoothness_loss))
      throw NumericError("non-finite loss after epoch " + std::to_string(epoch) +
                         " (train_mse=" + format_double(row.train_mse) + ")");
    row.combined_loss = combined_loss(row.train_mse, row.smoothness_loss, c.lambda);
    res.log.push_back(row);
  }
  return res;
}

void write_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "epoch,train_mse,test_mse,smoothness_loss,combined_loss\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << format_double(r.train_mse) << ','
        << (std::isnan(r.test_mse) ? std::string() : format_double(r.test_mse)) << ','
        << format_double(r.smoothness_loss) << ',' << format_double(r.combined_loss) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace posenc
