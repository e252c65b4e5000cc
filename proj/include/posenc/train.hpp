#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "posenc/data.hpp"
#include "posenc/model.hpp"

namespace posenc {

enum class OptimizerKind { Sgd, Adam };

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moments per parameter block, plus the step count.
struct AdamState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update. State is sized on first use; a later shape
// change throws std::invalid_argument.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamParams& hp);

void sgd_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
              double learning_rate);

struct TrainConfig {
  ModelKind kind = ModelKind::PosEncLinear;
  std::size_t epochs = 2000;
  std::size_t batch_size = 0;  // 0 = full batch
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamParams adam;             // learning_rate is shared with SGD
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double padding = 0.0;        // fraction of the data range added on each side of the grid
  std::size_t n_bin = 64;
  std::size_t embedding_size = 16;
  Interpolation mode = Interpolation::CubicHermite;
  std::vector<std::size_t> hidden = {64, 64};
  std::optional<double> x_min;  // explicit grid bounds override the data range
  std::optional<double> x_max;
};

// Every problem found, empty when valid.
std::vector<std::string> validation_errors(const TrainConfig& config);

nlohmann::json to_json(const TrainConfig& config);
// Keys missing from `j` keep the values already in `config`.
void merge_json(const nlohmann::json& j, TrainConfig& config);

struct TrainLogRow {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;  // NaN when no test set was given
  double smoothness_loss = 0.0;
  double combined_loss = 0.0;
};

struct FitResult {
  Model model;
  std::vector<TrainLogRow> log;
};

// Grid spanning the data range, widened by padding * range on each side,
// unless the config pins explicit bounds.
BinGrid grid_for(const TrainConfig& config, const Dataset& train);

// The model fit() starts from.
Model initial_model(const TrainConfig& config, const Dataset& train);

// Minimizes mean MSE + lambda * smoothness with a fixed shuffle stream from the
// seed. The log row for each epoch is measured after that epoch's updates.
// Throws ValidationError for a bad config, std::invalid_argument for bad data
// and NumericError when the loss stops being finite.
FitResult fit(const TrainConfig& config, const Dataset& train, const Dataset* test = nullptr);

void write_log_csv(const std::string& path, const std::vector<TrainLogRow>& log);

}  // namespace posenc
