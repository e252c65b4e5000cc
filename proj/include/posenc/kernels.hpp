#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "posenc/model.hpp"

namespace posenc {

// Samples per reduction shard. Shards are reduced in index order, so the
// parallel kernels give the same bits for any thread count.
inline constexpr std::size_t kShardSize = 64;

struct BatchEval {
  double mse = 0.0;  // mean over samples of the per-sample MSE
  ModelGrad grad;    // gradient of `mse`; empty layout when not requested
};

// Batch of samples: xs[indices[k]] with targets ys.row(indices[k]).
struct BatchView {
  std::span<const double> xs;
  const Matrix* ys = nullptr;
  std::span<const std::size_t> indices;  // empty = every sample in order

  std::size_t size() const { return indices.empty() ? xs.size() : indices.size(); }
  std::size_t at(std::size_t k) const { return indices.empty() ? k : indices[k]; }
};

// Straight loop over the batch. Reference for the parallel kernels.
BatchEval evaluate_batch_serial(const Model& model, const BatchView& batch, bool with_grad);

// Reusable per-shard gradient buffers for evaluate_batch.
class GradientWorkspace {
 public:
  std::vector<ModelGrad>& shards(const Model& model, std::size_t count);

 private:
  std::vector<ModelGrad> shards_;
};

// OpenMP over fixed-size shards, then an ordered reduction.
BatchEval evaluate_batch(const Model& model, const BatchView& batch, bool with_grad,
                         GradientWorkspace* workspace = nullptr);

// Predictions for every x, rows in input order.
Matrix predict_batch(const Model& model, std::span<const double> xs);
Matrix predict_batch_serial(const Model& model, std::span<const double> xs);

}  // namespace posenc
