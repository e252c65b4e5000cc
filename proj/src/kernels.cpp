#include "posenc/kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace posenc {

namespace {

void check_batch(const Model& model, const BatchView& batch) {
  if (!batch.ys) throw std::invalid_argument("evaluate_batch: missing targets");
  if (batch.ys->rows() != batch.xs.size()) throw std::invalid_argument("evaluate_batch: xs and ys differ in length");
  if (batch.ys->cols() != model.out_dim()) throw std::invalid_argument("evaluate_batch: target width differs from model output");
  if (batch.size() == 0) throw std::invalid_argument("evaluate_batch: empty batch");
}

// Sum of per-sample MSE over [begin, end) of the batch, gradients (unscaled) into grad.
double accumulate_range(const Model& model, const BatchView& batch, std::size_t begin, std::size_t end,
                        ModelGrad* grad) {
  double loss = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    const std::size_t idx = batch.at(k);
    const auto target = batch.ys->row(idx);
    ForwardResult fwd = forward(model, batch.xs[idx]);
    loss += mse_loss(fwd.prediction, target);
    if (grad) backward_into(model, fwd.trace, mse_gradient(fwd.prediction, target), *grad);
  }
  return loss;
}

}  // namespace

BatchEval evaluate_batch_serial(const Model& model, const BatchView& batch, bool with_grad) {
  check_batch(model, batch);
  BatchEval out;
  if (with_grad) out.grad = zero_grad_like(model);
  const double n = static_cast<double>(batch.size());
  out.mse = accumulate_range(model, batch, 0, batch.size(), with_grad ? &out.grad : nullptr) / n;
  if (with_grad) out.grad.scale(1.0 / n);
  return out;
}

std::vector<ModelGrad>& GradientWorkspace::shards(const Model& model, std::size_t count) {
  const ModelGrad layout = zero_grad_like(model);
  auto same_layout = [&](const ModelGrad& g) {
    if (g.layers.size() != layout.layers.size() || g.encoder.has_value() != layout.encoder.has_value()) return false;
    if (g.encoder && !g.encoder->values.same_shape(layout.encoder->values)) return false;
    for (std::size_t k = 0; k < g.layers.size(); ++k)
      if (!g.layers[k].weight.same_shape(layout.layers[k].weight)) return false;
    return true;
  };
  if (!shards_.empty() && !same_layout(shards_.front())) shards_.clear();
  while (shards_.size() < count) shards_.push_back(layout);
  return shards_;
}

BatchEval evaluate_batch(const Model& model, const BatchView& batch, bool with_grad, GradientWorkspace* workspace) {
  check_batch(model, batch);
  const std::size_t n = batch.size();
  const std::size_t n_shards = (n + kShardSize - 1) / kShardSize;
  std::vector<double> shard_loss(n_shards, 0.0);

  GradientWorkspace local;
  std::vector<ModelGrad>* shard_grads = nullptr;
  if (with_grad) shard_grads = &(workspace ? workspace : &local)->shards(model, n_shards);

  const auto shard_count = static_cast<long>(n_shards);
#pragma omp parallel for schedule(static)
  for (long s = 0; s < shard_count; ++s) {
    const auto begin = static_cast<std::size_t>(s) * kShardSize;
    const std::size_t end = std::min(n, begin + kShardSize);
    ModelGrad* g = nullptr;
    if (shard_grads) {
      g = &(*shard_grads)[static_cast<std::size_t>(s)];
      g->zero();
    }
    shard_loss[static_cast<std::size_t>(s)] = accumulate_range(model, batch, begin, end, g);
  }

  BatchEval out;
  double total = 0.0;
  for (double l : shard_loss) total += l;
  out.mse = total / static_cast<double>(n);
  if (with_grad) {
    out.grad = zero_grad_like(model);
    for (std::size_t s = 0; s < n_shards; ++s) out.grad.add((*shard_grads)[s]);
    out.grad.scale(1.0 / static_cast<double>(n));
  }
  return out;
}

Matrix predict_batch_serial(const Model& model, std::span<const double> xs) {
  Matrix out(xs.size(), model.out_dim());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto p = forward(model, xs[i]).prediction;
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

Matrix predict_batch(const Model& model, std::span<const double> xs) {
  Matrix out(xs.size(), model.out_dim());
  const auto n = static_cast<long>(xs.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto p = forward(model, xs[idx]).prediction;
    std::copy(p.begin(), p.end(), out.row(idx).begin());
  }
  return out;
}

}  // namespace posenc
