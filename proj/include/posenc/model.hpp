#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "posenc/encoding.hpp"

namespace posenc {

// y = W x + b, W is out x in.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct LinearHead {
  DenseLayer layer;
};

// Rectifier after every layer except the last. At least one hidden layer.
struct MlpHead {
  std::vector<DenseLayer> layers;
};

using Head = std::variant<LinearHead, MlpHead>;

enum class ModelKind { LinearRegression, Mlp, PosEncLinear, PosEncMlp };

std::string_view to_string(ModelKind kind);
// "linreg", "mlp", "posenc-linear", "posenc-mlp"
ModelKind parse_model_kind(std::string_view name);

// Optional positional encoder feeding a prediction head. Without an encoder
// the head sees the raw scalar input.
struct Model {
  std::optional<EmbeddingTable> encoder;
  Head head;
  double lambda = 0.0;

  ModelKind kind() const;
  std::size_t in_dim() const;   // head input width
  std::size_t out_dim() const;
  // Head layers in application order (one for a linear head).
  std::span<const DenseLayer> layers() const;
  std::span<DenseLayer> layers();
  // Scalars the optimizer updates; linear-mode tangents are not counted.
  std::size_t trainable_parameter_count() const;
};

// Throws std::invalid_argument when head/encoder shapes do not chain.
void validate(const Model& model);

struct ModelSpec {
  ModelKind kind = ModelKind::PosEncLinear;
  std::size_t out_dim = 1;
  std::size_t embedding_size = 16;
  Interpolation mode = Interpolation::CubicHermite;
  std::vector<std::size_t> hidden = {64, 64};  // MLP heads only
  double lambda = 0.0;
};

// Layers are U[-1/sqrt(fan_in), 1/sqrt(fan_in)]. `grid` is required for encoder kinds.
Model build_model(const ModelSpec& spec, const std::optional<BinGrid>& grid, std::uint64_t seed);

// Intermediates of one forward pass.
struct Trace {
  double x = 0.0;
  std::optional<EncodeRecord> encoding;
  // activations[k] is the input of layer k; activations.back() is the prediction.
  std::vector<std::vector<double>> activations;
};

struct ForwardResult {
  std::vector<double> prediction;
  Trace trace;
};

ForwardResult forward(const Model& model, double x);

double mse_loss(std::span<const double> prediction, std::span<const double> target);
// d(mse)/d(prediction)
std::vector<double> mse_gradient(std::span<const double> prediction, std::span<const double> target);

struct LayerGrad {
  Matrix weight;
  std::vector<double> bias;
};

// Same layout as Model.
struct ModelGrad {
  std::optional<TableGrad> encoder;
  std::vector<LayerGrad> layers;

  void zero();
  void add(const ModelGrad& o, double scale = 1.0);
  void scale(double factor);
};

ModelGrad zero_grad_like(const Model& model);

// Gradient of dot(loss_grad, prediction) for the traced sample.
ModelGrad backward(const Model& model, const Trace& trace, std::span<const double> loss_grad);
void backward_into(const Model& model, const Trace& trace, std::span<const double> loss_grad, ModelGrad& grad);

// d(prediction)/dx through the spline and the head. Rectifier kinks use the
// zero subgradient. Throws UnsupportedOperation for a linearly interpolated encoder.
std::vector<double> predict_derivative(const Model& model, double x);

// Parameter and gradient storage as flat blocks in matching order, for the optimizer.
std::vector<std::span<double>> parameter_blocks(Model& model);
std::vector<std::span<const double>> gradient_blocks(const Model& model, const ModelGrad& grad);

}  // namespace posenc
