#include "posenc/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "posenc/errors.hpp"

namespace posenc {

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  DenseLayer layer{Matrix(out, in), std::vector<double>(out)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : layer.weight.flat()) w = dist(rng);
  for (double& b : layer.bias) b = dist(rng);
  return layer;
}

void apply_layer(const DenseLayer& layer, std::span<const double> in, std::span<double> out) {
  for (std::size_t r = 0; r < layer.out_dim(); ++r) {
    const auto w = layer.weight.row(r);
    double acc = layer.bias[r];
    for (std::size_t c = 0; c < in.size(); ++c) acc += w[c] * in[c];
    out[r] = acc;
  }
}

bool is_rectified(std::size_t layer_index, std::size_t n_layers) { return layer_index + 1 < n_layers; }

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearRegression: return "linreg";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::PosEncLinear: return "posenc-linear";
    case ModelKind::PosEncMlp: return "posenc-mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "linreg") return ModelKind::LinearRegression;
  if (name == "mlp") return ModelKind::Mlp;
  if (name == "posenc-linear") return ModelKind::PosEncLinear;
  if (name == "posenc-mlp") return ModelKind::PosEncMlp;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

ModelKind Model::kind() const {
  const bool mlp = std::holds_alternative<MlpHead>(head);
  if (encoder) return mlp ? ModelKind::PosEncMlp : ModelKind::PosEncLinear;
  return mlp ? ModelKind::Mlp : ModelKind::LinearRegression;
}

std::span<const DenseLayer> Model::layers() const {
  if (const auto* lin = std::get_if<LinearHead>(&head)) return {&lin->layer, 1};
  return std::get<MlpHead>(head).layers;
}

std::span<DenseLayer> Model::layers() {
  if (auto* lin = std::get_if<LinearHead>(&head)) return {&lin->layer, 1};
  return std::get<MlpHead>(head).layers;
}

std::size_t Model::in_dim() const { return layers().front().in_dim(); }
std::size_t Model::out_dim() const { return layers().back().out_dim(); }

std::size_t Model::trainable_parameter_count() const {
  std::size_t n = encoder ? encoder->parameter_count() : 0;
  for (const auto& l : layers()) n += l.weight.size() + l.bias.size();
  return n;
}

void validate(const Model& model) {
  const auto layers = model.layers();
  if (layers.empty()) throw std::invalid_argument("model: head has no layers");
  if (std::holds_alternative<MlpHead>(model.head) && layers.size() < 2)
    throw std::invalid_argument("model: MLP head needs at least one hidden layer");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].bias.size() != layers[k].out_dim())
      throw std::invalid_argument("model: bias length mismatch in layer " + std::to_string(k));
    if (k > 0 && layers[k].in_dim() != layers[k - 1].out_dim())
      throw std::invalid_argument("model: layer " + std::to_string(k) + " input width does not chain");
  }
  const std::size_t expected_in = model.encoder ? model.encoder->dim() : 1;
  if (layers.front().in_dim() != expected_in)
    throw std::invalid_argument("model: head input width must be " + std::to_string(expected_in));
  if (!std::isfinite(model.lambda) || model.lambda < 0.0)
    throw std::invalid_argument("model: lambda must be finite and non-negative");
}

Model build_model(const ModelSpec& spec, const std::optional<BinGrid>& grid, std::uint64_t seed) {
  if (spec.out_dim == 0) throw std::invalid_argument("build_model: out_dim must be >= 1");
  std::mt19937_64 rng(seed);
  Model model{std::nullopt, LinearHead{}, spec.lambda};
  const bool with_encoder = spec.kind == ModelKind::PosEncLinear || spec.kind == ModelKind::PosEncMlp;
  if (with_encoder) {
    if (!grid) throw std::invalid_argument("build_model: encoder kinds need a grid");
    model.encoder = init_table(*grid, spec.embedding_size, spec.mode, rng());
  }
  const std::size_t in = with_encoder ? spec.embedding_size : 1;
  if (spec.kind == ModelKind::Mlp || spec.kind == ModelKind::PosEncMlp) {
    if (spec.hidden.empty()) throw std::invalid_argument("build_model: MLP needs at least one hidden layer");
    MlpHead mlp;
    std::size_t width = in;
    for (std::size_t h : spec.hidden) {
      if (h == 0) throw std::invalid_argument("build_model: hidden width must be >= 1");
      mlp.layers.push_back(make_layer(width, h, rng));
      width = h;
    }
    mlp.layers.push_back(make_layer(width, spec.out_dim, rng));
    model.head = std::move(mlp);
  } else {
    model.head = LinearHead{make_layer(in, spec.out_dim, rng)};
  }
  validate(model);
  return model;
}

ForwardResult forward(const Model& model, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("forward: non-finite input");
  ForwardResult res;
  Trace& tr = res.trace;
  tr.x = x;
  const auto layers = model.layers();
  tr.activations.resize(layers.size() + 1);
  if (model.encoder) {
    tr.encoding = encode(*model.encoder, x);
    tr.activations[0] = tr.encoding->value;
  } else {
    tr.activations[0] = {x};
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& out = tr.activations[k + 1];
    out.resize(layers[k].out_dim());
    apply_layer(layers[k], tr.activations[k], out);
    if (is_rectified(k, layers.size()))
      for (double& v : out) v = v > 0.0 ? v : 0.0;
  }
  res.prediction = tr.activations.back();
  return res;
}

double mse_loss(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size() || prediction.empty())
    throw std::invalid_argument("mse_loss: prediction and target lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(prediction.size());
}

std::vector<double> mse_gradient(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size() || prediction.empty())
    throw std::invalid_argument("mse_gradient: prediction and target lengths differ");
  std::vector<double> g(prediction.size());
  const double k = 2.0 / static_cast<double>(prediction.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = k * (prediction[i] - target[i]);
  return g;
}

void ModelGrad::zero() {
  if (encoder) encoder->zero();
  for (auto& l : layers) {
    l.weight.fill(0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void ModelGrad::add(const ModelGrad& o, double s) {
  if (encoder.has_value() != o.encoder.has_value() || layers.size() != o.layers.size())
    throw std::invalid_argument("ModelGrad::add: layout mismatch");
  if (encoder) encoder->add(*o.encoder, s);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    add_into(o.layers[k].weight, layers[k].weight, s);
    axpy(s, o.layers[k].bias, layers[k].bias);
  }
}

void ModelGrad::scale(double factor) {
  auto scale_span = [factor](std::span<double> v) {
    for (double& x : v) x *= factor;
  };
  if (encoder) {
    scale_span(encoder->values.flat());
    scale_span(encoder->tangents.flat());
  }
  for (auto& l : layers) {
    scale_span(l.weight.flat());
    scale_span(l.bias);
  }
}

ModelGrad zero_grad_like(const Model& model) {
  ModelGrad g;
  if (model.encoder) g.encoder = TableGrad(*model.encoder);
  for (const auto& l : model.layers())
    g.layers.push_back({Matrix(l.out_dim(), l.in_dim()), std::vector<double>(l.out_dim())});
  return g;
}

void backward_into(const Model& model, const Trace& trace, std::span<const double> loss_grad, ModelGrad& grad) {
  const auto layers = model.layers();
  if (trace.activations.size() != layers.size() + 1 || grad.layers.size() != layers.size() ||
      trace.encoding.has_value() != model.encoder.has_value() || grad.encoder.has_value() != model.encoder.has_value())
    throw std::invalid_argument("backward: trace or gradient does not match the model");
  if (loss_grad.size() != model.out_dim()) throw std::invalid_argument("backward: loss gradient has wrong length");

  std::vector<double> delta(loss_grad.begin(), loss_grad.end());
  std::vector<double> next;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const DenseLayer& layer = layers[k];
    const auto& input = trace.activations[k];
    if (is_rectified(k, layers.size())) {
      const auto& out = trace.activations[k + 1];
      for (std::size_t r = 0; r < delta.size(); ++r)
        if (out[r] <= 0.0) delta[r] = 0.0;
    }
    LayerGrad& lg = grad.layers[k];
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      if (delta[r] == 0.0) continue;
      lg.bias[r] += delta[r];
      axpy(delta[r], input, lg.weight.row(r));
    }
    next.assign(layer.in_dim(), 0.0);
    for (std::size_t r = 0; r < layer.out_dim(); ++r)
      if (delta[r] != 0.0) axpy(delta[r], layer.weight.row(r), next);
    delta.swap(next);
  }
  if (model.encoder) accumulate_backward(*trace.encoding, delta, *grad.encoder);
}

ModelGrad backward(const Model& model, const Trace& trace, std::span<const double> loss_grad) {
  ModelGrad g = zero_grad_like(model);
  backward_into(model, trace, loss_grad, g);
  return g;
}

std::vector<double> predict_derivative(const Model& model, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("predict_derivative: non-finite input");
  if (model.encoder && model.encoder->mode() == Interpolation::Linear)
    throw UnsupportedOperation("predict_derivative: linear interpolation has no continuous input derivative");

  // Forward-mode: carry d(activation)/dx alongside the activations.
  const ForwardResult fwd = forward(model, x);
  std::vector<double> tangent =
      model.encoder ? encode_derivative(*model.encoder, x) : std::vector<double>{1.0};
  const auto layers = model.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    std::vector<double> out(layers[k].out_dim(), 0.0);
    for (std::size_t r = 0; r < out.size(); ++r) {
      const auto w = layers[k].weight.row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < tangent.size(); ++c) acc += w[c] * tangent[c];
      out[r] = acc;
    }
    if (is_rectified(k, layers.size())) {
      const auto& act = fwd.trace.activations[k + 1];
      for (std::size_t r = 0; r < out.size(); ++r)
        if (act[r] <= 0.0) out[r] = 0.0;
    }
    tangent.swap(out);
  }
  return tangent;
}

std::vector<std::span<double>> parameter_blocks(Model& model) {
  std::vector<std::span<double>> blocks;
  if (model.encoder) {
    blocks.push_back(model.encoder->values().flat());
    if (model.encoder->mode() == Interpolation::CubicHermite) blocks.push_back(model.encoder->tangents().flat());
  }
  for (auto& l : model.layers()) {
    blocks.push_back(l.weight.flat());
    blocks.push_back(l.bias);
  }
  return blocks;
}

std::vector<std::span<const double>> gradient_blocks(const Model& model, const ModelGrad& grad) {
  std::vector<std::span<const double>> blocks;
  if (model.encoder) {
    if (!grad.encoder) throw std::invalid_argument("gradient_blocks: missing encoder gradient");
    blocks.push_back(grad.encoder->values.flat());
    if (model.encoder->mode() == Interpolation::CubicHermite) blocks.push_back(grad.encoder->tangents.flat());
  }
  for (const auto& l : grad.layers) {
    blocks.push_back(l.weight.flat());
    blocks.push_back(l.bias);
  }
  return blocks;
}

}  // namespace posenc
