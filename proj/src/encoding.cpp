#include "posenc/encoding.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace posenc {

namespace {

void require_unit_t(double t, const char* who) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument(std::string(who) + ": t must lie in [0, 1]");
}

Coefficients coefficients_for(Interpolation mode, double t) {
  if (mode == Interpolation::Linear) return {1.0 - t, t, 0.0, 0.0};
  return hermite_coefficients(t);
}

// out = (d/dt coefficients applied to rows lower, lower + 1) / spacing
void interval_derivative(const EmbeddingTable& table, std::size_t lower, double t, std::span<double> out) {
  const auto h0 = table.values().row(lower);
  const auto h1 = table.values().row(lower + 1);
  const double inv = 1.0 / table.grid().spacing();
  if (table.mode() == Interpolation::Linear) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (h1[j] - h0[j]) * inv;
    return;
  }
  const auto d = hermite_coefficient_derivatives(t);
  const auto g0 = table.tangents().row(lower);
  const auto g1 = table.tangents().row(lower + 1);
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = (d.c1 * h0[j] + d.c2 * h1[j] + d.c3 * g0[j] + d.c4 * g1[j]) * inv;
}

}  // namespace

std::string_view to_string(Interpolation mode) {
  return mode == Interpolation::Linear ? "linear" : "cubic_hermite";
}

Interpolation parse_interpolation(std::string_view name) {
  if (name == "linear") return Interpolation::Linear;
  if (name == "cubic_hermite" || name == "cubic" || name == "hermite") return Interpolation::CubicHermite;
  throw std::invalid_argument("unknown interpolation mode '" + std::string(name) + "'");
}

Coefficients hermite_coefficients(double t) {
  require_unit_t(t, "hermite_coefficients");
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double c1 = 2.0 * t3 - 3.0 * t2 + 1.0;
  return {c1, 1.0 - c1, t3 - 2.0 * t2 + t, t3 - t2};
}

Coefficients hermite_coefficient_derivatives(double t) {
  require_unit_t(t, "hermite_coefficient_derivatives");
  const double t2 = t * t;
  const double d1 = 6.0 * t2 - 6.0 * t;
  return {d1, -d1, 3.0 * t2 - 4.0 * t + 1.0, 3.0 * t2 - 2.0 * t};
}

EmbeddingTable::EmbeddingTable(BinGrid grid, std::size_t s, Interpolation mode)
    : grid_(grid), s_(s), mode_(mode), h_(grid.n_bin(), s), g_(grid.n_bin(), s) {
  if (s == 0) throw std::invalid_argument("EmbeddingTable: embedding size must be >= 1");
}

EmbeddingTable::EmbeddingTable(BinGrid grid, Interpolation mode, Matrix values, Matrix tangents)
    : grid_(grid), s_(values.cols()), mode_(mode), h_(std::move(values)), g_(std::move(tangents)) {
  if (s_ == 0) throw std::invalid_argument("EmbeddingTable: embedding size must be >= 1");
  if (h_.rows() != grid_.n_bin()) throw std::invalid_argument("EmbeddingTable: value rows must equal n_bin");
  if (g_.empty()) g_ = Matrix(grid_.n_bin(), s_);
  if (!g_.same_shape(h_)) throw std::invalid_argument("EmbeddingTable: tangent shape must match value shape");
  for (double v : h_.flat())
    if (!std::isfinite(v)) throw std::invalid_argument("EmbeddingTable: non-finite value entry");
  for (double v : g_.flat())
    if (!std::isfinite(v)) throw std::invalid_argument("EmbeddingTable: non-finite tangent entry");
}

std::size_t EmbeddingTable::parameter_count() const {
  const std::size_t per = s_ * grid_.n_bin();
  return mode_ == Interpolation::CubicHermite ? 2 * per : per;
}

EmbeddingTable init_table(const BinGrid& grid, std::size_t s, Interpolation mode, std::uint64_t seed) {
  EmbeddingTable table(grid, s, mode);
  const double alpha = 1.0 / std::sqrt(static_cast<double>(s));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-alpha, alpha);
  for (double& v : table.values().flat()) v = dist(rng);
  return table;
}

void encode_into(const EmbeddingTable& table, double x, std::span<double> out, EncodeRecord* record) {
  if (!std::isfinite(x)) throw std::invalid_argument("encode: non-finite input");
  if (out.size() != table.dim()) throw std::invalid_argument("encode: output size must equal embedding size");
  const GridLocation loc = table.grid().locate(x);
  const Coefficients c = coefficients_for(table.mode(), loc.t);
  const auto h0 = table.values().row(loc.lower);
  const auto h1 = table.values().row(loc.lower + 1);
  if (table.mode() == Interpolation::Linear) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = c.c1 * h0[j] + c.c2 * h1[j];
  } else {
    const auto g0 = table.tangents().row(loc.lower);
    const auto g1 = table.tangents().row(loc.lower + 1);
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = c.c1 * h0[j] + c.c2 * h1[j] + c.c3 * g0[j] + c.c4 * g1[j];
  }
  if (record) {
    record->location = loc;
    record->coeffs = c;
    record->x_clamped = !table.grid().contains(x);
    record->n_bin = table.n_bin();
    record->dim = table.dim();
  }
}

EncodeRecord encode(const EmbeddingTable& table, double x) {
  EncodeRecord rec;
  rec.value.resize(table.dim());
  encode_into(table, x, rec.value, &rec);
  return rec;
}

void encode_derivative_into(const EmbeddingTable& table, double x, std::span<double> out) {
  if (!std::isfinite(x)) throw std::invalid_argument("encode_derivative: non-finite input");
  if (out.size() != table.dim()) throw std::invalid_argument("encode_derivative: output size must equal embedding size");
  if (!table.grid().contains(x)) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const GridLocation loc = table.grid().locate(x);
  interval_derivative(table, loc.lower, loc.t, out);
}

std::vector<double> encode_derivative(const EmbeddingTable& table, double x) {
  std::vector<double> out(table.dim());
  encode_derivative_into(table, x, out);
  return out;
}

std::vector<double> derivative_on_interval(const EmbeddingTable& table, std::size_t lower, double t) {
  if (lower + 1 >= table.n_bin()) throw std::invalid_argument("derivative_on_interval: interval index out of range");
  require_unit_t(t, "derivative_on_interval");
  std::vector<double> out(table.dim());
  interval_derivative(table, lower, t, out);
  return out;
}

void ParamGrad::scatter_into(TableGrad& dense, double scale) const {
  if (dense.values.rows() != n_bin || dense.values.cols() != dim)
    throw std::invalid_argument("ParamGrad: shape mismatch with dense gradient");
  for (const Row& r : rows) {
    axpy(scale, r.d_value, dense.values.row(r.index));
    axpy(scale, r.d_tangent, dense.tangents.row(r.index));
  }
}

TableGrad ParamGrad::to_dense() const {
  TableGrad dense(n_bin, dim);
  scatter_into(dense);
  return dense;
}

ParamGrad encode_backward(const EncodeRecord& record, std::span<const double> upstream) {
  if (upstream.size() != record.dim) throw std::invalid_argument("encode_backward: upstream size must equal embedding size");
  ParamGrad g;
  g.n_bin = record.n_bin;
  g.dim = record.dim;
  const auto c = record.coeffs;
  const std::array<std::pair<double, double>, 2> w = {{{c.c1, c.c3}, {c.c2, c.c4}}};
  for (std::size_t k = 0; k < 2; ++k) {
    auto& row = g.rows[k];
    row.index = record.location.lower + k;
    row.d_value.resize(record.dim);
    row.d_tangent.resize(record.dim);
    for (std::size_t j = 0; j < record.dim; ++j) {
      row.d_value[j] = w[k].first * upstream[j];
      row.d_tangent[j] = w[k].second * upstream[j];
    }
  }
  return g;
}

void accumulate_backward(const EncodeRecord& record, std::span<const double> upstream, TableGrad& grad) {
  if (upstream.size() != record.dim || grad.values.cols() != record.dim || grad.values.rows() != record.n_bin)
    throw std::invalid_argument("accumulate_backward: shape mismatch");
  const auto c = record.coeffs;
  const std::size_t i = record.location.lower;
  axpy(c.c1, upstream, grad.values.row(i));
  axpy(c.c2, upstream, grad.values.row(i + 1));
  if (c.c3 != 0.0) axpy(c.c3, upstream, grad.tangents.row(i));
  if (c.c4 != 0.0) axpy(c.c4, upstream, grad.tangents.row(i + 1));
}

}  // namespace posenc
