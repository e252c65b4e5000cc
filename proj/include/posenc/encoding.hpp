#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "posenc/grid.hpp"
#include "posenc/matrix.hpp"

namespace posenc {

enum class Interpolation { Linear, CubicHermite };

std::string_view to_string(Interpolation mode);
// Accepts "linear" and "cubic_hermite" (also "cubic", "hermite").
Interpolation parse_interpolation(std::string_view name);

// Weights of h(lower), h(upper), g(lower), g(upper).
struct Coefficients {
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0;
  std::array<double, 4> as_array() const { return {c1, c2, c3, c4}; }
};

// Cubic Hermite basis at t in [0, 1]; throws std::invalid_argument otherwise.
Coefficients hermite_coefficients(double t);
// d/dt of the basis above.
Coefficients hermite_coefficient_derivatives(double t);

// Learnable embedding over a bin grid: one value row H[i] and one tangent row
// G[i] per bin center. Tangents are dh/dt in the unit interval coordinate, so
// dh/dx at a center is G[i] / spacing. Linear tables carry a G matrix but never
// read it.
class EmbeddingTable {
 public:
  EmbeddingTable(BinGrid grid, std::size_t s, Interpolation mode);
  EmbeddingTable(BinGrid grid, Interpolation mode, Matrix values, Matrix tangents);

  const BinGrid& grid() const { return grid_; }
  std::size_t n_bin() const { return grid_.n_bin(); }
  std::size_t dim() const { return s_; }
  Interpolation mode() const { return mode_; }

  Matrix& values() { return h_; }
  const Matrix& values() const { return h_; }
  Matrix& tangents() { return g_; }
  const Matrix& tangents() const { return g_; }

  // 2 * s * n_bin for cubic Hermite, s * n_bin for linear.
  std::size_t parameter_count() const;

  bool same_shape(const EmbeddingTable& o) const {
    return grid_ == o.grid_ && s_ == o.s_ && mode_ == o.mode_;
  }

 private:
  BinGrid grid_;
  std::size_t s_;
  Interpolation mode_;
  Matrix h_;
  Matrix g_;
};

// H ~ U[-1/sqrt(s), 1/sqrt(s)], G = 0. Deterministic in `seed`.
EmbeddingTable init_table(const BinGrid& grid, std::size_t s, Interpolation mode, std::uint64_t seed);

// Result of a forward lookup, with everything needed to push gradients back
// into the table.
struct EncodeRecord {
  GridLocation location;
  Coefficients coeffs;  // linear mode: c1 = 1 - t, c2 = t, c3 = c4 = 0
  std::vector<double> value;
  bool x_clamped = false;
  std::size_t n_bin = 0;
  std::size_t dim = 0;
};

EncodeRecord encode(const EmbeddingTable& table, double x);
// Allocation-free variant used by the batch kernels; `out` must have size s.
void encode_into(const EmbeddingTable& table, double x, std::span<double> out, EncodeRecord* record = nullptr);

// dh/dx at x. Zero outside [x_min, x_max] where the clamped encoding is constant.
std::vector<double> encode_derivative(const EmbeddingTable& table, double x);
void encode_derivative_into(const EmbeddingTable& table, double x, std::span<double> out);

// dh/dx on a specific interval at local coordinate t, ignoring locate(). Used
// to read the one-sided derivatives at a center.
std::vector<double> derivative_on_interval(const EmbeddingTable& table, std::size_t lower, double t);

// Gradient of one or more lookups with respect to H and G. Dense storage with
// the same shape as the table.
struct TableGrad {
  Matrix values;
  Matrix tangents;

  TableGrad() = default;
  TableGrad(std::size_t n_bin, std::size_t s) : values(n_bin, s), tangents(n_bin, s) {}
  explicit TableGrad(const EmbeddingTable& t) : TableGrad(t.n_bin(), t.dim()) {}

  void zero() {
    values.fill(0.0);
    tangents.fill(0.0);
  }
  void add(const TableGrad& o, double scale = 1.0) {
    add_into(o.values, values, scale);
    add_into(o.tangents, tangents, scale);
  }
};

// Sparse gradient of a single lookup: it only ever touches rows lower and lower + 1.
struct ParamGrad {
  struct Row {
    std::size_t index = 0;
    std::vector<double> d_value;
    std::vector<double> d_tangent;
  };
  std::size_t n_bin = 0;
  std::size_t dim = 0;
  std::array<Row, 2> rows;

  void scatter_into(TableGrad& dense, double scale = 1.0) const;
  TableGrad to_dense() const;
};

// Gradient of dot(upstream, encode(x)) with respect to the table.
ParamGrad encode_backward(const EncodeRecord& record, std::span<const double> upstream);
// Same, accumulated straight into a dense gradient.
void accumulate_backward(const EncodeRecord& record, std::span<const double> upstream, TableGrad& grad);

}  // namespace posenc
