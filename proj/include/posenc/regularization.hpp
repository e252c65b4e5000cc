#pragma once

#include "posenc/encoding.hpp"

namespace posenc {

// Relative roughness of a table: sum of adjacent value-row distances over the
// sum of value-row norms, both over rows 0..n_bin-2. Tangents are not read.
struct SmoothnessResult {
  double loss = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  bool degenerate = false;  // denominator below kDegenerateDenominator; loss reported as 0
};

inline constexpr double kDegenerateDenominator = 1e-12;

SmoothnessResult smoothness_loss(const EmbeddingTable& table);

struct SmoothnessGradient {
  TableGrad grad;  // tangent part is always zero
  bool degenerate = false;
};

// Quotient-rule gradient of smoothness_loss with respect to every value row.
// Zero-norm rows and zero-length differences contribute a zero subgradient.
SmoothnessGradient smoothness_backward(const EmbeddingTable& table);

// grad += lambda * d(smoothness)/d(table); returns the loss that was differentiated.
SmoothnessResult accumulate_smoothness(const EmbeddingTable& table, double lambda, TableGrad& grad);

// L_orig + lambda * L_smooth. Throws std::invalid_argument for negative lambda or non-finite input.
double combined_loss(double orig, double smooth, double lambda);

}  // namespace posenc
