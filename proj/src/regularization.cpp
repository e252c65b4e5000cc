#include "posenc/regularization.hpp"

#include <cmath>
#include <stdexcept>

namespace posenc {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double diff_norm(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = b[j] - a[j];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

SmoothnessResult smoothness_loss(const EmbeddingTable& table) {
  const Matrix& h = table.values();
  const std::size_t n = h.rows();
  SmoothnessResult r;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    r.numerator += diff_norm(h.row(i), h.row(i + 1));
    r.denominator += norm2(h.row(i));
  }
  if (r.denominator < kDegenerateDenominator) {
    r.degenerate = true;
    r.loss = 0.0;
  } else {
    r.loss = r.numerator / r.denominator;
  }
  return r;
}

SmoothnessResult accumulate_smoothness(const EmbeddingTable& table, double lambda, TableGrad& grad) {
  const SmoothnessResult r = smoothness_loss(table);
  if (r.degenerate || lambda == 0.0) return r;
  const Matrix& h = table.values();
  const std::size_t n = h.rows();
  const std::size_t s = h.cols();
  if (grad.values.rows() != n || grad.values.cols() != s)
    throw std::invalid_argument("accumulate_smoothness: gradient shape mismatch");

  const double inv_den = 1.0 / r.denominator;
  const double ratio = r.loss;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    auto g_lo = grad.values.row(i);
    auto g_hi = grad.values.row(i + 1);
    const auto lo = h.row(i);
    const auto hi = h.row(i + 1);

    // numerator term: d||hi - lo|| pushes hi along the difference and lo against it
    const double dn = diff_norm(lo, hi);
    if (dn > 0.0) {
      for (std::size_t j = 0; j < s; ++j) {
        const double u = lambda * inv_den * (hi[j] - lo[j]) / dn;
        g_hi[j] += u;
        g_lo[j] -= u;
      }
    }
    // denominator term: -L/D * d||lo||
    const double nl = norm2(lo);
    if (nl > 0.0) {
      const double k = lambda * ratio * inv_den / nl;
      for (std::size_t j = 0; j < s; ++j) g_lo[j] -= k * lo[j];
    }
  }
  return r;
}

SmoothnessGradient smoothness_backward(const EmbeddingTable& table) {
  SmoothnessGradient out{TableGrad(table), false};
  out.degenerate = accumulate_smoothness(table, 1.0, out.grad).degenerate;
  return out;
}

double combined_loss(double orig, double smooth, double lambda) {
  if (!std::isfinite(orig) || !std::isfinite(smooth) || !std::isfinite(lambda))
    throw std::invalid_argument("combined_loss: non-finite input");
  if (lambda < 0.0) throw std::invalid_argument("combined_loss: lambda must be non-negative");
  return orig + lambda * smooth;
}

}  // namespace posenc
