#include "posenc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace posenc {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

}  // namespace

BinGrid::BinGrid(double x_min, double x_max, std::size_t n_bin)
    : x_min_(x_min), x_max_(x_max), n_bin_(n_bin), spacing_(0.0) {
  if (n_bin < 2) throw std::invalid_argument("BinGrid: n_bin must be >= 2, got " + std::to_string(n_bin));
  if (!std::isfinite(x_min) || !std::isfinite(x_max))
    throw std::invalid_argument("BinGrid: range bounds must be finite");
  if (!(x_max > x_min)) throw std::invalid_argument("BinGrid: x_max must be strictly greater than x_min");
  spacing_ = (x_max - x_min) / static_cast<double>(n_bin - 1);
}

double BinGrid::center(std::size_t i) const {
  if (i + 1 >= n_bin_) return x_max_;
  return x_min_ + static_cast<double>(i) * spacing_;
}

std::vector<double> BinGrid::centers() const {
  std::vector<double> c(n_bin_);
  for (std::size_t i = 0; i < n_bin_; ++i) c[i] = center(i);
  return c;
}

double BinGrid::clamp(double x) const { return std::clamp(x, x_min_, x_max_); }

GridLocation BinGrid::locate(double x) const {
  require_finite(x, "locate");
  x = clamp(x);
  const std::size_t last = n_bin_ - 2;  // last interval index
  const double u = (x - x_min_) / spacing_;
  std::size_t i = u <= 0.0 ? 0 : std::min(static_cast<std::size_t>(std::floor(u)), last);
  // floor(u) can be off by one near a center because of rounding in u.
  if (i < last && x >= center(i + 1)) ++i;
  if (i > 0 && x < center(i)) --i;
  const double t = std::clamp((x - center(i)) / spacing_, 0.0, 1.0);
  return {i, t};
}

double BinGrid::normalize(double x) const {
  require_finite(x, "normalize");
  return (x - x_min_) / (x_max_ - x_min_);
}

}  // namespace posenc
