#pragma once

#include <cstddef>
#include <vector>

namespace posenc {

// Where a query point falls on the grid. `lower` is the 0-based index of the
// bin center at or below x (the serialized/documented form is 1-based), and
// t is the position inside [center(lower), center(lower + 1)], in [0, 1].
struct GridLocation {
  std::size_t lower = 0;
  double t = 0.0;

  std::size_t one_based() const { return lower + 1; }
  friend bool operator==(const GridLocation&, const GridLocation&) = default;
};

// Uniform discretization of [x_min, x_max] into n_bin centers. Immutable.
class BinGrid {
 public:
  // Throws std::invalid_argument unless n_bin >= 2 and x_max > x_min (both finite).
  BinGrid(double x_min, double x_max, std::size_t n_bin);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  std::size_t n_bin() const { return n_bin_; }
  double spacing() const { return spacing_; }

  // 0-based center; center(n_bin - 1) == x_max exactly.
  double center(std::size_t i) const;
  std::vector<double> centers() const;

  double clamp(double x) const;
  bool contains(double x) const { return x >= x_min_ && x <= x_max_; }

  // Out-of-range x is clamped first. An x that hits an interior center exactly
  // lands at t = 0 of the interval starting there.
  GridLocation locate(double x) const;

  // (x - x_min) / (x_max - x_min), no clamping.
  double normalize(double x) const;

  friend bool operator==(const BinGrid&, const BinGrid&) = default;

 private:
  double x_min_;
  double x_max_;
  std::size_t n_bin_;
  double spacing_;
};

inline BinGrid make_grid(double x_min, double x_max, std::size_t n_bin) {
  return BinGrid(x_min, x_max, n_bin);
}

}  // namespace posenc
