#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "posenc/matrix.hpp"

namespace posenc {

// Scalar inputs with vector targets. Row i is (x[i], y.row(i)).
struct Dataset {
  std::string name;
  std::vector<double> x;
  Matrix y;
  nlohmann::json metadata = nlohmann::json::object();  // generator id, seed, parameters

  std::size_t size() const { return x.size(); }
  std::size_t targets() const { return y.cols(); }
};

// Throws std::invalid_argument on shape mismatch, empty data or non-finite entries.
void validate(const Dataset& ds);

// Keeps only the listed target columns, in the given order.
Dataset select_targets(const Dataset& ds, const std::vector<std::size_t>& columns);

// sin(4 pi x) exp(-x) + 2 exp(-200 (x - 0.6)^2)
double toy_target(double x);

// x ~ U[0, 1], y = toy_target(x) + N(0, noise_sd).
Dataset gen_toy(std::uint64_t seed, std::size_t n_points, double noise_sd);

struct PairPotentialSample {
  double energy;
  double force;  // -dE/dr
};

PairPotentialSample lennard_jones(double r, double epsilon, double sigma);
PairPotentialSample morse(double r, double depth, double width, double r0);

// r ~ U[r_min, r_max], y = (energy, force). r_min must be >= 0.7 sigma.
Dataset gen_lennard_jones(std::uint64_t seed, std::size_t n_points, double epsilon, double sigma, double r_min,
                          double r_max);
// r ~ U[r_min, r_max] with 0 < r_min < r_max, y = (energy, force).
Dataset gen_morse(std::uint64_t seed, std::size_t n_points, double depth, double width, double r0, double r_min,
                  double r_max);

// Sidecar metadata lives next to the CSV at `<path>.meta.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

// Header `x,y_0,...,y_{k-1}`, one sample per line, shortest round-trip decimals.
void write_csv(const std::filesystem::path& path, const Dataset& ds);
// Throws ParseError (with 1-based line) on malformed or non-finite rows, and on empty files.
Dataset read_csv(const std::filesystem::path& path);

}  // namespace posenc
