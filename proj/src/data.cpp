#include "posenc/data.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "posenc/errors.hpp"
#include "posenc/format.hpp"

namespace posenc {

namespace {

std::vector<double> uniform_samples(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> xs(n);
  for (double& x : xs) x = dist(rng);
  return xs;
}

void check_range(double r_min, double r_max, const char* who) {
  if (!std::isfinite(r_min) || !std::isfinite(r_max) || !(r_min > 0.0) || !(r_max > r_min))
    throw std::invalid_argument(std::string(who) + ": need 0 < r_min < r_max");
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

void validate(const Dataset& ds) {
  if (ds.x.empty()) throw std::invalid_argument("dataset '" + ds.name + "' is empty");
  if (ds.y.rows() != ds.x.size()) throw std::invalid_argument("dataset '" + ds.name + "': x and y row counts differ");
  if (ds.y.cols() == 0) throw std::invalid_argument("dataset '" + ds.name + "' has no target columns");
  for (double v : ds.x)
    if (!std::isfinite(v)) throw std::invalid_argument("dataset '" + ds.name + "': non-finite x");
  for (double v : ds.y.flat())
    if (!std::isfinite(v)) throw std::invalid_argument("dataset '" + ds.name + "': non-finite target");
}

Dataset select_targets(const Dataset& ds, const std::vector<std::size_t>& columns) {
  if (columns.empty()) throw std::invalid_argument("select_targets: no columns requested");
  Dataset out{ds.name, ds.x, Matrix(ds.size(), columns.size()), ds.metadata};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= ds.targets())
      throw std::invalid_argument("select_targets: column " + std::to_string(columns[c]) + " out of range");
    for (std::size_t i = 0; i < ds.size(); ++i) out.y(i, c) = ds.y(i, columns[c]);
  }
  out.metadata["target_columns"] = columns;
  return out;
}

double toy_target(double x) {
  const double d = x - 0.6;
  return std::sin(4.0 * std::numbers::pi * x) * std::exp(-x) + 2.0 * std::exp(-200.0 * d * d);
}

Dataset gen_toy(std::uint64_t seed, std::size_t n_points, double noise_sd) {
  if (n_points < 2) throw std::invalid_argument("gen_toy: need at least 2 points");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("gen_toy: noise_sd must be >= 0");
  std::mt19937_64 rng(seed);
  Dataset ds{"toy", uniform_samples(rng, n_points, 0.0, 1.0), Matrix(n_points, 1), {}};
  std::normal_distribution<double> noise(0.0, noise_sd > 0.0 ? noise_sd : 1.0);
  for (std::size_t i = 0; i < n_points; ++i)
    ds.y(i, 0) = toy_target(ds.x[i]) + (noise_sd > 0.0 ? noise(rng) : 0.0);
  ds.metadata = {{"generator", "toy"}, {"seed", seed}, {"n_points", n_points}, {"noise_sd", noise_sd}};
  return ds;
}

PairPotentialSample lennard_jones(double r, double epsilon, double sigma) {
  const double sr6 = std::pow(sigma / r, 6);
  const double sr12 = sr6 * sr6;
  return {4.0 * epsilon * (sr12 - sr6), 24.0 * epsilon * (2.0 * sr12 - sr6) / r};
}

PairPotentialSample morse(double r, double depth, double width, double r0) {
  const double e = std::exp(-width * (r - r0));
  const double one_minus = 1.0 - e;
  return {depth * one_minus * one_minus, -2.0 * depth * width * e * one_minus};
}

Dataset gen_lennard_jones(std::uint64_t seed, std::size_t n_points, double epsilon, double sigma, double r_min,
                          double r_max) {
  if (n_points < 2) throw std::invalid_argument("gen_lennard_jones: need at least 2 points");
  if (!(sigma > 0.0) || !(epsilon > 0.0)) throw std::invalid_argument("gen_lennard_jones: epsilon and sigma must be > 0");
  check_range(r_min, r_max, "gen_lennard_jones");
  if (r_min < 0.7 * sigma) throw std::invalid_argument("gen_lennard_jones: r_min must be >= 0.7 sigma");
  std::mt19937_64 rng(seed);
  Dataset ds{"lennard_jones", uniform_samples(rng, n_points, r_min, r_max), Matrix(n_points, 2), {}};
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto p = lennard_jones(ds.x[i], epsilon, sigma);
    ds.y(i, 0) = p.energy;
    ds.y(i, 1) = p.force;
  }
  ds.metadata = {{"generator", "lennard_jones"}, {"seed", seed},   {"n_points", n_points}, {"epsilon", epsilon},
                 {"sigma", sigma},               {"r_min", r_min}, {"r_max", r_max},       {"columns", {"energy", "force"}}};
  return ds;
}

Dataset gen_morse(std::uint64_t seed, std::size_t n_points, double depth, double width, double r0, double r_min,
                  double r_max) {
  if (n_points < 2) throw std::invalid_argument("gen_morse: need at least 2 points");
  if (!(depth > 0.0) || !(width > 0.0) || !(r0 > 0.0)) throw std::invalid_argument("gen_morse: D, a and r0 must be > 0");
  check_range(r_min, r_max, "gen_morse");
  std::mt19937_64 rng(seed);
  Dataset ds{"morse", uniform_samples(rng, n_points, r_min, r_max), Matrix(n_points, 2), {}};
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto p = morse(ds.x[i], depth, width, r0);
    ds.y(i, 0) = p.energy;
    ds.y(i, 1) = p.force;
  }
  ds.metadata = {{"generator", "morse"}, {"seed", seed},   {"n_points", n_points}, {"depth", depth}, {"width", width},
                 {"r0", r0},             {"r_min", r_min}, {"r_max", r_max},       {"columns", {"energy", "force"}}};
  return ds;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p += ".meta.json";
  return p;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  validate(ds);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "x";
  for (std::size_t c = 0; c < ds.targets(); ++c) out << ",y_" << c;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << format_double(ds.x[i]);
    for (std::size_t c = 0; c < ds.targets(); ++c) out << ',' << format_double(ds.y(i, c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");

  nlohmann::json meta = ds.metadata;
  meta["name"] = ds.name;
  std::ofstream side(sidecar_path(path));
  if (!side) throw std::runtime_error("cannot open '" + sidecar_path(path).string() + "' for writing");
  side << meta.dump(2) << '\n';
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  const std::string where = path.string();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(where, 0, "empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "x") throw ParseError(where, line_no, "header must be x,y_0,...");
  const std::size_t k = header.size() - 1;

  std::vector<double> xs;
  std::vector<double> ys;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != k + 1)
      throw ParseError(where, line_no, "expected " + std::to_string(k + 1) + " fields, got " + std::to_string(fields.size()));
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const auto v = parse_double(fields[f]);
      if (!v) throw ParseError(where, line_no, "bad number '" + std::string(fields[f]) + "'");
      if (!std::isfinite(*v)) throw ParseError(where, line_no, "non-finite value '" + std::string(fields[f]) + "'");
      (f == 0 ? xs : ys).push_back(*v);
    }
  }
  if (xs.empty()) throw ParseError(where, line_no, "no data rows");

  Dataset ds;
  ds.x = std::move(xs);
  ds.y = Matrix(ds.x.size(), k);
  std::copy(ys.begin(), ys.end(), ds.y.flat().begin());
  ds.name = path.stem().string();

  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream sin(side);
    try {
      ds.metadata = nlohmann::json::parse(sin);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(side.string(), 0, e.what());
    }
    if (ds.metadata.contains("name") && ds.metadata["name"].is_string()) {
      ds.name = ds.metadata["name"].get<std::string>();
      ds.metadata.erase("name");
    }
  }
  return ds;
}

}  // namespace posenc
