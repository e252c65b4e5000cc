#include "posenc/serialize.hpp"

#include <fstream>
#include <stdexcept>

#include "posenc/errors.hpp"
#include "posenc/format.hpp"

namespace posenc {

namespace {

Matrix matrix_from(const nlohmann::json& arr, std::size_t rows, std::size_t cols, const char* what) {
  if (!arr.is_array() || arr.size() != rows * cols)
    throw std::invalid_argument(std::string("model file: '") + what + "' must hold " + std::to_string(rows * cols) +
                                " numbers");
  Matrix m(rows, cols);
  auto flat = m.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = arr[i].get<double>();
  return m;
}

std::vector<double> to_vec(std::span<const double> v) { return {v.begin(), v.end()}; }

nlohmann::json layer_to_json(const DenseLayer& l) {
  return {{"in", l.in_dim()}, {"out", l.out_dim()}, {"W", to_vec(l.weight.flat())}, {"b", l.bias}};
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  const auto in = j.at("in").get<std::size_t>();
  const auto out = j.at("out").get<std::size_t>();
  DenseLayer l{matrix_from(j.at("W"), out, in, "W"), j.at("b").get<std::vector<double>>()};
  if (l.bias.size() != out) throw std::invalid_argument("model file: bias length must equal 'out'");
  return l;
}

}  // namespace

nlohmann::json table_to_json(const EmbeddingTable& t) {
  return {{"mode", std::string(to_string(t.mode()))},
          {"s", t.dim()},
          {"grid", {{"x_min", t.grid().x_min()}, {"x_max", t.grid().x_max()}, {"n_bin", t.n_bin()}}},
          {"H", to_vec(t.values().flat())},
          {"G", to_vec(t.tangents().flat())}};
}

EmbeddingTable table_from_json(const nlohmann::json& j) {
  const auto& g = j.at("grid");
  BinGrid grid(g.at("x_min").get<double>(), g.at("x_max").get<double>(), g.at("n_bin").get<std::size_t>());
  const auto s = j.at("s").get<std::size_t>();
  const auto mode = parse_interpolation(j.at("mode").get<std::string>());
  Matrix h = matrix_from(j.at("H"), grid.n_bin(), s, "H");
  Matrix tangents = j.contains("G") ? matrix_from(j.at("G"), grid.n_bin(), s, "G") : Matrix(grid.n_bin(), s);
  return EmbeddingTable(grid, mode, std::move(h), std::move(tangents));
}

nlohmann::json model_to_json(const Model& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers()) layers.push_back(layer_to_json(l));
  const bool mlp = std::holds_alternative<MlpHead>(model.head);
  return {{"format", "posenc-model"},
          {"version", kModelFormatVersion},
          {"kind", std::string(to_string(model.kind()))},
          {"lambda", model.lambda},
          {"encoder", model.encoder ? table_to_json(*model.encoder) : nlohmann::json(nullptr)},
          {"head", {{"type", mlp ? "mlp" : "linear"}, {"layers", layers}}}};
}

Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "posenc-model") throw std::invalid_argument("model file: bad 'format' tag");
    if (j.at("version").get<int>() != kModelFormatVersion) throw std::invalid_argument("model file: unsupported version");
    Model model{std::nullopt, LinearHead{}, j.at("lambda").get<double>()};
    if (!j.at("encoder").is_null()) model.encoder = table_from_json(j.at("encoder"));
    const auto& head = j.at("head");
    const auto type = head.at("type").get<std::string>();
    std::vector<DenseLayer> layers;
    for (const auto& lj : head.at("layers")) layers.push_back(layer_from_json(lj));
    if (type == "linear") {
      if (layers.size() != 1) throw std::invalid_argument("model file: linear head must have exactly one layer");
      model.head = LinearHead{std::move(layers.front())};
    } else if (type == "mlp") {
      model.head = MlpHead{std::move(layers)};
    } else {
      throw std::invalid_argument("model file: unknown head type '" + type + "'");
    }
    validate(model);
    if (parse_model_kind(j.at("kind").get<std::string>()) != model.kind())
      throw std::invalid_argument("model file: 'kind' disagrees with encoder/head");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("model file: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& model) { write_json(path, model_to_json(model)); }

Model load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_json(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_table_csv(const std::filesystem::path& path, const EmbeddingTable& table, std::size_t resolution) {
  if (resolution < 2) throw std::invalid_argument("write_table_csv: resolution must be >= 2");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "x_hat";
  for (std::size_t j = 0; j < table.dim(); ++j) out << ",dim_" << j;
  out << '\n';
  const BinGrid& g = table.grid();
  std::vector<double> value(table.dim());
  for (std::size_t k = 0; k < resolution; ++k) {
    const double xh = static_cast<double>(k) / static_cast<double>(resolution - 1);
    const double x = k + 1 == resolution ? g.x_max() : g.x_min() + xh * (g.x_max() - g.x_min());
    encode_into(table, x, value);
    out << format_double(xh);
    for (double v : value) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace posenc
