#pragma once

#include <filesystem>

#include "json.hpp"
#include "posenc/model.hpp"

namespace posenc {

inline constexpr int kModelFormatVersion = 1;

// Model file layout:
//   {"format": "posenc-model", "version": 1, "kind": "posenc-linear", "lambda": 1.0,
//    "encoder": {"mode": "cubic_hermite", "s": 16,
//                "grid": {"x_min": 0.0, "x_max": 1.0, "n_bin": 64},
//                "H": [row-major n_bin*s], "G": [row-major n_bin*s]},
//    "head": {"type": "linear" | "mlp", "layers": [{"in": 16, "out": 1, "W": [row-major], "b": [...]}]}}
// "encoder" is null for raw-input models.
nlohmann::json table_to_json(const EmbeddingTable& table);
EmbeddingTable table_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const Model& model);
// Throws std::invalid_argument on a malformed document.
Model model_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

// Columns x_hat,dim_0..dim_{s-1}; `resolution` evenly spaced points over the grid.
void write_table_csv(const std::filesystem::path& path, const EmbeddingTable& table, std::size_t resolution);

// Writes `j` pretty-printed; throws std::runtime_error naming the path on failure.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace posenc
