#pragma once

// Weight file:
//   {"dims": [d_0, ..., d_L], "activation": "tanh", "scale_s": s, "offset_c": c,
//    "layers": [{"W": [row-major], "b": [...]}, ...]}

#include <filesystem>
#include <string>

#include <json.hpp>

#include "floquet_lab/network.hpp"

namespace flab {

nlohmann::json to_json(const Mlp& m);
Mlp mlp_from_json(const nlohmann::json& j);

std::string dump_weights(const Mlp& m);
Mlp read_weights(const std::filesystem::path& path);
void write_weights(const Mlp& m, const std::filesystem::path& path);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);  // {"rows", "cols", "data" row-major}
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace flab
