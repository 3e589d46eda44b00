#include "floquet_lab/network_io.hpp"

#include <fstream>
#include <sstream>

#include "floquet_lab/io.hpp"

namespace flab {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorKind::InvalidInput, "expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(ErrorKind::InvalidInput, "expected a numeric array");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Vector flat = vector_from_json(j.at("data"));
  if (flat.size() != rows * cols) fail(ErrorKind::Dimension, "matrix data length != rows * cols");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat(r * cols + c);
  return m;
}

json to_json(const Mlp& m) {
  json layers = json::array();
  for (const auto& l : m.layers()) {
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    layers.push_back({{"W", w}, {"b", vector_to_json(l.bias)}});
  }
  return {{"dims", m.dims()},
          {"activation", std::string(m.activation().name())},
          {"scale_s", m.scale()},
          {"offset_c", m.offset()},
          {"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
  try {
    const auto dims = j.at("dims").get<std::vector<Eigen::Index>>();
    const auto& jl = j.at("layers");
    if (dims.size() < 2 || jl.size() != dims.size() - 1) {
      fail(ErrorKind::InvalidInput, "weight file: dims and layers disagree");
    }
    std::vector<Layer> layers;
    for (std::size_t k = 0; k < jl.size(); ++k) {
      const Eigen::Index rows = dims[k + 1], cols = dims[k];
      const Vector flat = vector_from_json(jl[k].at("W"));
      if (flat.size() != rows * cols) {
        fail(ErrorKind::Dimension, "weight file: layer " + std::to_string(k + 1) + " W has " +
                                       std::to_string(flat.size()) + " entries, expected " +
                                       std::to_string(rows * cols));
      }
      Layer layer{Matrix(rows, cols), vector_from_json(jl[k].at("b"))};
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = flat(r * cols + c);
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers), parse_activation(j.at("activation").get<std::string>()),
               j.at("scale_s").get<double>(), j.at("offset_c").get<double>());
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("weight file: ") + e.what());
  }
}

std::string dump_weights(const Mlp& m) { return to_json(m).dump(2) + "\n"; }

Mlp read_weights(const std::filesystem::path& path) { return mlp_from_json(read_json_file(path)); }

void write_weights(const Mlp& m, const std::filesystem::path& path) { write_text_atomic(path, dump_weights(m)); }

}  // namespace flab
