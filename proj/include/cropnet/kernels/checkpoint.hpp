#pragma once

// Checkpoint manifest (JSON):
//
//   {
//     "format": "cropnet-checkpoint",
//     "version": 1,
//     "meta": { ...free-form, e.g. model spec and vocabulary... },
//     "arrays": [ {"name": str, "rows": int, "cols": int, "data": [row-major doubles]} ... ]
//   }
//
// Arrays appear in parameter-store order. Doubles are written in shortest
// round-trip form, so save -> load is bit-exact and identical parameters
// always serialise to identical bytes.

#include <fstream>
#include <string>

#include <json.hpp>

#include "cropnet/kernels/tensor.hpp"

namespace cropnet::kernels {

inline constexpr const char* kCheckpointFormat = "cropnet-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const ParamStore& store, nlohmann::json meta = nlohmann::json::object()) {
  nlohmann::json arrays = nlohmann::json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Param& p = store[i];
    std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
    arrays.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", data}});
  }
  return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"meta", std::move(meta)}, {"arrays", arrays}};
}

// Loads values into an already-shaped store; names and shapes must match.
inline void from_json(const nlohmann::json& j, ParamStore& store) {
  if (j.value("format", "") != kCheckpointFormat) throw InputError("not a cropnet checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw InputError("unsupported checkpoint version");
  const auto& arrays = j.at("arrays");
  if (arrays.size() != store.size())
    throw ShapeError("checkpoint holds " + std::to_string(arrays.size()) + " arrays, model has " +
                     std::to_string(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param& p = store[i];
    const auto& a = arrays[i];
    if (a.at("name").get<std::string>() != p.name)
      throw ShapeError("checkpoint array " + a.at("name").get<std::string>() + " where " + p.name + " expected");
    const auto rows = a.at("rows").get<Eigen::Index>();
    const auto cols = a.at("cols").get<Eigen::Index>();
    if (rows != p.value.rows() || cols != p.value.cols())
      throw ShapeError("checkpoint array " + p.name + " has shape (" + std::to_string(rows) + "x" +
                       std::to_string(cols) + "), model wants " + shape_str(p.value));
    const auto data = a.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ShapeError("checkpoint array " + p.name + " truncated");
    std::copy(data.begin(), data.end(), p.value.data());
  }
}

inline void save_checkpoint(const std::string& path, const ParamStore& store, nlohmann::json meta = nlohmann::json::object()) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << to_json(store, std::move(meta)).dump() << '\n';
}

inline nlohmann::json read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace cropnet::kernels
