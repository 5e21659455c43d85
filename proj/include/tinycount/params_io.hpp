#pragma once

// Versioned JSON container for a model: config, named row-major arrays and a
// free-form meta object. Doubles are written in shortest round-trip form, so
// save -> load -> save reproduces the file byte for byte.

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tinycount/error.hpp"
#include "tinycount/model.hpp"

namespace tinycount {

inline constexpr const char* kParamsFormat = "tinycount-params";
inline constexpr int kParamsFormatVersion = 1;

struct ModelFile {
  ModelConfig config;
  ModelParams params;
  nlohmann::json meta = nlohmann::json::object();
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"mixing", c.mixing == Mixing::linear ? "linear" : "dot"},
          {"softmax", c.softmax},
          {"bos", c.bos},
          {"layers", c.layers},
          {"T", c.T},
          {"L", c.L},
          {"d", c.d},
          {"p", c.p},
          {"C", c.C}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    const auto mixing = j.at("mixing").get<std::string>();
    if (mixing == "linear") {
      c.mixing = Mixing::linear;
    } else if (mixing == "dot") {
      c.mixing = Mixing::dot;
    } else {
      throw ConfigError("unknown mixing '" + mixing + "'");
    }
    c.softmax = j.at("softmax").get<bool>();
    c.bos = j.value("bos", false);
    c.layers = j.value("layers", 1);
    c.T = j.at("T").get<int>();
    c.L = j.at("L").get<int>();
    c.d = j.at("d").get<int>();
    c.p = j.at("p").get<int>();
    c.C = j.value("C", c.L);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json model_to_json(const ModelFile& file) {
  check_shapes(file.config, file.params);
  nlohmann::json arrays = nlohmann::json::object();
  for_each_array(file.params, [&](const auto& v) {
    if (!all_finite(v.values)) throw InvalidInput("array '" + v.name + "' has non-finite values");
    arrays[v.name] = {{"rows", v.rows},
                      {"cols", v.cols},
                      {"data", std::vector<double>(v.values.begin(), v.values.end())}};
  });
  return {{"format", kParamsFormat},
          {"format_version", kParamsFormatVersion},
          {"config", config_to_json(file.config)},
          {"arrays", std::move(arrays)},
          {"meta", file.meta}};
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kParamsFormat)
    throw ConfigError("not a tinycount parameter file");
  if (j.value("format_version", 0) != kParamsFormatVersion)
    throw ConfigError("unsupported parameter format version " +
                      std::to_string(j.value("format_version", 0)));
  ModelFile file;
  file.config = config_from_json(j.at("config"));
  file.params = zero_params(file.config);
  file.meta = j.value("meta", nlohmann::json::object());
  const auto& arrays = j.at("arrays");
  std::set<std::string> seen;
  for_each_array(file.params, [&](const auto& v) {
    if (!arrays.contains(v.name)) throw ConfigError("missing array '" + v.name + "'");
    const auto& a = arrays.at(v.name);
    const auto rows = a.at("rows").template get<std::size_t>();
    const auto cols = a.at("cols").template get<std::size_t>();
    const auto data = a.at("data").template get<std::vector<double>>();
    if (rows != v.rows || cols != v.cols || data.size() != v.values.size())
      throw ConfigError("array '" + v.name + "' has the wrong shape");
    std::copy(data.begin(), data.end(), v.values.begin());
    seen.insert(v.name);
  });
  for (const auto& [name, _] : arrays.items())
    if (!seen.count(name)) throw ConfigError("unexpected array '" + name + "'");
  return file;
}

inline std::string dump_model(const ModelFile& file) { return model_to_json(file).dump() + "\n"; }

inline void save_model(const std::string& path, const ModelFile& file) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open '" + path + "' for writing");
  os << dump_model(file);
  if (!os) throw InvalidInput("failed writing '" + path + "'");
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace tinycount
