#include "dhsense/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "dhsense/error.hpp"
#include "json.hpp"

namespace dhsense {

using nlohmann::json;

namespace {
constexpr const char* format_tag = "dhsense-checkpoint/1";
}

std::string checkpoint_to_string(const std::vector<NamedTensor>& tensors) {
  json j;
  j["format"] = format_tag;
  j["tensors"] = json::array();
  for (const auto& t : tensors) {
    j["tensors"].push_back({{"name", t.name}, {"shape", t.tensor.shape}, {"data", t.tensor.data}});
  }
  return j.dump(1) + "\n";
}

std::vector<NamedTensor> checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what(), 1, e.byte);
  }
  if (!j.is_object() || j.value("format", "") != format_tag) {
    throw SchemaError(std::string("checkpoint is not tagged ") + format_tag);
  }
  std::vector<NamedTensor> out;
  try {
    for (const auto& t : j.at("tensors")) {
      NamedTensor nt;
      nt.name = t.at("name").get<std::string>();
      const auto values = t.at("data").get<std::vector<double>>();
      nt.tensor = Tensor(t.at("shape").get<Shape>(), Buffer(values.begin(), values.end()));
      out.push_back(std::move(nt));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint entry: ") + e.what());
  }
  return out;
}

std::vector<NamedTensor> named_parameters(const Model& model) {
  std::vector<NamedTensor> out;
  for (const auto& p : model.parameters()) out.push_back({p.name(), Tensor(p.shape(), p.value().data)});
  return out;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(named_parameters(model));
}

void load_checkpoint(Model& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto tensors = checkpoint_from_string(ss.str());
  const auto& params = model.parameters();
  if (tensors.size() != params.size()) {
    throw SchemaError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                      std::to_string(params.size()));
  }
  std::vector<Tensor> values;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != params[i].name() || tensors[i].tensor.shape != params[i].shape()) {
      throw SchemaError("checkpoint tensor '" + tensors[i].name + "' " + shape_string(tensors[i].tensor.shape) +
                        " does not match parameter '" + params[i].name() + "' " + shape_string(params[i].shape()));
    }
    values.push_back(tensors[i].tensor);
  }
  model.restore(values);
}

}  // namespace dhsense
