#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dhsense/model.hpp"
#include "dhsense/tensor.hpp"

namespace dhsense {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// JSON document {"format": "dhsense-checkpoint/1", "tensors": [{name, shape, data}]}.
/// Doubles are written in shortest round-trip form, so load(save(x)) == x.
std::string checkpoint_to_string(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> checkpoint_from_string(const std::string& text);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
/// Throws SchemaError if names or shapes differ from the model's parameters.
void load_checkpoint(Model& model, const std::filesystem::path& path);

std::vector<NamedTensor> named_parameters(const Model& model);

}  // namespace dhsense
