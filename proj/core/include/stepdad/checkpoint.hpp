#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepdad/tensor.hpp"

namespace stepdad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// A set of named tensors plus free-form metadata.
///
/// On disk this is two files: a JSON manifest (`path`) listing every tensor's
/// name, shape and byte offset, and a raw blob (`path` with extension
/// `.bin`) of little-endian float64 values in manifest order.
struct Checkpoint {
  std::vector<NamedTensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  const Tensor& get(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& manifest_path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& manifest_path);

}  // namespace stepdad
