#include "stepdad/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "stepdad/errors.hpp"

namespace stepdad {

namespace {

constexpr const char* kFormat = "stepdad-checkpoint/1";

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
  std::filesystem::path p = manifest;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw IoError("checkpoint has no tensor named '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& manifest_path, const Checkpoint& ckpt) {
  const auto blob = blob_path_for(manifest_path);
  if (manifest_path.has_parent_path()) std::filesystem::create_directories(manifest_path.parent_path());

  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["dtype"] = "float64-le";
  manifest["blob"] = blob.filename().string();
  manifest["tensors"] = nlohmann::json::array();

  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + blob.string() + " for writing");
  std::uint64_t offset = 0;
  for (const auto& nt : ckpt.tensors) {
    manifest["tensors"].push_back({{"name", nt.name}, {"shape", nt.tensor.shape()}, {"offset", offset}});
    for (double v : nt.tensor.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      bits = to_little_endian(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    offset += nt.tensor.size() * sizeof(double);
  }
  manifest["metadata"] = ckpt.metadata;
  if (!out) throw IoError("failed writing " + blob.string());

  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) throw IoError("cannot open " + manifest_path.string() + " for writing");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw IoError("failed writing " + manifest_path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("cannot open checkpoint manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kFormat) throw IoError("unsupported checkpoint format in " + manifest_path.string());

  const auto blob = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream in(blob, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint blob " + blob.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  ckpt.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto& entry : manifest.at("tensors")) {
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    Tensor t(shape);
    if (offset + t.size() * sizeof(double) > bytes.size()) {
      throw IoError("checkpoint blob too short for tensor " + entry.at("name").get<std::string>());
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, bytes.data() + offset + i * sizeof(double), sizeof bits);
      bits = to_little_endian(bits);
      std::memcpy(&t[i], &bits, sizeof bits);
    }
    ckpt.tensors.push_back({entry.at("name").get<std::string>(), std::move(t)});
  }
  return ckpt;
}

}  // namespace stepdad
