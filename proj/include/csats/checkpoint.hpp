#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "csats/tensor.hpp"
#include "json.hpp"

namespace csats {

/// Contents of a weight file: free-form metadata plus named float32 tensors.
struct CheckpointData {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>& tensor(const std::string& name) const;
  bool contains(const std::string& name) const;
};

/// On-disk layout (all integers little-endian):
///
///   "CSATSCKP"                      8-byte magic
///   u32 format version              currently 1
///   u64 header length H
///   H bytes of JSON                 {"format", "version", "metadata", "tensors": [
///                                      {"name", "shape", "dtype": "f32", "offset", "count"}]}
///   raw float32 payload             tensors back to back, offsets in elements
///
/// Values round-trip bit-exactly.
inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'A', 'T', 'S', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace csats
