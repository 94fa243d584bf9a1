#include "csats/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace csats {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw Error("checkpoint truncated");
  U value;
  std::memcpy(&value, in.data() + pos, sizeof(U));
  pos += sizeof(U);
  return value;
}

}  // namespace

const Tensor<float>& CheckpointData::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw Error("checkpoint has no tensor '" + name + "'");
}

bool CheckpointData::contains(const std::string& name) const {
  for (const auto& entry : tensors)
    if (entry.first == name) return true;
  return false;
}

std::string encode_checkpoint(const CheckpointData& data) {
  nlohmann::json header;
  header["format"] = "csa-ts-checkpoint";
  header["version"] = kCheckpointVersion;
  header["metadata"] = data.metadata;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : data.tensors) {
    header["tensors"].push_back(
        {{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}, {"offset", offset}, {"count", t.size()}});
    offset += t.size();
  }
  const std::string head = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, head.size());
  out += head;
  for (const auto& entry : data.tensors) {
    auto d = entry.second.data();
    out.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(float));
  }
  return out;
}

CheckpointData decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw Error("not a csa-ts checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kCheckpointMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto head_len = take<std::uint64_t>(bytes, pos);
  if (pos + head_len > bytes.size()) throw Error("checkpoint truncated");
  const nlohmann::json header = nlohmann::json::parse(bytes.substr(pos, head_len));
  pos += head_len;

  CheckpointData data;
  data.metadata = header.at("metadata");
  const std::size_t payload_floats = (bytes.size() - pos) / sizeof(float);
  for (const auto& entry : header.at("tensors")) {
    if (entry.at("dtype") != "f32") throw Error("unsupported tensor dtype in checkpoint");
    Shape shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (count != numel(shape) || offset + count > payload_floats) {
      throw Error("checkpoint tensor '" + entry.at("name").get<std::string>() + "' is corrupt");
    }
    std::vector<float> values(count);
    std::memcpy(values.data(), bytes.data() + pos + offset * sizeof(float), count * sizeof(float));
    data.tensors.emplace_back(entry.at("name").get<std::string>(),
                              Tensor<float>(std::move(shape), std::move(values)));
  }
  return data;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(data);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace csats
