#include "armr/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace armr {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'M', 'R', 'C', 'K', 'P', '1'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json index;
  index["meta"] = ckpt.meta;
  index["tensors"] = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : ckpt.tensors) {
    index["tensors"][name] = {{"shape", {m.rows(), m.cols()}}, {"offset", offset}};
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
  }
  const std::string index_text = index.dump();

  std::string bytes(kMagic, sizeof(kMagic));
  put_le<std::uint64_t>(bytes, index_text.size());
  bytes += index_text;
  bytes.reserve(bytes.size() + offset);
  for (const auto& [name, m] : ckpt.tensors)
    for (Eigen::Index i = 0; i < m.size(); ++i) put_le<double>(bytes, m.data()[i]);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("not an ARMR checkpoint: " + path.string());
  const auto index_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (16 + index_len > bytes.size()) throw CheckpointError("truncated index: " + path.string());

  Checkpoint ckpt;
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(bytes.substr(16, index_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("bad checkpoint index in " + path.string() + ": " + e.what());
  }
  ckpt.meta = index.value("meta", nlohmann::json::object());
  const std::size_t data_start = 16 + index_len;
  for (const auto& [name, entry] : index.at("tensors").items()) {
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    const auto off = entry.at("offset").get<std::uint64_t>();
    const std::size_t need = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (data_start + off + need > bytes.size())
      throw CheckpointError("tensor '" + name + "' runs past end of " + path.string());
    Matrix m(rows, cols);
    const char* p = bytes.data() + data_start + off;
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_le<double>(p + i * 8);
    ckpt.tensors.emplace(name, std::move(m));
  }
  return ckpt;
}

void store_parameters(const ParameterStore& params, Checkpoint& ckpt) {
  for (std::size_t i = 0; i < params.size(); ++i)
    ckpt.tensors[params[i].name] = params[i].value;
}

void restore_parameters(const Checkpoint& ckpt, ParameterStore& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    auto it = ckpt.tensors.find(p.name);
    if (it == ckpt.tensors.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
      throw CheckpointError("parameter " + p.name + " has shape " + shape_string(it->second) +
                            ", model expects " + shape_string(p.value));
    p.value = it->second;
  }
}

}  // namespace armr
