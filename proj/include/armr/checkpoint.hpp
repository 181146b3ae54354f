#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "armr/autodiff.hpp"
#include "json.hpp"

namespace armr {

// On-disk layout (all integers and floats little-endian):
//
//   offset 0   8 bytes   magic "ARMRCKP1"
//   offset 8   u64       N = byte length of the JSON index
//   offset 16  N bytes   UTF-8 JSON index, keys sorted:
//                        {"meta": {...},
//                         "tensors": {"<name>": {"offset": <u64>, "shape": [rows, cols]}, ...}}
//   16 + N     ...       data section; tensor <name> occupies rows*cols f64 values in
//                        row-major order starting at data section + offset.
//
// Tensors are laid out in ascending name order with no padding, so equal
// contents always serialise to identical bytes.

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Matrix> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter value into `ckpt.tensors` under its own name.
void store_parameters(const ParameterStore& params, Checkpoint& ckpt);
/// Restores parameter values by name; throws if a parameter is missing or mis-shaped.
void restore_parameters(const Checkpoint& ckpt, ParameterStore& params);

}  // namespace armr
