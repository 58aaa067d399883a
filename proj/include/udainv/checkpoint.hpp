#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "udainv/tensor.hpp"

namespace udainv {

struct NamedTensor {
  std::string name;
  Tensor tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// On disk:
//   UDAINV1\n
//   config <N>\n <N bytes of config text>
//   tensors <count>\n  then one "<name> <rank> <dims...> <offset>\n" per tensor
//   payload <M>\n <M bytes: little-endian float64 values in directory order>
struct Checkpoint {
  std::string config_text;
  std::vector<NamedTensor> tensors;

  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  void put(std::string name, Tensor t);
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr char kCheckpointMagic[] = "UDAINV1";

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace udainv
