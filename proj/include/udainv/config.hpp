#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "udainv/synthdeg.hpp"
#include "udainv/uda.hpp"

namespace udainv {

inline DegradationSpec mask_default() {
  DegradationSpec d;
  d.kind = DegradationKind::Mask;
  return d;
}

// Everything a run needs, read from a key=value file. '#' starts a comment;
// blank lines are ignored; unknown keys are rejected.
struct RunConfig {
  GeneratorSpec generator;
  TrainConfig train;
  DegradationSpec degradation = mask_default();
  std::size_t src_size = 2000;
  std::size_t trg_size = 2000;
  std::size_t eval_size = 256;
  std::string output_dir = "out";
  AuditConfig audit;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  // Canonical echo: every key, fixed order, lossless numbers. parse(to_text()) == *this.
  std::string to_text() const;
  void set(const std::string& key, const std::string& value);
  void set_seed(std::uint64_t seed);
  void validate() const;

  static const std::vector<std::string>& keys();
};

}  // namespace udainv
