#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "streetvae/tensor.hpp"

namespace streetvae {

inline constexpr std::string_view kCheckpointMagic = "SVAE1";

/// Named tensors plus a free-form JSON metadata object.
struct Checkpoint {
  ParamList tensors;
  std::string meta_json = "{}";

  const Tensor& get(std::string_view name) const;
};

/// Layout: magic "SVAE1", little-endian u64 header length, JSON header
/// {"meta": ..., "tensors": [{"name", "shape", "offset"}]}, then the float64
/// payloads (little-endian) at the listed byte offsets from the payload start.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace streetvae
