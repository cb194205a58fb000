#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sia::nn {

struct NamedTensor {
    std::vector<int> shape;
    std::vector<float> data;

    bool operator==(const NamedTensor&) const = default;
};

// Minimal safetensors reader/writer, F32 little-endian only. Keys are written
// in sorted order with deterministic header serialization, so saving the same
// tensors twice is byte-identical.
void save_safetensors(const std::map<std::string, NamedTensor>& tensors,
                      const std::filesystem::path& file);
std::map<std::string, NamedTensor> load_safetensors(const std::filesystem::path& file);

}  // namespace sia::nn
