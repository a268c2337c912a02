#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "placekit/nn.hpp"

namespace placekit {

// Parameter store: a JSON manifest (ordered {name, shape, offset} entries,
// offsets in float units) plus one flat blob of float32 little-endian
// values. Checkpoints add optimizer moments, the step counter, the rng
// state, and a config snapshot; the blob hash guards against corruption.

struct ParamManifestEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
};

struct CheckpointData {
  std::int64_t step = 0;
  std::uint64_t rng_state = 0;
  std::string config_json;  // snapshot of the run configuration
  std::vector<ParamManifestEntry> manifest;
  std::vector<float> params;
  std::vector<float> m, v;  // optimizer moments; empty when not saved

  std::size_t total_floats() const { return params.size(); }
};

void write_checkpoint(const std::filesystem::path& path,
                      const CheckpointData& ck);
CheckpointData read_checkpoint(const std::filesystem::path& path);

// Flatten/restore helpers between a parameter list and a checkpoint.
CheckpointData pack_params(const nn::ParamRefs<float>& params);
void unpack_params(const CheckpointData& ck, nn::ParamRefs<float>& params);

std::uint64_t fnv1a64(const void* data, std::size_t bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace placekit
