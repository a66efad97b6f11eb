#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgg/nn.hpp"

namespace sgg {

// Training progress stored alongside the parameters.
struct TrainState {
  std::uint64_t pretrain_done = 0;  // completed phase-one steps
  std::uint64_t train_done = 0;     // completed phase-two steps
  std::uint64_t seed = 0;
  std::string config_hash;  // hex fnv1a64 of the effective config text
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  TrainState state;
  std::vector<nn::NamedTensor> tensors;  // values only; no grads
};

// Binary layout (little-endian): "SGGCKPT\0", u32 version, u64 pretrain_done,
// u64 train_done, u64 seed, string config_hash, u64 count, then per tensor
// string name, u32 rank, u64 dims[rank], f64 values[]. Strings are u32 length
// + bytes.
void save_checkpoint(const std::filesystem::path& path, const nn::ParamStore& params, const TrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into a store; names, order and shapes must match
// exactly, otherwise DataError describing the first mismatch.
void restore_params(const Checkpoint& ckpt, nn::ParamStore& params);

// Plain-text listing: state fields then "name shape" per tensor.
std::string checkpoint_manifest(const nn::ParamStore& params, const TrainState& state);

}  // namespace sgg
