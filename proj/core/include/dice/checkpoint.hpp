#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dice {

// Binary checkpoint: versioned header, named little-endian double blocks.
// Shared by the causal-embedding model and the baselines.
struct CheckpointBlock {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major
};

struct Checkpoint {
  std::string kind;  // model name, e.g. "dice", "mf", "cause"
  std::vector<CheckpointBlock> blocks;

  const CheckpointBlock& block(const std::string& name) const;
  bool has_block(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dice
