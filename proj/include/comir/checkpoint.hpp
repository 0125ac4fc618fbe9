#pragma once

// Checkpoint container:
//
//   "COMIRCKP" | u32 version | u64 header bytes | JSON header | float32 blobs
//
// The header echoes every configuration, the layer list, the loss history and
// the name/shape of each blob; blobs follow in header order, little endian.

#include "comir/encoder.hpp"

#include <filesystem>
#include <stdexcept>

namespace comir {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, ComirModel& model);
ComirModel load_checkpoint(const std::filesystem::path& path);

/// Writes "step,loss,grad_norm,clipped_norm" rows.
void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& history);

}  // namespace comir
