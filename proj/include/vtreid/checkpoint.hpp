#pragma once

#include <filesystem>
#include <string>

#include "vtreid/trainer.hpp"

namespace vtreid {

/// Packed little-endian checkpoint: "VTCK", u16 version, the full training
/// state (both encoders of the visual pair, text encoder, centers, queue in
/// FIFO order, Adam moments, iteration counter), then a CRC32 of everything
/// before it.
std::string encode_checkpoint(const TrainState& state);
TrainState decode_checkpoint(const std::string& bytes);

/// Atomic write via a temp file and rename.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);

/// Throws IoError, VersionMismatch or ChecksumMismatch.
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace vtreid
