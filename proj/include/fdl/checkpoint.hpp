#pragma once

#include <filesystem>
#include <string>

#include "fdl/diffusion.hpp"

namespace fdl {

/// A denoiser together with everything needed to sample from it.
struct Checkpoint {
  NoiseSchedule schedule;
  ConceptSet concepts;
  DenoiserNet net;
};

inline constexpr int kCheckpointVersion = 1;

/// JSON container: {format, version, schedule, concepts, arch, checksum, parameters}.
/// Doubles are written in shortest round-trip form, so load(save(c)) is exact.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws std::runtime_error on unreadable files, version or format mismatch,
/// parameter-count mismatch, or a checksum that does not match the parameters.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fdl
