#pragma once

#include "ntkd/network.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace ntkd {

/// Binary checkpoint, all integers and doubles little-endian:
///
///   offset  size  field
///   0       8     magic "NTKDCKPT"
///   8       4     u32 format version (1)
///   12      4     u32 d
///   16      4     u32 L
///   20      4     u32 m
///   24      8     f64 sigma_w
///   32      8     f64 sigma_b
///   40      8     u64 seed
///   48      8     u64 epoch
///   56      8     u64 p (parameter count)
///   64      8p    f64 parameters in ParamLayout order
struct Checkpoint {
  NetConfig cfg;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  ParamVector params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ntkd
