#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace fmnet {

// Binary tensor container used by checkpoints and dataset clips.
// Layout: magic "FMTA", u32 entry count, then per entry:
//   u16 name length, UTF-8 name, u8 element type (0 = 64-bit float),
//   u8 rank, rank x u64 dims, row-major little-endian payload.
struct ArchiveEntry {
  std::string name;
  Tensor tensor;
};

void write_archive(const std::string& path,
                   const std::vector<ArchiveEntry>& entries);

// preserves on-disk entry order
std::vector<ArchiveEntry> read_archive(const std::string& path);

// lookup helper; missing name is an error
const Tensor& archive_get(const std::vector<ArchiveEntry>& entries,
                          const std::string& name);

}  // namespace fmnet
