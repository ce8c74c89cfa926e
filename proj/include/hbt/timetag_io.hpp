#pragma once

// PBT1 time-tag files, one channel per file, all fields little-endian:
//   offset 0   magic "PBT1"
//   offset 4   u16 format version (1)
//   offset 6   u16 channel id
//   offset 8   u64 record count
//   offset 16  u64 timestamps in picoseconds, sorted non-decreasing

#include <filesystem>
#include <iosfwd>

#include "hbt/photostream.hpp"

namespace hbt {

inline constexpr std::uint16_t pbt1_version = 1;

void write_pbt1(std::ostream& out, const EventStream& events);
void write_pbt1(const std::filesystem::path& path, const EventStream& events);

/// Throws FormatError (with byte offset) on bad magic, unknown version,
/// truncated data, trailing bytes or unsorted timestamps.
EventStream read_pbt1(std::istream& in);
EventStream read_pbt1(const std::filesystem::path& path);

}  // namespace hbt
