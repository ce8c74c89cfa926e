#include "hbt/timetag_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

namespace hbt {

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  return value;
}

}  // namespace

void write_pbt1(std::ostream& out, const EventStream& events) {
  out.write("PBT1", 4);
  put_le<std::uint16_t>(out, pbt1_version);
  put_le<std::uint16_t>(out, events.channel_id);
  put_le<std::uint64_t>(out, events.timestamps.size());
  for (std::uint64_t t : events.timestamps) put_le<std::uint64_t>(out, t);
  if (!out) throw Error("write_pbt1: stream write failed");
}

void write_pbt1(const std::filesystem::path& path, const EventStream& events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("write_pbt1: cannot open " + path.string());
  write_pbt1(out, events);
}

EventStream read_pbt1(std::istream& in) {
  const std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 16) throw FormatError("PBT1: truncated header", data.size());
  if (std::memcmp(data.data(), "PBT1", 4) != 0) throw FormatError("PBT1: bad magic", 0);
  const auto version = get_le<std::uint16_t>(data.data() + 4);
  if (version != pbt1_version) throw FormatError("PBT1: unsupported version " + std::to_string(version), 4);
  EventStream out;
  out.channel_id = get_le<std::uint16_t>(data.data() + 6);
  const auto count = get_le<std::uint64_t>(data.data() + 8);
  const std::uint64_t payload = data.size() - 16;
  if (payload % 8 != 0 || payload / 8 < count)
    throw FormatError("PBT1: truncated records (header declares " + std::to_string(count) + ")", 16 + 8 * (payload / 8));
  if (payload / 8 > count) throw FormatError("PBT1: trailing bytes after declared records", 16 + 8 * count);
  out.timestamps.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    out.timestamps[i] = get_le<std::uint64_t>(data.data() + 16 + 8 * i);
    if (i > 0 && out.timestamps[i] < out.timestamps[i - 1])
      throw FormatError("PBT1: timestamps not sorted at record " + std::to_string(i), 16 + 8 * i);
  }
  return out;
}

EventStream read_pbt1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("PBT1: cannot open " + path.string(), 0);
  return read_pbt1(in);
}

}  // namespace hbt
