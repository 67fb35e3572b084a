#include "core/archive.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace fmnet {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'T', 'A'};
constexpr uint8_t kElemF64 = 0;

void put_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  put_bytes(os, buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  require(static_cast<size_t>(is.gcount()) == sizeof(T), ErrorCode::kIo,
          "archive: truncated file");
  T value = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(buf[i]) << (8 * i);
  return value;
}

}  // namespace

void write_archive(const std::string& path,
                   const std::vector<ArchiveEntry>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), ErrorCode::kIo, "archive: cannot open for writing: " + path);
  put_bytes(os, kMagic, 4);
  put_le<uint32_t>(os, static_cast<uint32_t>(entries.size()));
  for (const ArchiveEntry& e : entries) {
    require(e.tensor.defined(), ErrorCode::kInvalidArgument,
            "archive: undefined tensor for entry " + e.name);
    require(e.name.size() <= 0xffff, ErrorCode::kInvalidArgument,
            "archive: entry name too long");
    put_le<uint16_t>(os, static_cast<uint16_t>(e.name.size()));
    put_bytes(os, e.name.data(), e.name.size());
    put_le<uint8_t>(os, kElemF64);
    const Shape& shape = e.tensor.shape();
    put_le<uint8_t>(os, static_cast<uint8_t>(shape.size()));
    for (size_t d : shape) put_le<uint64_t>(os, static_cast<uint64_t>(d));
    for (size_t i = 0; i < e.tensor.numel(); ++i) {
      uint64_t bits;
      const double v = e.tensor.at(i);
      std::memcpy(&bits, &v, sizeof(bits));
      put_le<uint64_t>(os, bits);
    }
  }
  os.flush();
  require(os.good(), ErrorCode::kIo, "archive: write failed: " + path);
}

std::vector<ArchiveEntry> read_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorCode::kIo, "archive: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  require(is.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
          ErrorCode::kIo, "archive: bad magic in " + path);
  const uint32_t count = get_le<uint32_t>(is);
  std::vector<ArchiveEntry> entries;
  entries.reserve(count);
  for (uint32_t n = 0; n < count; ++n) {
    const uint16_t name_len = get_le<uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    require(static_cast<size_t>(is.gcount()) == name_len, ErrorCode::kIo,
            "archive: truncated name");
    const uint8_t elem = get_le<uint8_t>(is);
    require(elem == kElemF64, ErrorCode::kIo,
            "archive: unsupported element type in " + path);
    const uint8_t rank = get_le<uint8_t>(is);
    Shape shape(rank);
    for (uint8_t d = 0; d < rank; ++d)
      shape[d] = static_cast<size_t>(get_le<uint64_t>(is));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) {
      const uint64_t bits = get_le<uint64_t>(is);
      std::memcpy(&v, &bits, sizeof(v));
    }
    entries.push_back({std::move(name), Tensor::from(shape, std::move(data))});
  }
  return entries;
}

const Tensor& archive_get(const std::vector<ArchiveEntry>& entries,
                          const std::string& name) {
  for (const ArchiveEntry& e : entries)
    if (e.name == name) return e.tensor;
  fail(ErrorCode::kIo, "archive: missing entry: " + name);
}

}  // namespace fmnet
