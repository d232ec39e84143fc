#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>

#include "gep/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace gep {

inline std::uint64_t fnv1a(const std::string& buf) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : buf) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
void put_pod(std::string* buf, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  const char* p = reinterpret_cast<const char*>(&v);
  buf->append(p, sizeof(T));
}

template <typename T>
T get_pod(const std::string& buf, size_t* pos) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (*pos + sizeof(T) > buf.size()) throw ArchiveError("file truncated");
  T v;
  std::memcpy(&v, buf.data() + *pos, sizeof(T));
  *pos += sizeof(T);
  return v;
}

// Whole-file helpers with a trailing 64-bit checksum over the body.
void write_checked_file(const std::string& path, const std::string& body);
std::string read_checked_file(const std::string& path);

}  // namespace gep
