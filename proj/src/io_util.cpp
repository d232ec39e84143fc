#include "gep/io_util.hpp"

#include <fstream>
#include <iterator>

namespace gep {

void write_checked_file(const std::string& path, const std::string& body) {
  std::string buf = body;
  put_pod(&buf, fnv1a(body));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError("cannot open file for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ArchiveError("short write: " + path);
}

std::string read_checked_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 8) throw ArchiveError("file truncated: " + path);
  const std::string body = buf.substr(0, buf.size() - 8);
  size_t pos = body.size();
  if (get_pod<std::uint64_t>(buf, &pos) != fnv1a(body)) {
    throw ArchiveError("checksum mismatch: " + path);
  }
  return body;
}

}  // namespace gep
