#include "ccd/digest.hpp"

#include <fstream>
#include <sstream>

namespace ccd {

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

std::string digest_hex(std::uint64_t digest) {
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[digest & 0xF];
    digest >>= 4;
  }
  return "fnv1a64:" + out;
}

} // namespace ccd
