#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ccd/error.hpp"

namespace ccd {

// FNV-1a 64-bit. Non-cryptographic; used to fingerprint inputs in reports
// and to derive content-addressed RNG streams.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path);

std::string digest_hex(std::uint64_t digest);

} // namespace ccd
