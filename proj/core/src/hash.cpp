#include "crea/hash.hpp"

#include <fstream>
#include <sstream>

#include "crea/error.hpp"

namespace crea {

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::string fingerprint_bytes(std::string_view data) {
  return "fnv1a64:" + hex64(fnv1a64(data));
}

std::string fingerprint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open file for fingerprinting: " +
                          path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return fingerprint_bytes(buf.str());
}

}  // namespace crea
