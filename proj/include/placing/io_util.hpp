#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace placing {

// Writes content to path via a sibling temp file and rename, so readers never
// observe a half-written file and a crash leaves the old one intact. Throws
// IoError.
void atomic_write_file(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);  // throws IoError

// Shortest round-trip decimal form; parsing it with from_chars restores the
// exact bits.
inline void append_double(std::string& s, double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  s.append(buf, res.ptr);
}

inline void append_u64(std::string& s, unsigned long long v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  s.append(buf, res.ptr);
}

}  // namespace placing
