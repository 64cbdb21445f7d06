#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace misinfo::text {

/// Decodes one UTF-8 code point starting at `i`, advancing `i`. Invalid bytes
/// decode as themselves so counting never fails on malformed input.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> char32_t {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) & 0x3Fu : 0;
  };
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  if ((b0 >> 5) == 0x6 && i + 1 < s.size()) {
    char32_t cp = ((b0 & 0x1Fu) << 6) | cont(1);
    i += 2;
    return cp;
  }
  if ((b0 >> 4) == 0xE && i + 2 < s.size()) {
    char32_t cp = ((b0 & 0x0Fu) << 12) | (cont(1) << 6) | cont(2);
    i += 3;
    return cp;
  }
  if ((b0 >> 3) == 0x1E && i + 3 < s.size()) {
    char32_t cp = ((b0 & 0x07u) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3);
    i += 4;
    return cp;
  }
  i += 1;
  return b0;
}

/// Unicode White_Space property.
inline bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

/// Splits on Unicode whitespace, dropping empty tokens.
inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0, start = std::string_view::npos;
  while (i < s.size()) {
    const std::size_t at = i;
    const char32_t cp = next_code_point(s, i);
    if (is_space(cp)) {
      if (start != std::string_view::npos) tokens.push_back(s.substr(start, at - start));
      start = std::string_view::npos;
    } else if (start == std::string_view::npos) {
      start = at;
    }
  }
  if (start != std::string_view::npos) tokens.push_back(s.substr(start));
  return tokens;
}

inline int word_count(std::string_view s) { return int(split_whitespace(s).size()); }

}  // namespace misinfo::text
