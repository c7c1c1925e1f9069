#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace salt::text {

// Byte offsets of each UTF-8 character start, plus a final entry equal to
// s.size(). Malformed bytes are treated as single-byte characters.
std::vector<std::size_t> char_boundaries(std::string_view s);

bool is_valid_utf8(std::string_view s);

// Simple lowercase over ASCII, Latin-1, Latin Extended-A, Latin Extended
// Additional, Greek and Cyrillic capitals. Other code points pass through.
std::string to_lower(std::string_view s);

// Inverse of the byte-level BPE printable alphabet (GPT-2 bytes_to_unicode).
// Returns nullopt if any character is outside that alphabet.
std::optional<std::string> byte_level_decode(std::string_view s);

}  // namespace salt::text
