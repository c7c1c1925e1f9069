#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "salt/tensorio.hpp"

namespace salt {

struct NormalizationRules {
  // Removed at any position, in this order.
  std::vector<std::string> strip_markers{"\xC4\xA0", "\xE2\x96\x81", "##"};  // "Ġ", "▁", "##"
  bool trim_whitespace = true;
  // Map byte-level BPE printable characters back to raw bytes before
  // stripping. Applied only when every character belongs to that alphabet and
  // the decoded bytes are valid UTF-8.
  bool byte_level_decode = false;

  // Throws ShapeError on an empty marker.
  void validate() const;
};

std::string normalize_token(std::string_view token, const NormalizationRules& rules);

struct TokenPair {
  std::uint32_t target_id;
  std::uint32_t source_id;
  friend bool operator==(const TokenPair&, const TokenPair&) = default;
};

struct OverlapMap {
  std::vector<TokenPair> pairs;                 // ascending target_id
  std::vector<std::uint32_t> nonshared_target;  // ascending
  std::size_t collisions = 0;  // matches chosen among >1 available source candidates
  friend bool operator==(const OverlapMap&, const OverlapMap&) = default;
};

// Target ids are processed ascending; each source id is consumed at most once.
// Among unconsumed sources with the same non-empty normalized form, the one
// whose raw string equals the raw target token wins, else the lowest id.
OverlapMap compute_overlap(const Vocabulary& source, const Vocabulary& target, const NormalizationRules& rules,
                           unsigned threads = 1);

struct CoverageReport {
  double coverage = 0.0;
  std::size_t shared = 0;
  std::size_t nonshared = 0;
  std::size_t collisions = 0;
};

CoverageReport coverage_report(const OverlapMap& map, std::size_t target_vocab_size);

}  // namespace salt
