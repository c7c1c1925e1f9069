#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "salt/overlap.hpp"
#include "salt/tensorio.hpp"

namespace salt {

// Hashed character n-gram table for composing vectors of unseen words.
struct SubwordBundle {
  EmbeddingMatrix ngrams;  // bucket_count x dim
  std::uint32_t bucket_count = 0;
  std::uint32_t minn = 3;
  std::uint32_t maxn = 6;

  void validate() const;
};

// 32-bit FNV-1a over raw bytes, reduced modulo bucket_count.
std::uint32_t fnv1a32(std::string_view bytes);
std::uint64_t ngram_hash(std::string_view bytes, std::uint64_t bucket_count);

// Character n-grams of "<word>" with lengths in [minn, maxn], following the
// fastText enumeration (bare "<" / ">" unigrams are skipped).
std::vector<std::string> character_ngrams(std::string_view word, std::uint32_t minn, std::uint32_t maxn);

SubwordBundle read_subword_bundle(const std::filesystem::path& path);
void write_subword_bundle(const SubwordBundle& bundle, const std::filesystem::path& path);

class AuxiliaryEmbeddings {
 public:
  AuxiliaryEmbeddings() = default;
  explicit AuxiliaryEmbeddings(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t word_count() const noexcept { return index_.size(); }
  // Duplicate lines skipped by the text loader (first occurrence kept).
  std::size_t duplicate_warnings() const noexcept { return duplicates_; }

  // Returns false (and keeps the existing vector) if the word is already present.
  bool add_word(std::string word, std::span<const float> vec);
  std::optional<std::span<const float>> word(std::string_view w) const;

  void set_bundle(SubwordBundle bundle);
  bool has_bundle() const noexcept { return bundle_.has_value(); }
  const SubwordBundle* bundle() const noexcept { return bundle_ ? &*bundle_ : nullptr; }

  // Mean of the bundle rows of the word's n-grams; nullopt when no n-gram
  // fits. Throws ShapeError when no bundle is loaded.
  std::optional<std::vector<float>> compose_subword(std::string_view word) const;

  // Normalized exact match, then lowercased normalized match, then subword
  // composition of the normalized form.
  std::optional<std::vector<float>> lookup(std::string_view token, const NormalizationRules& rules) const;

  friend AuxiliaryEmbeddings load_vec_text(std::istream& in, std::string_view name);

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;  // word -> row
  std::optional<SubwordBundle> bundle_;
  std::size_t duplicates_ = 0;
};

// Word-vector text format: "count dim" header, then "word v1 ... vdim" lines.
AuxiliaryEmbeddings load_vec_text(std::istream& in, std::string_view name);
AuxiliaryEmbeddings load_vec_text(const std::filesystem::path& path);
void write_vec_text(const std::vector<std::pair<std::string, std::vector<float>>>& words, std::size_t dim,
                    const std::filesystem::path& path);

}  // namespace salt
