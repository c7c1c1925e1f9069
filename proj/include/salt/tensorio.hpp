#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace salt {

// Dense row-major float32 matrix; row index is the token id.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols);
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  EmbeddingMatrix transposed() const;

  // Throws ShapeError unless rows >= 1, cols >= 1 and every value is finite.
  void validate() const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// Ordered token list with a string -> id index. Tokens are unique raw strings.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws DuplicateTokenError on repeated tokens and FormatError when empty.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<std::uint32_t> find(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Per-column mean and population standard deviation.
struct RowStats {
  std::vector<double> mean;
  std::vector<double> std;
};

struct MatrixShape {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

inline constexpr std::string_view kEmbeddingMagic = "SALTEMB1";
inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

// SALTEMB1 matrix block from a stream positioned at the magic. Does not check
// for trailing bytes; read_embedding(path) does.
EmbeddingMatrix read_embedding(std::istream& in, std::string_view source_name);
EmbeddingMatrix read_embedding(const std::filesystem::path& path);
// Header only; verifies the file size matches the declared shape.
MatrixShape read_embedding_shape(const std::filesystem::path& path);

void write_embedding(const EmbeddingMatrix& matrix, std::ostream& out);
// Atomic: writes a sibling temp file and renames it over `path`.
void write_embedding(const EmbeddingMatrix& matrix, const std::filesystem::path& path);

Vocabulary read_vocabulary(const std::filesystem::path& path);
Vocabulary parse_vocabulary(std::string_view json_text);
void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);

// Mean/std over all rows, or over `subset` when given (must be non-empty).
RowStats row_stats(const EmbeddingMatrix& matrix,
                   std::optional<std::span<const std::uint32_t>> subset = std::nullopt);

// Writes through a temp file in the destination directory, then renames.
// On any exception the temp file is removed and `path` is untouched.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);

}  // namespace salt
