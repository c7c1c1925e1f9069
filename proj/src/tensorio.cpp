#include "salt/tensorio.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"
#include "salt/error.hpp"
#include "salt/kernels.hpp"

namespace salt {
namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32_le(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

void swap_floats_if_big_endian(std::span<float> values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (float& f : values) {
      std::uint32_t u = std::bit_cast<std::uint32_t>(f);
      u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
      f = std::bit_cast<float>(u);
    }
  }
}

struct Header {
  std::uint32_t rows;
  std::uint32_t cols;
  std::uint64_t payload_bytes;
};

Header parse_header(const std::array<unsigned char, kEmbeddingHeaderBytes>& raw, std::string_view name) {
  if (std::memcmp(raw.data(), kEmbeddingMagic.data(), kEmbeddingMagic.size()) != 0) {
    throw BadMagicError(std::string(name) + ": bad magic, expected SALTEMB1");
  }
  Header h{load_u32_le(raw.data() + 8), load_u32_le(raw.data() + 12), 0};
  if (h.rows == 0 || h.cols == 0) {
    throw FormatError(std::string(name) + ": zero dimension in header (" + std::to_string(h.rows) + "x" +
                      std::to_string(h.cols) + ")");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(h.rows) * h.cols;
  if (count > std::numeric_limits<std::size_t>::max() / sizeof(float) ||
      count > std::numeric_limits<std::uint64_t>::max() / sizeof(float)) {
    throw DimensionOverflowError(std::string(name) + ": rows*cols overflows addressable size");
  }
  h.payload_bytes = count * sizeof(float);
  return h;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

EmbeddingMatrix EmbeddingMatrix::transposed() const {
  EmbeddingMatrix t(cols_, rows_);
  constexpr std::size_t kTile = 64;
  for (std::size_t r0 = 0; r0 < rows_; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols_; c0 += kTile) {
      const std::size_t r1 = std::min(rows_, r0 + kTile);
      const std::size_t c1 = std::min(cols_, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) t.data_[c * rows_ + r] = data_[r * cols_ + c];
      }
    }
  }
  return t;
}

void EmbeddingMatrix::validate() const {
  if (rows_ == 0 || cols_ == 0) {
    throw ShapeError("embedding matrix must have at least one row and one column");
  }
  if (rows_ > std::numeric_limits<std::uint32_t>::max() || cols_ > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionOverflowError("embedding matrix dimension exceeds 32-bit range");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NonFiniteError("non-finite value at row " + std::to_string(i / cols_) + ", col " +
                           std::to_string(i % cols_));
    }
  }
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw FormatError("vocabulary is empty");
  if (tokens_.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionOverflowError("vocabulary exceeds 32-bit id range");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<std::uint32_t>(i));
    if (!inserted) {
      throw DuplicateTokenError("duplicate token at ids " + std::to_string(it->second) + " and " +
                                std::to_string(i) + ": " + nlohmann::json(tokens_[i]).dump());
    }
  }
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::optional<std::uint64_t> remaining_bytes(std::istream& in) {
  const auto here = in.tellg();
  if (here == std::istream::pos_type(-1)) return std::nullopt;
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end == std::istream::pos_type(-1) || !in) {
    in.clear();
    in.seekg(here);
    return std::nullopt;
  }
  return static_cast<std::uint64_t>(end - here);
}

}  // namespace

EmbeddingMatrix read_embedding(std::istream& in, std::string_view name) {
  std::array<unsigned char, kEmbeddingHeaderBytes> raw{};
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (in.gcount() < 8) {
    throw BadMagicError(std::string(name) + ": file too short for SALTEMB1 magic");
  }
  if (std::memcmp(raw.data(), kEmbeddingMagic.data(), kEmbeddingMagic.size()) != 0) {
    throw BadMagicError(std::string(name) + ": bad magic, expected SALTEMB1");
  }
  if (static_cast<std::size_t>(in.gcount()) < raw.size()) {
    throw TruncatedError(std::string(name) + ": truncated header");
  }
  const Header h = parse_header(raw, name);
  std::vector<float> data;
  // On a seekable stream the remaining size is checked first and the buffer is
  // allocated once. Otherwise grow in bounded steps so a lying header cannot
  // force a huge allocation before the payload proves to exist.
  const std::optional<std::uint64_t> remaining = remaining_bytes(in);
  if (remaining && *remaining < h.payload_bytes) {
    throw TruncatedError(std::string(name) + ": truncated payload, expected " + std::to_string(h.payload_bytes) +
                         " bytes, got " + std::to_string(*remaining));
  }
  if (remaining) data.reserve(static_cast<std::size_t>(h.payload_bytes / sizeof(float)));
  constexpr std::uint64_t kStep = std::uint64_t{1} << 26;
  std::uint64_t done = 0;
  while (done < h.payload_bytes) {
    const std::uint64_t step = std::min(kStep, h.payload_bytes - done);
    data.resize(static_cast<std::size_t>((done + step) / sizeof(float)));
    in.read(reinterpret_cast<char*>(data.data()) + done, static_cast<std::streamsize>(step));
    const auto got = static_cast<std::uint64_t>(in.gcount());
    if (got != step) {
      throw TruncatedError(std::string(name) + ": truncated payload, expected " + std::to_string(h.payload_bytes) +
                           " bytes, got " + std::to_string(done + got));
    }
    done += step;
  }
  swap_floats_if_big_endian(data);
  EmbeddingMatrix m(h.rows, h.cols, std::move(data));
  try {
    m.validate();
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(std::string(name) + ": " + e.what());
  }
  return m;
}

EmbeddingMatrix read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EmbeddingMatrix m = read_embedding(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after payload");
  }
  return m;
}

MatrixShape read_embedding_shape(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<unsigned char, kEmbeddingHeaderBytes> raw{};
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (in.gcount() < 8 || std::memcmp(raw.data(), kEmbeddingMagic.data(), kEmbeddingMagic.size()) != 0) {
    throw BadMagicError(path.string() + ": bad magic, expected SALTEMB1");
  }
  if (static_cast<std::size_t>(in.gcount()) < raw.size()) throw TruncatedError(path.string() + ": truncated header");
  const Header h = parse_header(raw, path.string());
  const auto size = std::filesystem::file_size(path);
  if (size < kEmbeddingHeaderBytes + h.payload_bytes) throw TruncatedError(path.string() + ": truncated payload");
  if (size > kEmbeddingHeaderBytes + h.payload_bytes) throw FormatError(path.string() + ": trailing bytes after payload");
  return {h.rows, h.cols};
}

void write_embedding(const EmbeddingMatrix& matrix, std::ostream& out) {
  matrix.validate();
  std::array<unsigned char, kEmbeddingHeaderBytes> raw{};
  std::memcpy(raw.data(), kEmbeddingMagic.data(), kEmbeddingMagic.size());
  store_u32_le(raw.data() + 8, static_cast<std::uint32_t>(matrix.rows()));
  store_u32_le(raw.data() + 12, static_cast<std::uint32_t>(matrix.cols()));
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  if constexpr (std::endian::native == std::endian::little) {
    const auto bytes = std::as_bytes(matrix.data());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    std::vector<float> copy(matrix.data().begin(), matrix.data().end());
    swap_floats_if_big_endian(copy);
    out.write(reinterpret_cast<const char*>(copy.data()), static_cast<std::streamsize>(copy.size() * 4));
  }
  if (!out) throw IoError("write failed");
}

void write_embedding(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  matrix.validate();
  write_file_atomic(path, [&](std::ostream& out) { write_embedding(matrix, out); });
}

Vocabulary parse_vocabulary(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // The lexer also rejects ill-formed UTF-8 inside strings.
    throw FormatError(std::string("vocabulary: malformed JSON: ") + e.what());
  }
  if (!doc.is_array()) throw FormatError("vocabulary: expected a JSON array of strings");
  std::vector<std::string> tokens;
  tokens.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_string()) throw FormatError("vocabulary: element " + std::to_string(i) + " is not a string");
    tokens.push_back(doc[i].get<std::string>());
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_vocabulary(buf.str());
  } catch (const DuplicateTokenError& e) {
    throw DuplicateTokenError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  nlohmann::json doc = vocab.tokens();
  std::string text;
  try {
    text = doc.dump();
  } catch (const nlohmann::json::type_error& e) {
    throw FormatError(std::string("vocabulary contains invalid UTF-8: ") + e.what());
  }
  write_file_atomic(path, [&](std::ostream& out) { out << text << '\n'; });
}

RowStats row_stats(const EmbeddingMatrix& matrix, std::optional<std::span<const std::uint32_t>> subset) {
  if (matrix.empty()) throw ShapeError("row_stats: empty matrix");
  if (subset && subset->empty()) throw ShapeError("row_stats: empty row subset");
  const std::size_t cols = matrix.cols();
  const std::size_t n = subset ? subset->size() : matrix.rows();
  auto row_at = [&](std::size_t i) {
    const std::size_t r = subset ? (*subset)[i] : i;
    if (r >= matrix.rows()) throw ShapeError("row_stats: row id " + std::to_string(r) + " out of range");
    return matrix.row(r).data();
  };
  const auto& k = kernels::active();
  RowStats s{std::vector<double>(cols, 0.0), std::vector<double>(cols, 0.0)};
  for (std::size_t i = 0; i < n; ++i) k.axpy_f32(1.0, row_at(i), s.mean.data(), cols);
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) k.sqdev_f32(row_at(i), s.mean.data(), s.std.data(), cols);
  for (double& v : s.std) v = std::sqrt(v / static_cast<double>(n));
  return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::random_device rd;
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot create " + tmp.string());
      writer(out);
      out.flush();
      if (!out) throw IoError("write failed for " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

}  // namespace salt
