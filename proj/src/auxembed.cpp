#include "salt/auxembed.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "salt/error.hpp"
#include "salt/kernels.hpp"
#include "salt/text.hpp"

namespace salt {

void SubwordBundle::validate() const {
  if (bucket_count == 0) throw FormatError("subword bundle: bucket_count must be positive");
  if (minn < 1 || minn > maxn) throw FormatError("subword bundle: require 1 <= minn <= maxn");
  if (ngrams.rows() != bucket_count) {
    throw FormatError("subword bundle: matrix has " + std::to_string(ngrams.rows()) + " rows but bucket_count is " +
                      std::to_string(bucket_count));
  }
  ngrams.validate();
}

std::uint32_t fnv1a32(std::string_view bytes) {
  std::uint32_t h = 2166136261u;
  for (const char c : bytes) {
    h ^= static_cast<std::uint32_t>(static_cast<unsigned char>(c));
    h *= 16777619u;
  }
  return h;
}

std::uint64_t ngram_hash(std::string_view bytes, std::uint64_t bucket_count) {
  return static_cast<std::uint64_t>(fnv1a32(bytes)) % bucket_count;
}

std::vector<std::string> character_ngrams(std::string_view word, std::uint32_t minn, std::uint32_t maxn) {
  const std::string wrapped = "<" + std::string(word) + ">";
  const auto bounds = text::char_boundaries(wrapped);
  const std::size_t nchars = bounds.size() - 1;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < nchars; ++i) {
    for (std::size_t n = minn; n <= maxn && i + n <= nchars; ++n) {
      if (n == 1 && (i == 0 || i + 1 == nchars)) continue;
      out.emplace_back(wrapped.substr(bounds[i], bounds[i + n] - bounds[i]));
    }
  }
  return out;
}

SubwordBundle read_subword_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string meta_line;
  if (!std::getline(in, meta_line)) throw FormatError(path.string() + ": missing metadata line");
  SubwordBundle b;
  try {
    const auto meta = nlohmann::json::parse(meta_line);
    for (const auto& [key, _] : meta.items()) {
      if (key != "bucket_count" && key != "minn" && key != "maxn") {
        throw FormatError(path.string() + ": unknown metadata key '" + key + "'");
      }
    }
    b.bucket_count = meta.at("bucket_count").get<std::uint32_t>();
    b.minn = meta.at("minn").get<std::uint32_t>();
    b.maxn = meta.at("maxn").get<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad metadata line: " + e.what());
  }
  b.ngrams = read_embedding(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes after matrix");
  try {
    b.validate();
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return b;
}

void write_subword_bundle(const SubwordBundle& bundle, const std::filesystem::path& path) {
  bundle.validate();
  const nlohmann::json meta{{"bucket_count", bundle.bucket_count}, {"minn", bundle.minn}, {"maxn", bundle.maxn}};
  write_file_atomic(path, [&](std::ostream& out) {
    out << meta.dump() << '\n';
    write_embedding(bundle.ngrams, out);
  });
}

bool AuxiliaryEmbeddings::add_word(std::string word, std::span<const float> vec) {
  if (vec.size() != dim_) {
    throw ShapeError("aux vector for '" + word + "' has length " + std::to_string(vec.size()) + ", expected " +
                     std::to_string(dim_));
  }
  const std::size_t row = index_.size();
  auto [it, inserted] = index_.emplace(std::move(word), row);
  if (!inserted) return false;
  data_.insert(data_.end(), vec.begin(), vec.end());
  return true;
}

std::optional<std::span<const float>> AuxiliaryEmbeddings::word(std::string_view w) const {
  const auto it = index_.find(std::string(w));
  if (it == index_.end()) return std::nullopt;
  return std::span<const float>(data_.data() + it->second * dim_, dim_);
}

void AuxiliaryEmbeddings::set_bundle(SubwordBundle bundle) {
  bundle.validate();
  if (dim_ == 0) dim_ = bundle.ngrams.cols();
  if (bundle.ngrams.cols() != dim_) {
    throw ShapeError("subword bundle dim " + std::to_string(bundle.ngrams.cols()) + " != word-vector dim " +
                     std::to_string(dim_));
  }
  bundle_ = std::move(bundle);
}

std::optional<std::vector<float>> AuxiliaryEmbeddings::compose_subword(std::string_view word) const {
  if (!bundle_) throw ShapeError("compose_subword: no subword bundle loaded");
  const auto ngrams = character_ngrams(word, bundle_->minn, bundle_->maxn);
  if (ngrams.empty()) return std::nullopt;
  const auto& k = kernels::active();
  std::vector<double> acc(dim_, 0.0);
  for (const auto& g : ngrams) {
    const auto bucket = ngram_hash(g, bundle_->bucket_count);
    k.axpy_f32(1.0, bundle_->ngrams.row(bucket).data(), acc.data(), dim_);
  }
  std::vector<float> out(dim_);
  const double n = static_cast<double>(ngrams.size());
  for (std::size_t j = 0; j < dim_; ++j) out[j] = static_cast<float>(acc[j] / n);
  return out;
}

std::optional<std::vector<float>> AuxiliaryEmbeddings::lookup(std::string_view token,
                                                              const NormalizationRules& rules) const {
  const std::string norm = normalize_token(token, rules);
  if (norm.empty()) return std::nullopt;
  if (auto v = word(norm)) return std::vector<float>(v->begin(), v->end());
  const std::string lower = text::to_lower(norm);
  if (lower != norm) {
    if (auto v = word(lower)) return std::vector<float>(v->begin(), v->end());
  }
  if (bundle_) return compose_subword(norm);
  return std::nullopt;
}

AuxiliaryEmbeddings load_vec_text(std::istream& in, std::string_view name) {
  const std::string where(name);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(where + ": missing header", 1);
  std::size_t count = 0;
  std::size_t dim = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> count >> dim) || (hs >> extra) || dim == 0) {
      throw ParseError(where + ": malformed header, expected \"count dim\"", 1);
    }
  }
  AuxiliaryEmbeddings aux(dim);
  aux.index_.reserve(count);
  aux.data_.reserve(count * dim);
  std::vector<float> vec(dim);
  std::size_t lineno = 1;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0) throw ParseError(where + ": expected word followed by values", lineno);
    std::string word = line.substr(0, sp);
    const char* p = line.data() + sp;
    const char* end = line.data() + line.size();
    std::size_t got = 0;
    for (;;) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float v = 0.0f;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next != end && *next != ' ')) {
        throw ParseError(where + ": bad float value for '" + word + "'", lineno);
      }
      if (got == dim) {
        ++got;
        break;
      }
      if (!std::isfinite(v)) throw ParseError(where + ": non-finite value for '" + word + "'", lineno);
      vec[got++] = v;
      p = next;
    }
    if (got != dim) {
      throw ParseError(where + ": expected " + std::to_string(dim) + " values for '" + word + "', got " +
                           (got > dim ? "more" : std::to_string(got)),
                       lineno);
    }
    ++seen;
    if (!aux.add_word(std::move(word), vec)) {
      ++aux.duplicates_;
      spdlog::warn("{}:{}: duplicate word, keeping the first occurrence", where, lineno);
    }
  }
  if (seen != count) {
    throw ParseError(where + ": header declares " + std::to_string(count) + " vectors but file has " +
                         std::to_string(seen),
                     lineno);
  }
  return aux;
}

AuxiliaryEmbeddings load_vec_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_vec_text(in, path.string());
}

void write_vec_text(const std::vector<std::pair<std::string, std::vector<float>>>& words, std::size_t dim,
                    const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << words.size() << ' ' << dim << '\n';
    char buf[32];
    for (const auto& [w, v] : words) {
      if (v.size() != dim) throw ShapeError("write_vec_text: vector length mismatch for '" + w + "'");
      out << w;
      for (float x : v) {
        // Shortest round-trip representation.
        const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
        out << ' ';
        out.write(buf, end - buf);
      }
      out << '\n';
    }
  });
}

}  // namespace salt
