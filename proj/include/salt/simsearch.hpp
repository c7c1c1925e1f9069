#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "salt/tensorio.hpp"

namespace salt {

// Score given to candidate rows with zero norm; excluded downstream.
inline constexpr double kMaskedScore = -std::numeric_limits<double>::infinity();

class NoCandidatesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimilarityCandidate {
  std::uint32_t pair_index;
  double score;
};

struct SimilaritySet {
  std::uint32_t target_id = 0;
  std::vector<SimilarityCandidate> candidates;
};

struct NearestMember {
  std::uint32_t pair_index;
  double weight;  // sparsemax weight, > 0
  friend bool operator==(const NearestMember&, const NearestMember&) = default;
};

struct NearestSet {
  std::uint32_t target_id = 0;
  std::vector<NearestMember> members;
  friend bool operator==(const NearestSet&, const NearestSet&) = default;
};

// score[j] = <query, row_j> / (|query| |row_j|), 64-bit accumulation. Zero-norm
// rows score kMaskedScore. Throws ShapeError on dimension mismatch or a
// zero-norm query.
std::vector<double> cosine_similarities(std::span<const float> query, const EmbeddingMatrix& rows);

// Euclidean projection of `scores` onto the probability simplex.
std::vector<double> sparsemax(std::span<const double> scores);

// Sparsemax over the unmasked candidates; members keep candidate order.
// Throws NoCandidatesError when every candidate is masked (or there are none).
NearestSet select_nearest(const SimilaritySet& set);

// Auxiliary vectors of the shared tokens usable as candidates, with their
// index into OverlapMap::pairs and precomputed norms.
class CandidateIndex {
 public:
  CandidateIndex() = default;
  // Rows whose vector is absent or zero-norm are dropped.
  CandidateIndex(std::size_t dim, const std::vector<std::optional<std::vector<float>>>& per_pair);

  std::size_t size() const noexcept { return pair_index_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const EmbeddingMatrix& vectors() const noexcept { return vectors_; }
  std::span<const std::uint32_t> pair_index() const noexcept { return pair_index_; }
  std::span<const double> norms() const noexcept { return norms_; }

 private:
  std::size_t dim_ = 0;
  EmbeddingMatrix vectors_;
  std::vector<double> norms_;
  std::vector<std::uint32_t> pair_index_;
};

struct SearchQuery {
  std::uint32_t target_id;
  std::optional<std::vector<float>> vector;  // absent -> no nearest set
};

struct SearchOptions {
  unsigned threads = 1;
  std::size_t block_size = 64;  // queries scored together against the index
};

// Blocked exact cosine search + sparsemax selection for each query. Entries
// are nullopt when the query has no vector, has zero norm, or the index is
// empty. Results do not depend on block size or thread count.
std::vector<std::optional<NearestSet>> nearest_sets(const CandidateIndex& index, const std::vector<SearchQuery>& queries,
                                                    const SearchOptions& options);

// JSON lines: {"target_id":..,"members":[[pair_index, weight],...]}
void write_nearest_sets_jsonl(const std::vector<std::optional<NearestSet>>& sets, std::ostream& out);

}  // namespace salt
