#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "salt/auxembed.hpp"
#include "salt/overlap.hpp"
#include "salt/simsearch.hpp"
#include "salt/tensorio.hpp"

namespace salt {

enum class Method { salt, focus, multivariate };

std::string_view method_name(Method m);
// Throws UsageError on an unknown name.
Method parse_method(std::string_view name);

struct TransferConfig {
  Method method = Method::salt;
  std::uint64_t seed = 0;
  double rcond = 1e-6;  // singular values <= rcond * sigma_max are dropped
  bool tied_head = true;
  std::uint32_t min_pairs = 1;  // nearest sets smaller than this fall back
  unsigned threads = 0;         // 0 = all cores
  std::size_t block_size = 64;  // queries per similarity block

  void validate() const;
};

struct TransferReport {
  Method method = Method::salt;
  std::size_t copied = 0;
  std::size_t solved = 0;
  std::size_t fallback = 0;
  double residual_mean = 0.0;
  double residual_max = 0.0;
  double coverage = 0.0;
  std::size_t shared = 0;
  std::size_t nonshared = 0;
  std::size_t collisions = 0;
  std::size_t candidates = 0;  // shared tokens with a usable aux vector
  std::size_t no_aux = 0;      // non-shared tokens whose aux lookup failed
  double mean_pairs = 0.0;     // mean nearest-set size over solved tokens
};

// Least-squares map for one token, X in R^{h_t x h_s}.
struct TokenTransform {
  std::uint32_t target_id = 0;
  Eigen::MatrixXd X;
  double residual = 0.0;  // ||Et' X - Es'||_F
  std::size_t pair_count = 0;
  std::size_t rank = 0;
};

// Minimum-norm least-squares solve X = pinv(et_pairs) * es_pairs through a
// thin SVD with cutoff sigma_i <= rcond * sigma_max. Throws ShapeError on
// shape mismatch, k == 0 or non-finite input.
TokenTransform solve_token_transform(const Eigen::MatrixXd& et_pairs, const Eigen::MatrixXd& es_pairs, double rcond);

// Deterministic standard normal keyed by (seed, token, dim).
double keyed_normal(std::uint64_t seed, std::uint64_t token_id, std::uint64_t dim);
void sample_fallback_row(const RowStats& stats, std::uint64_t seed, std::uint32_t token_id, std::span<float> out);
// One row per id: row[i][j] = mean[j] + std[j] * keyed_normal(seed, ids[i], j).
EmbeddingMatrix fallback_init(std::span<const std::uint32_t> token_ids, const RowStats& stats, std::uint64_t seed);

// Inputs shared by every method. Null pointers mark inputs a method does not
// need (target_embedding for focus/multivariate, aux for multivariate).
struct TransferInputs {
  const EmbeddingMatrix* source_embedding = nullptr;
  const Vocabulary* source_vocab = nullptr;
  const EmbeddingMatrix* target_embedding = nullptr;
  const Vocabulary* target_vocab = nullptr;
  const AuxiliaryEmbeddings* aux = nullptr;
  NormalizationRules rules;
};

// Overlap plus the nearest set of every non-shared target token.
struct TransferPlan {
  OverlapMap overlap;
  std::vector<std::optional<NearestSet>> nearest;  // parallel to overlap.nonshared_target
  std::size_t candidates = 0;
  std::size_t no_aux = 0;
};

// Nearest sets are computed only when `aux` is non-null.
TransferPlan plan_transfer(const Vocabulary& source_vocab, const Vocabulary& target_vocab,
                           const AuxiliaryEmbeddings* aux, const NormalizationRules& rules,
                           const TransferConfig& config);

struct TransferResult {
  EmbeddingMatrix embedding;  // |V_t| x h_s
  TransferReport report;
};

TransferResult apply_salt(const TransferPlan& plan, const EmbeddingMatrix& source, const EmbeddingMatrix& target,
                          std::size_t target_vocab_size, const TransferConfig& config);

TransferResult salt_transfer(const EmbeddingMatrix& source, const Vocabulary& source_vocab,
                             const EmbeddingMatrix& target, const Vocabulary& target_vocab,
                             const AuxiliaryEmbeddings& aux, const NormalizationRules& rules,
                             const TransferConfig& config);

// Dispatches on config.method. `plan` may be supplied to skip re-planning.
TransferResult run_transfer(const TransferInputs& inputs, const TransferConfig& config,
                            const TransferPlan* plan = nullptr);

// LM head of shape h_s x |V_t|. Tied: transpose of `embedding` (a supplied
// head_source is ignored with a warning). Untied: the configured method is run
// on `head_source` (|V_s| x h_s rows) in place of the source embedding, then
// transposed. Throws ShapeError when untied and head_source is null.
EmbeddingMatrix make_head(const EmbeddingMatrix& embedding, const EmbeddingMatrix* head_source,
                          const TransferInputs& inputs, const TransferConfig& config,
                          const TransferPlan* plan = nullptr);

// Shared-row copy used by all methods; returns the number of rows copied.
std::size_t copy_shared_rows(const OverlapMap& overlap, const EmbeddingMatrix& source, EmbeddingMatrix& out);

}  // namespace salt
