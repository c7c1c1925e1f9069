#pragma once

#include "salt/transfer.hpp"

namespace salt {

// Non-shared row = sum_m weight_m * Es[source_id_m] over the sparsemax
// nearest set; tokens without a nearest set fall back to keyed normal
// sampling from the source statistics.
TransferResult apply_focus(const TransferPlan& plan, const EmbeddingMatrix& source, std::size_t target_vocab_size,
                           const TransferConfig& config);

TransferResult focus_transfer(const EmbeddingMatrix& source, const Vocabulary& source_vocab,
                              const Vocabulary& target_vocab, const AuxiliaryEmbeddings& aux,
                              const NormalizationRules& rules, const TransferConfig& config);

// Every non-shared row sampled per dimension from Normal(mean_s, std_s) with
// the same keying as fallback_init.
TransferResult apply_multivariate(const TransferPlan& plan, const EmbeddingMatrix& source,
                                  std::size_t target_vocab_size, const TransferConfig& config);

TransferResult multivariate_transfer(const EmbeddingMatrix& source, const Vocabulary& source_vocab,
                                     const Vocabulary& target_vocab, const NormalizationRules& rules,
                                     const TransferConfig& config);

}  // namespace salt
