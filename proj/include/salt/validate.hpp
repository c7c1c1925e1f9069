#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "salt/auxembed.hpp"
#include "salt/tensorio.hpp"
#include "salt/report.hpp"
#include "salt/transfer.hpp"

namespace salt {

struct SyntheticSpec {
  std::size_t vt_size = 2000;
  std::size_t vs_size = 3000;
  std::size_t h_s = 32;
  std::size_t h_t = 32;
  std::size_t aux_dim = 16;
  double overlap_ratio = 0.5;  // in (0, 1]
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  // Shared tokens per aux cluster; 0 picks max(h_t + h_t / 2, 4).
  std::size_t cluster_size = 0;

  std::size_t shared_count() const;
  std::size_t effective_cluster_size() const;
  // Throws ShapeError on an infeasible spec.
  void validate() const;
};

SyntheticSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticSpec& s);

// Perturbation scale of aux vectors around their unit cluster center.
inline constexpr double kClusterPerturbation = 0.01;

struct SyntheticInstance {
  SyntheticSpec spec;
  EmbeddingMatrix source;  // vs_size x h_s
  Vocabulary source_vocab;
  EmbeddingMatrix target;  // vt_size x h_t
  Vocabulary target_vocab;
  std::vector<std::pair<std::string, std::vector<float>>> aux_words;  // keyed by normalized token
  AuxiliaryEmbeddings aux;
  EmbeddingMatrix planted;                    // W, h_t x h_s
  std::vector<std::uint32_t> shared_target;   // ascending
  std::vector<std::uint32_t> nonshared_target;  // ascending

  // Planted truth E_t[id] * W in double precision.
  std::vector<double> truth_row(std::uint32_t target_id) const;
};

SyntheticInstance generate_instance(const SyntheticSpec& spec);

// source.emb, source.vocab.json, target.emb, target.vocab.json, aux.vec, planted_w.emb
void write_instance(const SyntheticInstance& inst, const std::filesystem::path& dir);

struct RecoveryMetrics {
  std::size_t rows = 0;
  double mean_rel_error = 0.0;
  double max_rel_error = 0.0;
};

// Relative row error against the planted truth over the non-shared target ids.
RecoveryMetrics evaluate_recovery(const SyntheticInstance& inst, const EmbeddingMatrix& output);

struct MethodOutcome {
  TransferReport report;
  RecoveryMetrics recovery;
  bool shared_rows_exact = false;
};

struct ValidationResult {
  MethodOutcome salt;
  MethodOutcome focus;
  MethodOutcome multivariate;
};

ValidationResult run_validation(const SyntheticInstance& inst, const TransferConfig& config);

// Pre-tokenized corpus: "SALTIDS1", u32 count, count u32 lengths, then the ids.
struct IdStream {
  std::vector<std::uint32_t> lengths;
  std::vector<std::uint32_t> ids;
};

inline constexpr std::string_view kIdStreamMagic = "SALTIDS1";

IdStream read_id_stream(const std::filesystem::path& path);
void write_id_stream(const IdStream& stream, const std::filesystem::path& path);

struct LengthFootprint {
  std::uint64_t samples_before = 0;
  std::uint64_t tokens_before = 0;
  std::uint64_t samples_after = 0;
  std::uint64_t tokens_after = 0;
  double mean_before = 0.0;
  double mean_after = 0.0;
  double length_change_pct = 0.0;     // (after - before) / before * 100
  double length_reduction_pct = 0.0;  // -length_change_pct
};

struct FootprintReport {
  std::uint64_t vocab_before = 0;
  std::uint64_t vocab_after = 0;
  std::uint64_t hidden_before = 0;
  std::uint64_t hidden_after = 0;
  std::uint64_t params_before = 0;
  std::uint64_t params_after = 0;
  double param_change_pct = 0.0;
  double param_reduction_pct = 0.0;
  std::optional<LengthFootprint> lengths;
};

// Percent helpers used by the report; exposed so consumers can recompute.
double percent_change(std::uint64_t before, std::uint64_t after);
double mean_length(std::uint64_t tokens, std::uint64_t samples);

FootprintReport footprint_report(const MatrixShape& before, const MatrixShape& after,
                                 const std::optional<IdStream>& ids_before = std::nullopt,
                                 const std::optional<IdStream>& ids_after = std::nullopt);

nlohmann::json to_json(const RecoveryMetrics& m);
nlohmann::json to_json(const ValidationResult& v);
nlohmann::json to_json(const FootprintReport& r);

}  // namespace salt
