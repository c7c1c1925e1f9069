#include "salt/baselines.hpp"

#include <cmath>

#include "salt/error.hpp"
#include "salt/kernels.hpp"
#include "salt/parallel.hpp"

namespace salt {
namespace {

TransferResult start(const TransferPlan& plan, const EmbeddingMatrix& source, std::size_t target_vocab_size,
                     Method method) {
  if (plan.nearest.size() != plan.overlap.nonshared_target.size()) throw ShapeError("transfer plan is inconsistent");
  const CoverageReport cov = coverage_report(plan.overlap, target_vocab_size);
  TransferResult r;
  r.embedding = EmbeddingMatrix(target_vocab_size, source.cols());
  r.report.method = method;
  r.report.copied = copy_shared_rows(plan.overlap, source, r.embedding);
  r.report.coverage = cov.coverage;
  r.report.shared = cov.shared;
  r.report.nonshared = cov.nonshared;
  r.report.collisions = cov.collisions;
  r.report.candidates = plan.candidates;
  r.report.no_aux = plan.no_aux;
  return r;
}

}  // namespace

TransferResult apply_focus(const TransferPlan& plan, const EmbeddingMatrix& source, std::size_t target_vocab_size,
                           const TransferConfig& config) {
  config.validate();
  TransferResult r = start(plan, source, target_vocab_size, Method::focus);
  const auto& ns = plan.overlap.nonshared_target;
  const RowStats stats = row_stats(source);
  std::vector<unsigned char> solved(ns.size(), 0);
  const auto& k = kernels::active();
  parallel_for(ns.size(), config.threads, 64, [&](std::size_t b, std::size_t e) {
    std::vector<double> acc(source.cols());
    for (std::size_t i = b; i < e; ++i) {
      const auto& set = plan.nearest[i];
      auto row = r.embedding.row(ns[i]);
      if (!set || set->members.size() < config.min_pairs) {
        sample_fallback_row(stats, config.seed, ns[i], row);
        continue;
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& m : set->members) {
        k.axpy_f32(m.weight, source.row(plan.overlap.pairs[m.pair_index].source_id).data(), acc.data(), acc.size());
      }
      for (std::size_t j = 0; j < acc.size(); ++j) row[j] = static_cast<float>(acc[j]);
      solved[i] = 1;
    }
  });
  double pairs_sum = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (solved[i]) {
      ++r.report.solved;
      pairs_sum += static_cast<double>(plan.nearest[i]->members.size());
    } else {
      ++r.report.fallback;
    }
  }
  if (r.report.solved > 0) r.report.mean_pairs = pairs_sum / static_cast<double>(r.report.solved);
  return r;
}

TransferResult focus_transfer(const EmbeddingMatrix& source, const Vocabulary& source_vocab,
                              const Vocabulary& target_vocab, const AuxiliaryEmbeddings& aux,
                              const NormalizationRules& rules, const TransferConfig& config) {
  TransferInputs in;
  in.source_embedding = &source;
  in.source_vocab = &source_vocab;
  in.target_vocab = &target_vocab;
  in.aux = &aux;
  in.rules = rules;
  TransferConfig c = config;
  c.method = Method::focus;
  return run_transfer(in, c);
}

TransferResult apply_multivariate(const TransferPlan& plan, const EmbeddingMatrix& source,
                                  std::size_t target_vocab_size, const TransferConfig& config) {
  config.validate();
  TransferResult r = start(plan, source, target_vocab_size, Method::multivariate);
  const auto& ns = plan.overlap.nonshared_target;
  const RowStats stats = row_stats(source);
  parallel_for(ns.size(), config.threads, 256, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) sample_fallback_row(stats, config.seed, ns[i], r.embedding.row(ns[i]));
  });
  r.report.fallback = ns.size();
  return r;
}

TransferResult multivariate_transfer(const EmbeddingMatrix& source, const Vocabulary& source_vocab,
                                     const Vocabulary& target_vocab, const NormalizationRules& rules,
                                     const TransferConfig& config) {
  TransferInputs in;
  in.source_embedding = &source;
  in.source_vocab = &source_vocab;
  in.target_vocab = &target_vocab;
  in.rules = rules;
  TransferConfig c = config;
  c.method = Method::multivariate;
  return run_transfer(in, c);
}

}  // namespace salt
