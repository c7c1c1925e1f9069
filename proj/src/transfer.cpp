#include "salt/transfer.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include "salt/baselines.hpp"
#include "salt/error.hpp"
#include "salt/kernels.hpp"
#include "salt/parallel.hpp"

namespace salt {
namespace {

// Truncated SVD A = U_r S_r V_r^T of the k x h pair matrix, keeping singular
// values above rcond * sigma_max. When k < h the SVD is taken of the k x k
// triangular factor of A^T = Q R, so V_r = Q [W_r; 0] is never formed unless
// asked for.
class PinvFactor {
 public:
  PinvFactor(const Eigen::MatrixXd& at, double rcond) : wide_(at.cols() < at.rows()) {
    const Eigen::Index k = at.cols();
    if (wide_) {
      qr_.compute(at);
      const Eigen::MatrixXd lower = qr_.matrixQR().topRows(k).triangularView<Eigen::Upper>().transpose();
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(lower, Eigen::ComputeFullU | Eigen::ComputeFullV);
      truncate(svd, rcond);
    } else {
      const Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(
          at.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
      truncate(svd, rcond);
    }
  }

  const Eigen::MatrixXd& u() const { return u_; }
  const Eigen::VectorXd& inv() const { return inv_; }
  std::size_t rank() const { return rank_; }

  // V_r^T x for x of length h.
  Eigen::VectorXd vt_times(const Eigen::VectorXd& x) const {
    if (!wide_) return w_.transpose() * x;
    Eigen::VectorXd y = x;
    y.applyOnTheLeft(qr_.householderQ().transpose());
    return w_.transpose() * y.head(w_.rows());
  }

  Eigen::MatrixXd v() const {
    if (!wide_) return w_;
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(qr_.rows(), w_.cols());
    padded.topRows(w_.rows()) = w_;
    padded.applyOnTheLeft(qr_.householderQ());
    return padded;
  }

 private:
  template <class Svd>
  void truncate(const Svd& svd, double rcond) {
    const Eigen::VectorXd& s = svd.singularValues();
    std::size_t r = 0;
    if (s.size() > 0 && s(0) > 0.0) {
      const double cutoff = rcond * s(0);
      while (r < static_cast<std::size_t>(s.size()) && s(static_cast<Eigen::Index>(r)) > cutoff) ++r;
    }
    const auto ri = static_cast<Eigen::Index>(r);
    rank_ = r;
    u_ = svd.matrixU().leftCols(ri);
    w_ = svd.matrixV().leftCols(ri);
    inv_ = s.head(ri).cwiseInverse();
  }

  bool wide_;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd u_;    // k x r
  Eigen::MatrixXd w_;    // k x r (wide) or h x r
  Eigen::VectorXd inv_;  // r, 1 / sigma_i
  std::size_t rank_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

struct Projection {
  double residual = 0.0;
  std::size_t rank = 0;
};

// out = e_t * pinv(Et') * Es' without forming the h_t x h_s map.
Projection project_row(const NearestSet& set, const OverlapMap& overlap, const EmbeddingMatrix& source,
                       const EmbeddingMatrix& target, std::uint32_t target_id, double rcond, std::span<float> out,
                       std::vector<double>& acc) {
  const auto k = static_cast<Eigen::Index>(set.members.size());
  const auto ht = static_cast<Eigen::Index>(target.cols());
  // Et' transposed: one column per pair.
  Eigen::MatrixXd etp_t(ht, k);
  for (Eigen::Index m = 0; m < k; ++m) {
    const TokenPair& p = overlap.pairs[set.members[static_cast<std::size_t>(m)].pair_index];
    const auto trow = target.row(p.target_id);
    for (Eigen::Index j = 0; j < ht; ++j) etp_t(j, m) = trow[static_cast<std::size_t>(j)];
  }
  const PinvFactor f(etp_t, rcond);

  const auto query = target.row(target_id);
  Eigen::VectorXd e(ht);
  for (Eigen::Index j = 0; j < ht; ++j) e(j) = query[static_cast<std::size_t>(j)];
  const Eigen::VectorXd coeff = f.u() * f.inv().cwiseProduct(f.vt_times(e));

  const auto& kt = kernels::active();
  std::fill(acc.begin(), acc.end(), 0.0);
  for (Eigen::Index m = 0; m < k; ++m) {
    const TokenPair& p = overlap.pairs[set.members[static_cast<std::size_t>(m)].pair_index];
    kt.axpy_f32(coeff(m), source.row(p.source_id).data(), acc.data(), acc.size());
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = static_cast<float>(acc[j]);
    if (!std::isfinite(out[j])) throw ShapeError("non-finite projected value for target " + std::to_string(target_id));
  }
  Projection r;
  r.rank = f.rank();
  // With rank k the column space of U is all of R^k and the residual vanishes.
  if (f.rank() < static_cast<std::size_t>(k)) {
    const auto hs = static_cast<Eigen::Index>(source.cols());
    Eigen::MatrixXd esp(k, hs);
    for (Eigen::Index m = 0; m < k; ++m) {
      const TokenPair& p = overlap.pairs[set.members[static_cast<std::size_t>(m)].pair_index];
      const auto srow = source.row(p.source_id);
      for (Eigen::Index j = 0; j < hs; ++j) esp(m, j) = srow[static_cast<std::size_t>(j)];
    }
    r.residual = (esp - f.u() * (f.u().transpose() * esp)).norm();
  }
  return r;
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw ShapeError(std::string("solve_token_transform: non-finite values in ") + what);
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::salt:
      return "salt";
    case Method::focus:
      return "focus";
    case Method::multivariate:
      return "multivariate";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::salt, Method::focus, Method::multivariate}) {
    if (name == method_name(m)) return m;
  }
  throw UsageError("unknown method '" + std::string(name) + "' (expected salt, focus or multivariate)");
}

void TransferConfig::validate() const {
  if (!(rcond > 0.0) || !std::isfinite(rcond)) throw ShapeError("rcond must be positive");
  if (min_pairs < 1) throw ShapeError("min_pairs must be >= 1");
  if (block_size < 1) throw ShapeError("block_size must be >= 1");
}

TokenTransform solve_token_transform(const Eigen::MatrixXd& et_pairs, const Eigen::MatrixXd& es_pairs, double rcond) {
  if (et_pairs.rows() == 0) throw ShapeError("solve_token_transform: need at least one pair");
  if (et_pairs.rows() != es_pairs.rows()) throw ShapeError("solve_token_transform: pair counts differ");
  if (et_pairs.cols() == 0 || es_pairs.cols() == 0) throw ShapeError("solve_token_transform: zero dimension");
  if (!(rcond > 0.0)) throw ShapeError("solve_token_transform: rcond must be positive");
  check_finite(et_pairs, "target pairs");
  check_finite(es_pairs, "source pairs");
  const PinvFactor f(et_pairs.transpose(), rcond);
  TokenTransform t;
  t.pair_count = static_cast<std::size_t>(et_pairs.rows());
  t.rank = f.rank();
  t.X = f.v() * f.inv().asDiagonal() * (f.u().transpose() * es_pairs);
  t.residual = (et_pairs * t.X - es_pairs).norm();
  return t;
}

double keyed_normal(std::uint64_t seed, std::uint64_t token_id, std::uint64_t dim) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ token_id) ^ dim);
  const std::uint64_t h2 = splitmix64(h);
  constexpr double kScale = 0x1.0p-53;
  const double u1 = static_cast<double>((h >> 11) + 1) * kScale;  // (0, 1]
  const double u2 = static_cast<double>(h2 >> 11) * kScale;       // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void sample_fallback_row(const RowStats& stats, std::uint64_t seed, std::uint32_t token_id, std::span<float> out) {
  if (stats.mean.size() != out.size() || stats.std.size() != out.size()) {
    throw ShapeError("fallback row length does not match stats");
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = static_cast<float>(stats.mean[j] + stats.std[j] * keyed_normal(seed, token_id, j));
  }
}

EmbeddingMatrix fallback_init(std::span<const std::uint32_t> token_ids, const RowStats& stats, std::uint64_t seed) {
  EmbeddingMatrix out(token_ids.size(), stats.mean.size());
  for (std::size_t i = 0; i < token_ids.size(); ++i) sample_fallback_row(stats, seed, token_ids[i], out.row(i));
  return out;
}

std::size_t copy_shared_rows(const OverlapMap& overlap, const EmbeddingMatrix& source, EmbeddingMatrix& out) {
  for (const auto& p : overlap.pairs) {
    const auto src = source.row(p.source_id);
    std::copy(src.begin(), src.end(), out.row(p.target_id).begin());
  }
  return overlap.pairs.size();
}

TransferPlan plan_transfer(const Vocabulary& source_vocab, const Vocabulary& target_vocab,
                           const AuxiliaryEmbeddings* aux, const NormalizationRules& rules,
                           const TransferConfig& config) {
  config.validate();
  TransferPlan plan;
  plan.overlap = compute_overlap(source_vocab, target_vocab, rules, config.threads);
  const auto& ns = plan.overlap.nonshared_target;
  plan.nearest.assign(ns.size(), std::nullopt);
  if (aux == nullptr) return plan;

  const auto& pairs = plan.overlap.pairs;
  std::vector<std::optional<std::vector<float>>> pair_vectors(pairs.size());
  parallel_for(pairs.size(), config.threads, 1024, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) pair_vectors[i] = aux->lookup(target_vocab.token(pairs[i].target_id), rules);
  });
  const CandidateIndex index(aux->dim(), pair_vectors);
  pair_vectors.clear();
  pair_vectors.shrink_to_fit();
  plan.candidates = index.size();

  std::vector<SearchQuery> queries(ns.size());
  parallel_for(ns.size(), config.threads, 1024, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) queries[i] = {ns[i], aux->lookup(target_vocab.token(ns[i]), rules)};
  });
  for (const auto& q : queries) plan.no_aux += q.vector ? 0 : 1;
  plan.nearest = nearest_sets(index, queries, {config.threads, config.block_size});
  return plan;
}

TransferResult apply_salt(const TransferPlan& plan, const EmbeddingMatrix& source, const EmbeddingMatrix& target,
                          std::size_t target_vocab_size, const TransferConfig& config) {
  config.validate();
  if (target.rows() != target_vocab_size) {
    throw ShapeError("target embedding has " + std::to_string(target.rows()) + " rows but target vocabulary has " +
                     std::to_string(target_vocab_size) + " tokens");
  }
  const auto& ns = plan.overlap.nonshared_target;
  if (plan.nearest.size() != ns.size()) throw ShapeError("transfer plan is inconsistent");
  const CoverageReport cov = coverage_report(plan.overlap, target_vocab_size);

  TransferResult result;
  result.embedding = EmbeddingMatrix(target_vocab_size, source.cols());
  TransferReport& rep = result.report;
  rep.method = Method::salt;
  rep.copied = copy_shared_rows(plan.overlap, source, result.embedding);

  const RowStats stats = row_stats(source);
  std::vector<double> residual(ns.size(), -1.0);
  std::vector<std::size_t> pair_count(ns.size(), 0);
  parallel_for(ns.size(), config.threads, 8, [&](std::size_t b, std::size_t e) {
    std::vector<double> acc(source.cols());
    for (std::size_t i = b; i < e; ++i) {
      const std::uint32_t tid = ns[i];
      const auto& set = plan.nearest[i];
      auto row = result.embedding.row(tid);
      if (set && set->members.size() >= config.min_pairs) {
        residual[i] = project_row(*set, plan.overlap, source, target, tid, config.rcond, row, acc).residual;
        pair_count[i] = set->members.size();
      } else {
        sample_fallback_row(stats, config.seed, tid, row);
      }
    }
  });

  double residual_sum = 0.0;
  double pairs_sum = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (residual[i] < 0.0) {
      ++rep.fallback;
      continue;
    }
    ++rep.solved;
    residual_sum += residual[i];
    rep.residual_max = std::max(rep.residual_max, residual[i]);
    pairs_sum += static_cast<double>(pair_count[i]);
  }
  if (rep.solved > 0) {
    rep.residual_mean = residual_sum / static_cast<double>(rep.solved);
    rep.mean_pairs = pairs_sum / static_cast<double>(rep.solved);
  }
  rep.coverage = cov.coverage;
  rep.shared = cov.shared;
  rep.nonshared = cov.nonshared;
  rep.collisions = cov.collisions;
  rep.candidates = plan.candidates;
  rep.no_aux = plan.no_aux;
  return result;
}

TransferResult salt_transfer(const EmbeddingMatrix& source, const Vocabulary& source_vocab,
                             const EmbeddingMatrix& target, const Vocabulary& target_vocab,
                             const AuxiliaryEmbeddings& aux, const NormalizationRules& rules,
                             const TransferConfig& config) {
  TransferInputs in;
  in.source_embedding = &source;
  in.source_vocab = &source_vocab;
  in.target_embedding = &target;
  in.target_vocab = &target_vocab;
  in.aux = &aux;
  in.rules = rules;
  TransferConfig c = config;
  c.method = Method::salt;
  return run_transfer(in, c);
}

TransferResult run_transfer(const TransferInputs& in, const TransferConfig& config, const TransferPlan* plan) {
  config.validate();
  if (in.source_embedding == nullptr || in.source_vocab == nullptr || in.target_vocab == nullptr) {
    throw ShapeError("transfer requires source embedding, source vocabulary and target vocabulary");
  }
  const EmbeddingMatrix& es = *in.source_embedding;
  if (es.rows() != in.source_vocab->size()) {
    throw ShapeError("source embedding has " + std::to_string(es.rows()) + " rows but source vocabulary has " +
                     std::to_string(in.source_vocab->size()) + " tokens");
  }
  if (config.method == Method::salt && in.target_embedding == nullptr) {
    throw ShapeError("salt requires the target embedding");
  }
  if (config.method != Method::multivariate && in.aux == nullptr) {
    throw ShapeError(std::string(method_name(config.method)) + " requires auxiliary vectors");
  }
  TransferPlan local;
  if (plan == nullptr) {
    local = plan_transfer(*in.source_vocab, *in.target_vocab,
                          config.method == Method::multivariate ? nullptr : in.aux, in.rules, config);
    plan = &local;
  }
  switch (config.method) {
    case Method::salt:
      return apply_salt(*plan, es, *in.target_embedding, in.target_vocab->size(), config);
    case Method::focus:
      return apply_focus(*plan, es, in.target_vocab->size(), config);
    case Method::multivariate:
      return apply_multivariate(*plan, es, in.target_vocab->size(), config);
  }
  throw ShapeError("unknown method");
}

EmbeddingMatrix make_head(const EmbeddingMatrix& embedding, const EmbeddingMatrix* head_source,
                          const TransferInputs& inputs, const TransferConfig& config, const TransferPlan* plan) {
  if (config.tied_head) {
    if (head_source != nullptr) spdlog::warn("tied head: ignoring the supplied head source matrix");
    return embedding.transposed();
  }
  if (head_source == nullptr) throw ShapeError("untied head requires a head source matrix");
  TransferInputs head_inputs = inputs;
  head_inputs.source_embedding = head_source;
  return run_transfer(head_inputs, config, plan).embedding.transposed();
}

}  // namespace salt
