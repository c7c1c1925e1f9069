#include "salt/simsearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "salt/error.hpp"
#include "salt/kernels.hpp"
#include "salt/parallel.hpp"

namespace salt {
namespace {

double norm_of(const kernels::KernelTable& k, const float* v, std::size_t n) { return std::sqrt(k.dot_f32(v, v, n)); }

}  // namespace

std::vector<double> cosine_similarities(std::span<const float> query, const EmbeddingMatrix& rows) {
  if (query.size() != rows.cols()) {
    throw ShapeError("cosine_similarities: query dim " + std::to_string(query.size()) + " != row dim " +
                     std::to_string(rows.cols()));
  }
  const auto& k = kernels::active();
  const double qn = norm_of(k, query.data(), query.size());
  if (!(qn > 0.0)) throw ShapeError("cosine_similarities: zero-norm query");
  std::vector<double> out(rows.rows());
  for (std::size_t j = 0; j < rows.rows(); ++j) {
    const float* r = rows.row(j).data();
    const double rn = norm_of(k, r, rows.cols());
    out[j] = rn > 0.0 ? k.dot_f32(query.data(), r, rows.cols()) / (qn * rn) : kMaskedScore;
  }
  return out;
}

std::vector<double> sparsemax(std::span<const double> z) {
  if (z.empty()) throw ShapeError("sparsemax: empty input");
  for (double v : z) {
    if (!std::isfinite(v)) throw ShapeError("sparsemax: non-finite score");
  }
  // tau_S = (sum_S z - 1) / |S| is a lower bound on the simplex threshold for
  // any S, so entries at or below it are outside the support. Iterating this
  // shrinks S to a superset of the support in a few linear passes.
  std::vector<double> survivors(z.begin(), z.end());
  for (;;) {
    double sum = 0.0;
    for (double v : survivors) sum += v;
    const double bound = (sum - 1.0) / static_cast<double>(survivors.size());
    const auto keep_end = std::partition(survivors.begin(), survivors.end(), [&](double v) { return v > bound; });
    if (keep_end == survivors.end()) break;
    survivors.erase(keep_end, survivors.end());
  }
  // Exact threshold from the sorted prefix sums of the survivors.
  std::sort(survivors.begin(), survivors.end(), std::greater<>());
  double cumsum = 0.0;
  double support_sum = 0.0;
  std::size_t support = 0;
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    cumsum += survivors[k];
    if (1.0 + static_cast<double>(k + 1) * survivors[k] > cumsum) {
      support = k + 1;
      support_sum = cumsum;
    }
  }
  const double tau = (support_sum - 1.0) / static_cast<double>(support);
  std::vector<double> w(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) w[i] = std::max(z[i] - tau, 0.0);
  return w;
}

NearestSet select_nearest(const SimilaritySet& set) {
  std::vector<double> scores;
  std::vector<std::uint32_t> which;
  scores.reserve(set.candidates.size());
  which.reserve(set.candidates.size());
  for (const auto& c : set.candidates) {
    if (std::isfinite(c.score)) {
      scores.push_back(c.score);
      which.push_back(c.pair_index);
    }
  }
  if (scores.empty()) {
    throw NoCandidatesError("no valid similarity candidates for target " + std::to_string(set.target_id));
  }
  const auto w = sparsemax(scores);
  NearestSet out{set.target_id, {}};
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) out.members.push_back({which[i], w[i]});
  }
  return out;
}

CandidateIndex::CandidateIndex(std::size_t dim, const std::vector<std::optional<std::vector<float>>>& per_pair)
    : dim_(dim) {
  const auto& k = kernels::active();
  std::vector<float> data;
  for (std::size_t p = 0; p < per_pair.size(); ++p) {
    const auto& v = per_pair[p];
    if (!v) continue;
    if (v->size() != dim) {
      throw ShapeError("candidate vector dim " + std::to_string(v->size()) + " != " + std::to_string(dim));
    }
    const double n = norm_of(k, v->data(), dim);
    if (!(n > 0.0)) continue;
    data.insert(data.end(), v->begin(), v->end());
    norms_.push_back(n);
    pair_index_.push_back(static_cast<std::uint32_t>(p));
  }
  vectors_ = EmbeddingMatrix(pair_index_.size(), dim, std::move(data));
}

std::vector<std::optional<NearestSet>> nearest_sets(const CandidateIndex& index, const std::vector<SearchQuery>& queries,
                                                    const SearchOptions& options) {
  std::vector<std::optional<NearestSet>> out(queries.size());
  if (index.size() == 0 || queries.empty()) return out;
  const std::size_t dim = index.dim();
  const std::size_t n = index.size();
  const std::size_t block = std::max<std::size_t>(1, options.block_size);
  const auto& k = kernels::active();
  const auto norms = index.norms();
  const auto pairs = index.pair_index();

  parallel_for(queries.size(), options.threads, block, [&](std::size_t begin, std::size_t end) {
    // Valid queries of this block.
    std::vector<std::size_t> live;
    std::vector<double> qnorm;
    for (std::size_t q = begin; q < end; ++q) {
      const auto& v = queries[q].vector;
      if (!v) continue;
      if (v->size() != dim) {
        throw ShapeError("query dim " + std::to_string(v->size()) + " != index dim " + std::to_string(dim));
      }
      const double qn = norm_of(k, v->data(), dim);
      if (!(qn > 0.0)) continue;
      live.push_back(q);
      qnorm.push_back(qn);
    }
    if (live.empty()) return;
    const std::size_t m = live.size();
    std::vector<double> scores(m * n);
    double dots[4];
    const float* qp[4];
    for (std::size_t j = 0; j < n; ++j) {
      const float* row = index.vectors().row(j).data();
      for (std::size_t g = 0; g < m; g += 4) {
        for (std::size_t t = 0; t < 4; ++t) qp[t] = queries[live[std::min(g + t, m - 1)]].vector->data();
        k.dot_f32_x4(qp, row, dim, dots);
        for (std::size_t t = 0; t < 4 && g + t < m; ++t) {
          scores[(g + t) * n + j] = dots[t] / (qnorm[g + t] * norms[j]);
        }
      }
    }
    SimilaritySet set;
    set.candidates.resize(n);
    for (std::size_t i = 0; i < m; ++i) {
      set.target_id = queries[live[i]].target_id;
      for (std::size_t j = 0; j < n; ++j) set.candidates[j] = {pairs[j], scores[i * n + j]};
      out[live[i]] = select_nearest(set);
    }
  });
  return out;
}

void write_nearest_sets_jsonl(const std::vector<std::optional<NearestSet>>& sets, std::ostream& out) {
  for (const auto& s : sets) {
    if (!s) continue;
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : s->members) members.push_back({m.pair_index, m.weight});
    out << nlohmann::json{{"target_id", s->target_id}, {"members", members}}.dump() << '\n';
  }
}

}  // namespace salt
