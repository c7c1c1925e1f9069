#include "salt/overlap.hpp"

#include <unordered_map>

#include "salt/error.hpp"
#include "salt/parallel.hpp"
#include "salt/text.hpp"

namespace salt {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

void remove_all(std::string& s, std::string_view marker) {
  std::size_t pos = s.find(marker);
  if (pos == std::string::npos) return;
  std::string out;
  out.reserve(s.size());
  std::size_t from = 0;
  while (pos != std::string::npos) {
    out.append(s, from, pos - from);
    from = pos + marker.size();
    pos = s.find(marker, from);
  }
  out.append(s, from, std::string::npos);
  s = std::move(out);
}

std::vector<std::string> normalize_all(const Vocabulary& v, const NormalizationRules& rules, unsigned threads) {
  std::vector<std::string> out(v.size());
  parallel_for(v.size(), threads, 4096, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = normalize_token(v.token(i), rules);
  });
  return out;
}

}  // namespace

void NormalizationRules::validate() const {
  for (const auto& m : strip_markers) {
    if (m.empty()) throw ShapeError("normalization marker must be non-empty");
  }
}

std::string normalize_token(std::string_view token, const NormalizationRules& rules) {
  std::string s(token);
  if (rules.byte_level_decode) {
    if (auto decoded = text::byte_level_decode(s); decoded && text::is_valid_utf8(*decoded)) s = std::move(*decoded);
  }
  // Repeat until stable so that removing one marker cannot splice another
  // into existence (e.g. "#Ġ#"), which keeps normalization idempotent.
  for (;;) {
    const std::size_t before = s.size();
    for (const auto& m : rules.strip_markers) {
      if (!m.empty()) remove_all(s, m);
    }
    if (s.size() == before) break;
  }
  if (rules.trim_whitespace) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    s = s.substr(b, e - b);
  }
  return s;
}

OverlapMap compute_overlap(const Vocabulary& source, const Vocabulary& target, const NormalizationRules& rules,
                           unsigned threads) {
  rules.validate();
  if (source.size() == 0 || target.size() == 0) throw ShapeError("compute_overlap: empty vocabulary");

  const auto source_norm = normalize_all(source, rules, threads);
  const auto target_norm = normalize_all(target, rules, threads);

  // normalized form -> ascending source ids
  std::unordered_map<std::string_view, std::vector<std::uint32_t>> by_form;
  by_form.reserve(source.size());
  for (std::uint32_t sid = 0; sid < source.size(); ++sid) {
    if (!source_norm[sid].empty()) by_form[source_norm[sid]].push_back(sid);
  }

  std::vector<bool> consumed(source.size(), false);
  std::unordered_map<std::string_view, std::size_t> cursor;  // first possibly-unconsumed slot per form
  OverlapMap map;
  for (std::uint32_t tid = 0; tid < target.size(); ++tid) {
    const std::string& form = target_norm[tid];
    const auto it = form.empty() ? by_form.end() : by_form.find(form);
    if (it == by_form.end()) {
      map.nonshared_target.push_back(tid);
      continue;
    }
    const auto& ids = it->second;
    std::size_t& first = cursor[it->first];
    while (first < ids.size() && consumed[ids[first]]) ++first;
    if (first == ids.size()) {
      map.nonshared_target.push_back(tid);
      continue;
    }
    std::size_t available = 0;
    for (std::size_t k = first; k < ids.size() && available < 2; ++k) available += consumed[ids[k]] ? 0 : 1;

    std::uint32_t chosen = ids[first];
    if (const auto raw = source.find(target.token(tid)); raw && !consumed[*raw] && source_norm[*raw] == form) {
      chosen = *raw;
    }
    consumed[chosen] = true;
    if (available > 1) ++map.collisions;
    map.pairs.push_back({tid, chosen});
  }
  return map;
}

CoverageReport coverage_report(const OverlapMap& map, std::size_t target_vocab_size) {
  if (map.pairs.size() + map.nonshared_target.size() != target_vocab_size) {
    throw ShapeError("coverage_report: overlap map does not partition a vocabulary of size " +
                     std::to_string(target_vocab_size));
  }
  CoverageReport r;
  r.shared = map.pairs.size();
  r.nonshared = map.nonshared_target.size();
  r.collisions = map.collisions;
  r.coverage = target_vocab_size == 0 ? 0.0 : static_cast<double>(r.shared) / static_cast<double>(target_vocab_size);
  return r;
}

}  // namespace salt
