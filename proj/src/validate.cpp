#include "salt/validate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "salt/baselines.hpp"
#include "salt/error.hpp"

namespace salt {
namespace {

// Independent normal streams for the generator, all keyed like the fallback sampler.
enum Stream : std::uint64_t {
  kPermTarget = 1,
  kPermSource,
  kCenters,
  kAuxNoise,
  kTargetEmb,
  kPlanted,
  kSourceNoise,
  kSourceOnly,
};

double gauss(const SyntheticSpec& s, Stream stream, std::uint64_t a, std::uint64_t b) {
  return keyed_normal(s.seed * 0x100000001b3ull + stream, a, b);
}

std::vector<std::uint32_t> keyed_permutation(std::size_t n, const SyntheticSpec& s, Stream stream) {
  std::vector<std::pair<double, std::uint32_t>> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = {gauss(s, stream, i, 0), static_cast<std::uint32_t>(i)};
  std::sort(keys.begin(), keys.end());
  std::vector<std::uint32_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = keys[i].second;
  return perm;
}

std::string tok_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                       static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

bool read_u32s(std::istream& in, std::vector<std::uint32_t>& out, std::size_t count) {
  std::vector<unsigned char> raw(count * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) return false;
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = raw.data() + i * 4;
    out[i] = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  return true;
}

}  // namespace

std::size_t SyntheticSpec::shared_count() const {
  return static_cast<std::size_t>(std::llround(overlap_ratio * static_cast<double>(vt_size)));
}

std::size_t SyntheticSpec::effective_cluster_size() const {
  return cluster_size != 0 ? cluster_size : std::max<std::size_t>(h_t + h_t / 2, 4);
}

void SyntheticSpec::validate() const {
  if (h_s < 2 || h_t < 2 || aux_dim < 2) throw ShapeError("synthetic spec: dimensions must be >= 2");
  if (!(overlap_ratio > 0.0 && overlap_ratio <= 1.0)) throw ShapeError("synthetic spec: overlap_ratio must be in (0, 1]");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ShapeError("synthetic spec: noise_std must be >= 0");
  const std::size_t shared = shared_count();
  if (shared < 1) throw ShapeError("synthetic spec: overlap_ratio * vt_size must be >= 1");
  if (vs_size < shared) throw ShapeError("synthetic spec: vs_size smaller than the shared token count");
  if (shared < vt_size && effective_cluster_size() > shared) {
    throw ShapeError("synthetic spec: cluster_size exceeds the shared token count");
  }
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("synthetic spec: expected a JSON object");
  SyntheticSpec s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "vt_size") s.vt_size = value.get<std::size_t>();
      else if (key == "vs_size") s.vs_size = value.get<std::size_t>();
      else if (key == "h_s") s.h_s = value.get<std::size_t>();
      else if (key == "h_t") s.h_t = value.get<std::size_t>();
      else if (key == "aux_dim") s.aux_dim = value.get<std::size_t>();
      else if (key == "overlap_ratio") s.overlap_ratio = value.get<double>();
      else if (key == "noise_std") s.noise_std = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "cluster_size") s.cluster_size = value.get<std::size_t>();
      else throw FormatError("synthetic spec: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("synthetic spec: bad value for '" + key + "': " + e.what());
    }
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"vt_size", s.vt_size},     {"vs_size", s.vs_size},         {"h_s", s.h_s},
          {"h_t", s.h_t},             {"aux_dim", s.aux_dim},         {"overlap_ratio", s.overlap_ratio},
          {"noise_std", s.noise_std}, {"seed", s.seed},               {"cluster_size", s.cluster_size}};
}

std::vector<double> SyntheticInstance::truth_row(std::uint32_t target_id) const {
  std::vector<double> out(planted.cols(), 0.0);
  const auto e = target.row(target_id);
  for (std::size_t i = 0; i < planted.rows(); ++i) {
    const double ei = e[i];
    const auto w = planted.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += ei * static_cast<double>(w[j]);
  }
  return out;
}

SyntheticInstance generate_instance(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticInstance inst;
  inst.spec = spec;
  const std::size_t vt = spec.vt_size;
  const std::size_t vs = spec.vs_size;
  const std::size_t shared = spec.shared_count();

  // Target ids: the first `shared` of a keyed permutation are shared.
  const auto tperm = keyed_permutation(vt, spec, kPermTarget);
  std::vector<bool> is_shared(vt, false);
  for (std::size_t i = 0; i < shared; ++i) is_shared[tperm[i]] = true;
  for (std::uint32_t t = 0; t < vt; ++t) (is_shared[t] ? inst.shared_target : inst.nonshared_target).push_back(t);

  std::vector<std::string> ttoks(vt);
  for (std::size_t t = 0; t < vt; ++t) ttoks[t] = (t % 2 == 0 ? "\xC4\xA0" : "") + tok_name("tok", t);
  inst.target_vocab = Vocabulary(ttoks);

  // Source ids: shared tokens use the SentencePiece marker, the rest are source-only.
  const auto sperm = keyed_permutation(vs, spec, kPermSource);
  std::vector<std::string> stoks(vs);
  std::vector<std::int64_t> source_to_target(vs, -1);
  for (std::size_t i = 0; i < vs; ++i) {
    const std::uint32_t sid = sperm[i];
    if (i < shared) {
      const std::uint32_t tid = inst.shared_target[i];
      stoks[sid] = "\xE2\x96\x81" + tok_name("tok", tid);
      source_to_target[sid] = tid;
    } else {
      stoks[sid] = tok_name("src", i);
    }
  }
  inst.source_vocab = Vocabulary(stoks);

  // Target embedding and planted map.
  inst.target = EmbeddingMatrix(vt, spec.h_t);
  for (std::size_t t = 0; t < vt; ++t) {
    for (std::size_t j = 0; j < spec.h_t; ++j) inst.target(t, j) = static_cast<float>(gauss(spec, kTargetEmb, t, j));
  }
  inst.planted = EmbeddingMatrix(spec.h_t, spec.h_s);
  const double wscale = 1.0 / std::sqrt(static_cast<double>(spec.h_t));
  for (std::size_t i = 0; i < spec.h_t; ++i) {
    for (std::size_t j = 0; j < spec.h_s; ++j) {
      inst.planted(i, j) = static_cast<float>(wscale * gauss(spec, kPlanted, i, j));
    }
  }
  inst.source = EmbeddingMatrix(vs, spec.h_s);
  for (std::size_t sid = 0; sid < vs; ++sid) {
    auto row = inst.source.row(sid);
    if (source_to_target[sid] >= 0) {
      const auto truth = inst.truth_row(static_cast<std::uint32_t>(source_to_target[sid]));
      for (std::size_t j = 0; j < spec.h_s; ++j) {
        row[j] = static_cast<float>(truth[j] + spec.noise_std * gauss(spec, kSourceNoise, sid, j));
      }
    } else {
      for (std::size_t j = 0; j < spec.h_s; ++j) row[j] = static_cast<float>(gauss(spec, kSourceOnly, sid, j));
    }
  }

  // Aux clusters: unit centers with pairwise cosine below 0.8, members are
  // small perturbations of their center.
  const std::size_t clusters = std::max<std::size_t>(1, shared / spec.effective_cluster_size());
  std::vector<std::vector<double>> centers;
  for (std::uint64_t attempt = 0; centers.size() < clusters; ++attempt) {
    if (attempt > clusters * 10000) throw ShapeError("synthetic spec: cannot place separated aux cluster centers");
    std::vector<double> c(spec.aux_dim);
    double n2 = 0.0;
    for (std::size_t j = 0; j < spec.aux_dim; ++j) {
      c[j] = gauss(spec, kCenters, attempt, j);
      n2 += c[j] * c[j];
    }
    for (double& x : c) x /= std::sqrt(n2);
    const bool separated = std::all_of(centers.begin(), centers.end(), [&](const std::vector<double>& o) {
      return std::inner_product(o.begin(), o.end(), c.begin(), 0.0) < 0.8;
    });
    if (separated) centers.push_back(std::move(c));
  }
  auto aux_for = [&](std::uint32_t tid, std::size_t cluster) {
    std::vector<float> v(spec.aux_dim);
    for (std::size_t j = 0; j < spec.aux_dim; ++j) {
      v[j] = static_cast<float>(centers[cluster][j] + kClusterPerturbation * gauss(spec, kAuxNoise, tid, j));
    }
    return v;
  };
  NormalizationRules rules;
  inst.aux = AuxiliaryEmbeddings(spec.aux_dim);
  for (std::size_t i = 0; i < inst.shared_target.size(); ++i) {
    const std::uint32_t tid = inst.shared_target[i];
    inst.aux_words.emplace_back(normalize_token(ttoks[tid], rules), aux_for(tid, i % clusters));
  }
  for (std::size_t i = 0; i < inst.nonshared_target.size(); ++i) {
    const std::uint32_t tid = inst.nonshared_target[i];
    inst.aux_words.emplace_back(normalize_token(ttoks[tid], rules), aux_for(tid, i % clusters));
  }
  for (const auto& [w, v] : inst.aux_words) inst.aux.add_word(w, v);
  return inst;
}

void write_instance(const SyntheticInstance& inst, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_embedding(inst.source, dir / "source.emb");
  write_vocabulary(inst.source_vocab, dir / "source.vocab.json");
  write_embedding(inst.target, dir / "target.emb");
  write_vocabulary(inst.target_vocab, dir / "target.vocab.json");
  write_vec_text(inst.aux_words, inst.spec.aux_dim, dir / "aux.vec");
  write_embedding(inst.planted, dir / "planted_w.emb");
}

RecoveryMetrics evaluate_recovery(const SyntheticInstance& inst, const EmbeddingMatrix& output) {
  if (output.rows() != inst.spec.vt_size || output.cols() != inst.spec.h_s) {
    throw ShapeError("evaluate_recovery: output shape does not match the instance");
  }
  RecoveryMetrics m;
  double sum = 0.0;
  for (const std::uint32_t tid : inst.nonshared_target) {
    const auto truth = inst.truth_row(tid);
    const auto got = output.row(tid);
    double err2 = 0.0;
    double ref2 = 0.0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double d = static_cast<double>(got[j]) - truth[j];
      err2 += d * d;
      ref2 += truth[j] * truth[j];
    }
    const double rel = std::sqrt(err2) / std::max(std::sqrt(ref2), 1e-300);
    sum += rel;
    m.max_rel_error = std::max(m.max_rel_error, rel);
    ++m.rows;
  }
  if (m.rows > 0) m.mean_rel_error = sum / static_cast<double>(m.rows);
  return m;
}

ValidationResult run_validation(const SyntheticInstance& inst, const TransferConfig& config) {
  TransferInputs in;
  in.source_embedding = &inst.source;
  in.source_vocab = &inst.source_vocab;
  in.target_embedding = &inst.target;
  in.target_vocab = &inst.target_vocab;
  in.aux = &inst.aux;
  const TransferPlan plan = plan_transfer(inst.source_vocab, inst.target_vocab, &inst.aux, in.rules, config);
  auto outcome = [&](Method method) {
    TransferConfig c = config;
    c.method = method;
    const TransferResult r = run_transfer(in, c, &plan);
    MethodOutcome o;
    o.report = r.report;
    o.recovery = evaluate_recovery(inst, r.embedding);
    o.shared_rows_exact = std::all_of(plan.overlap.pairs.begin(), plan.overlap.pairs.end(), [&](const TokenPair& p) {
      const auto a = r.embedding.row(p.target_id);
      const auto b = inst.source.row(p.source_id);
      return std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
    });
    return o;
  };
  return {outcome(Method::salt), outcome(Method::focus), outcome(Method::multivariate)};
}

IdStream read_id_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kIdStreamMagic.data(), 8) != 0) {
    throw BadMagicError(path.string() + ": bad magic, expected SALTIDS1");
  }
  std::vector<std::uint32_t> count;
  if (!read_u32s(in, count, 1)) throw TruncatedError(path.string() + ": truncated sample count");
  if (count[0] == 0) throw FormatError(path.string() + ": id stream has no samples");
  IdStream s;
  if (!read_u32s(in, s.lengths, count[0])) throw TruncatedError(path.string() + ": truncated length table");
  const std::uint64_t total = std::accumulate(s.lengths.begin(), s.lengths.end(), std::uint64_t{0});
  const auto remaining = std::filesystem::file_size(path) - (8 + 4 + 4ull * count[0]);
  if (remaining < total * 4) throw TruncatedError(path.string() + ": truncated id payload");
  if (remaining > total * 4) throw FormatError(path.string() + ": trailing bytes after id payload");
  if (!read_u32s(in, s.ids, static_cast<std::size_t>(total))) {
    throw TruncatedError(path.string() + ": truncated id payload");
  }
  return s;
}

void write_id_stream(const IdStream& stream, const std::filesystem::path& path) {
  const std::uint64_t total = std::accumulate(stream.lengths.begin(), stream.lengths.end(), std::uint64_t{0});
  if (stream.lengths.empty()) throw ShapeError("id stream must have at least one sample");
  if (total != stream.ids.size()) throw ShapeError("id stream lengths do not sum to the id count");
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(kIdStreamMagic.data(), 8);
    write_u32(out, static_cast<std::uint32_t>(stream.lengths.size()));
    for (auto v : stream.lengths) write_u32(out, v);
    for (auto v : stream.ids) write_u32(out, v);
  });
}

double percent_change(std::uint64_t before, std::uint64_t after) {
  if (before == 0) throw ShapeError("percent_change: zero baseline");
  const double delta = after >= before ? static_cast<double>(after - before) : -static_cast<double>(before - after);
  return delta * 100.0 / static_cast<double>(before);
}

double mean_length(std::uint64_t tokens, std::uint64_t samples) {
  if (samples == 0) throw ShapeError("mean_length: no samples");
  return static_cast<double>(tokens) / static_cast<double>(samples);
}

FootprintReport footprint_report(const MatrixShape& before, const MatrixShape& after,
                                 const std::optional<IdStream>& ids_before, const std::optional<IdStream>& ids_after) {
  if (before.rows == 0 || before.cols == 0 || after.rows == 0 || after.cols == 0) {
    throw ShapeError("footprint_report: empty matrix shape");
  }
  if (ids_before.has_value() != ids_after.has_value()) {
    throw UsageError("footprint_report: id streams must be given for both tokenizers or neither");
  }
  FootprintReport r;
  r.vocab_before = before.rows;
  r.hidden_before = before.cols;
  r.vocab_after = after.rows;
  r.hidden_after = after.cols;
  r.params_before = r.vocab_before * r.hidden_before;
  r.params_after = r.vocab_after * r.hidden_after;
  r.param_change_pct = percent_change(r.params_before, r.params_after);
  r.param_reduction_pct = -r.param_change_pct;
  if (ids_before) {
    LengthFootprint l;
    l.samples_before = ids_before->lengths.size();
    l.tokens_before = ids_before->ids.size();
    l.samples_after = ids_after->lengths.size();
    l.tokens_after = ids_after->ids.size();
    l.mean_before = mean_length(l.tokens_before, l.samples_before);
    l.mean_after = mean_length(l.tokens_after, l.samples_after);
    l.length_change_pct = (l.mean_after - l.mean_before) * 100.0 / l.mean_before;
    l.length_reduction_pct = -l.length_change_pct;
    r.lengths = l;
  }
  return r;
}

nlohmann::json to_json(const RecoveryMetrics& m) {
  return {{"rows", m.rows}, {"mean_rel_error", m.mean_rel_error}, {"max_rel_error", m.max_rel_error}};
}

nlohmann::json to_json(const ValidationResult& v) {
  auto one = [](const MethodOutcome& o) {
    return nlohmann::json{{"report", to_json(o.report)},
                          {"recovery", to_json(o.recovery)},
                          {"shared_rows_exact", o.shared_rows_exact}};
  };
  return {{"salt", one(v.salt)}, {"focus", one(v.focus)}, {"multivariate", one(v.multivariate)}};
}

nlohmann::json to_json(const FootprintReport& r) {
  nlohmann::json j{{"vocab_before", r.vocab_before},       {"vocab_after", r.vocab_after},
                   {"hidden_before", r.hidden_before},     {"hidden_after", r.hidden_after},
                   {"params_before", r.params_before},     {"params_after", r.params_after},
                   {"param_change_pct", r.param_change_pct}, {"param_reduction_pct", r.param_reduction_pct}};
  if (r.lengths) {
    const auto& l = *r.lengths;
    j["lengths"] = {{"samples_before", l.samples_before},
                    {"tokens_before", l.tokens_before},
                    {"samples_after", l.samples_after},
                    {"tokens_after", l.tokens_after},
                    {"mean_before", l.mean_before},
                    {"mean_after", l.mean_after},
                    {"length_change_pct", l.length_change_pct},
                    {"length_reduction_pct", l.length_reduction_pct}};
  }
  return j;
}

}  // namespace salt
