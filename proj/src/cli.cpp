#include "salt/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "salt/auxembed.hpp"
#include "salt/error.hpp"
#include "salt/report.hpp"
#include "salt/validate.hpp"

namespace salt::cli {
namespace fs = std::filesystem;
namespace {

template <typename T>
T get_as(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config key '" + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_rules(const nlohmann::json& doc, NormalizationRules& rules) {
  if (!doc.is_object()) throw FormatError("config key 'normalization' must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "strip_markers") rules.strip_markers = get_as<std::vector<std::string>>(value, key);
    else if (key == "trim_whitespace") rules.trim_whitespace = get_as<bool>(value, key);
    else if (key == "byte_level_decode") rules.byte_level_decode = get_as<bool>(value, key);
    else throw FormatError("unknown config key 'normalization." + key + "'");
  }
}

void require_input(const std::optional<fs::path>& p, const char* what) {
  if (!p) throw UsageError(std::string("missing required input: ") + what);
  if (!fs::is_regular_file(*p)) throw IoError(std::string(what) + " not found: " + p->string());
}

void require_output_dir(const std::optional<fs::path>& p, const char* what) {
  if (!p) return;
  const fs::path dir = p->has_parent_path() ? p->parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw IoError(std::string(what) + " directory does not exist: " + dir.string());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, [&](std::ostream& o) { o << text; });
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, const std::string& level) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto logger = std::make_shared<spdlog::logger>("salt", sink);
  logger->set_pattern("[%l] %v");
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") throw UsageError("unknown log level '" + level + "'");
  logger->set_level(lvl);
  return logger;
}

struct Flags {
  std::string config;
  std::string method;
  double rcond = 0;
  bool tied = false;
  bool untied = false;
  std::uint32_t min_pairs = 0;
  std::size_t block_size = 0;
  std::string source_embedding, source_vocab, target_embedding, target_vocab, aux_vectors, aux_bundle, head_source;
  std::string output_embedding, output_head, report_json, nearest_dump;
  std::vector<std::string> strip_markers;
  bool no_markers = false;
  bool trim = true;
  bool byte_level = false;
};

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string log_level = "info";
};

void add_path_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--source-embedding", f.source_embedding, "SALTEMB1 source embedding");
  sub->add_option("--source-vocab", f.source_vocab, "JSON source vocabulary");
  sub->add_option("--target-embedding", f.target_embedding, "SALTEMB1 target embedding");
  sub->add_option("--target-vocab", f.target_vocab, "JSON target vocabulary");
  sub->add_option("--aux-vectors", f.aux_vectors, "word-vector text file");
  sub->add_option("--aux-bundle", f.aux_bundle, "subword n-gram bundle");
  sub->add_option("--head-source", f.head_source, "untied source LM head as |V_s| x h_s rows");
  sub->add_option("--output-embedding", f.output_embedding, "transferred embedding output");
  sub->add_option("--output-head", f.output_head, "LM head output (h_s x |V_t|)");
  sub->add_option("--report-json", f.report_json, "report path (default: stdout)");
  sub->add_option("--dump-nearest", f.nearest_dump, "JSON-lines dump of nearest sets");
}

void add_rule_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--strip-marker", f.strip_markers, "marker to strip (repeatable; replaces defaults)");
  sub->add_flag("--no-strip-markers", f.no_markers, "strip no markers");
  sub->add_option("--trim-whitespace", f.trim, "trim surrounding whitespace (true/false)");
  sub->add_flag("--byte-level-decode", f.byte_level, "decode byte-level BPE characters first");
}

bool given(const CLI::App* sub, const char* name) { return sub->get_option(name)->count() > 0; }

void apply_flags(const CLI::App* sub, const Flags& f, const Globals& g, const CLI::App& app, RunConfig& rc) {
  auto path = [&](const char* name, const std::string& value, std::optional<fs::path>& slot) {
    if (sub->get_option_no_throw(name) != nullptr && given(sub, name)) slot = fs::path(value);
  };
  path("--source-embedding", f.source_embedding, rc.source_embedding);
  path("--source-vocab", f.source_vocab, rc.source_vocab);
  path("--target-embedding", f.target_embedding, rc.target_embedding);
  path("--target-vocab", f.target_vocab, rc.target_vocab);
  path("--aux-vectors", f.aux_vectors, rc.aux_vectors);
  path("--aux-bundle", f.aux_bundle, rc.aux_bundle);
  path("--head-source", f.head_source, rc.head_source);
  path("--output-embedding", f.output_embedding, rc.output_embedding);
  path("--output-head", f.output_head, rc.output_head);
  path("--report-json", f.report_json, rc.report_json);
  path("--dump-nearest", f.nearest_dump, rc.nearest_dump);
  auto has = [&](const char* name) { return sub->get_option_no_throw(name) != nullptr && given(sub, name); };
  if (has("--method")) rc.transfer.method = parse_method(f.method);
  if (has("--rcond")) rc.transfer.rcond = f.rcond;
  if (has("--min-pairs")) rc.transfer.min_pairs = f.min_pairs;
  if (has("--block-size")) rc.transfer.block_size = f.block_size;
  if (has("--tied-head")) rc.transfer.tied_head = true;
  if (has("--untied-head")) rc.transfer.tied_head = false;
  if (has("--strip-marker")) rc.rules.strip_markers = f.strip_markers;
  if (has("--no-strip-markers")) rc.rules.strip_markers.clear();
  if (has("--trim-whitespace")) rc.rules.trim_whitespace = f.trim;
  if (has("--byte-level-decode")) rc.rules.byte_level_decode = true;
  if (app.get_option("--seed")->count() > 0) rc.transfer.seed = g.seed;
  if (app.get_option("--threads")->count() > 0) rc.transfer.threads = g.threads;
}

void emit(const nlohmann::json& doc, const std::optional<fs::path>& path, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (path) {
    write_text_atomic(*path, text);
  } else {
    out << text;
  }
}

int cmd_transfer(RunConfig rc, std::ostream& out) {
  rc.transfer.validate();
  rc.rules.validate();
  const Method method = rc.transfer.method;
  require_input(rc.source_embedding, "source_embedding");
  require_input(rc.source_vocab, "source_vocab");
  require_input(rc.target_vocab, "target_vocab");
  if (method == Method::salt) require_input(rc.target_embedding, "target_embedding");
  if (method != Method::multivariate) require_input(rc.aux_vectors, "aux_vectors");
  if (rc.aux_bundle) require_input(rc.aux_bundle, "aux_bundle");
  if (!rc.transfer.tied_head) require_input(rc.head_source, "head_source");
  if (!rc.output_embedding) throw UsageError("missing required output: output_embedding");
  require_output_dir(rc.output_embedding, "output_embedding");
  require_output_dir(rc.output_head, "output_head");
  require_output_dir(rc.report_json, "report_json");
  require_output_dir(rc.nearest_dump, "nearest_dump");

  spdlog::info("loading source {}", rc.source_embedding->string());
  const EmbeddingMatrix es = read_embedding(*rc.source_embedding);
  const Vocabulary vs = read_vocabulary(*rc.source_vocab);
  const Vocabulary vt = read_vocabulary(*rc.target_vocab);
  std::optional<EmbeddingMatrix> et;
  if (method == Method::salt) et = read_embedding(*rc.target_embedding);
  std::optional<AuxiliaryEmbeddings> aux;
  if (method != Method::multivariate) {
    aux = load_vec_text(*rc.aux_vectors);
    if (rc.aux_bundle) aux->set_bundle(read_subword_bundle(*rc.aux_bundle));
  }
  std::optional<EmbeddingMatrix> head_source;
  if (!rc.transfer.tied_head) head_source = read_embedding(*rc.head_source);

  TransferInputs in;
  in.source_embedding = &es;
  in.source_vocab = &vs;
  in.target_embedding = et ? &*et : nullptr;
  in.target_vocab = &vt;
  in.aux = aux ? &*aux : nullptr;
  in.rules = rc.rules;

  spdlog::info("planning transfer: |V_s|={} |V_t|={} method={}", vs.size(), vt.size(), method_name(method));
  const TransferPlan plan =
      plan_transfer(vs, vt, method == Method::multivariate ? nullptr : in.aux, rc.rules, rc.transfer);
  const TransferResult result = run_transfer(in, rc.transfer, &plan);
  std::optional<EmbeddingMatrix> head;
  if (rc.output_head || !rc.transfer.tied_head) {
    head = make_head(result.embedding, head_source ? &*head_source : nullptr, in, rc.transfer, &plan);
  }
  spdlog::info("copied={} solved={} fallback={}", result.report.copied, result.report.solved, result.report.fallback);

  // Everything is computed before the first output is written.
  write_embedding(result.embedding, *rc.output_embedding);
  if (head && rc.output_head) write_embedding(*head, *rc.output_head);
  if (rc.nearest_dump) {
    write_file_atomic(*rc.nearest_dump, [&](std::ostream& o) { write_nearest_sets_jsonl(plan.nearest, o); });
  }
  emit(to_json(result.report), rc.report_json, out);
  return kExitOk;
}

int cmd_overlap(RunConfig rc, std::ostream& out) {
  rc.rules.validate();
  require_input(rc.source_vocab, "source_vocab");
  require_input(rc.target_vocab, "target_vocab");
  const Vocabulary vs = read_vocabulary(*rc.source_vocab);
  const Vocabulary vt = read_vocabulary(*rc.target_vocab);
  const OverlapMap map = compute_overlap(vs, vt, rc.rules, rc.transfer.threads);
  out << to_json(coverage_report(map, vt.size())).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw FormatError("run config must be a JSON object");
  RunConfig rc;
  static const std::vector<std::pair<const char*, std::optional<fs::path> RunConfig::*>> kPaths{
      {"source_embedding", &RunConfig::source_embedding}, {"source_vocab", &RunConfig::source_vocab},
      {"target_embedding", &RunConfig::target_embedding}, {"target_vocab", &RunConfig::target_vocab},
      {"aux_vectors", &RunConfig::aux_vectors},           {"aux_bundle", &RunConfig::aux_bundle},
      {"head_source", &RunConfig::head_source},           {"output_embedding", &RunConfig::output_embedding},
      {"output_head", &RunConfig::output_head},           {"report_json", &RunConfig::report_json},
      {"nearest_dump", &RunConfig::nearest_dump}};
  for (const auto& [key, value] : doc.items()) {
    bool matched = false;
    for (const auto& [name, member] : kPaths) {
      if (key == name) {
        if (!value.is_null()) rc.*member = resolve(base_dir, get_as<std::string>(value, key));
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (key == "method") rc.transfer.method = parse_method(get_as<std::string>(value, key));
    else if (key == "seed") rc.transfer.seed = get_as<std::uint64_t>(value, key);
    else if (key == "rcond") rc.transfer.rcond = get_as<double>(value, key);
    else if (key == "tied_head") rc.transfer.tied_head = get_as<bool>(value, key);
    else if (key == "min_pairs") rc.transfer.min_pairs = get_as<std::uint32_t>(value, key);
    else if (key == "threads") rc.transfer.threads = get_as<unsigned>(value, key);
    else if (key == "block_size") rc.transfer.block_size = get_as<std::size_t>(value, key);
    else if (key == "normalization") parse_rules(value, rc.rules);
    else throw FormatError("unknown config key '" + key + "'");
  }
  return rc;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": malformed JSON: " + e.what());
  }
  try {
    return parse_run_config(doc, path.parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vocabulary embedding transfer: semantic candidate selection + per-token least squares", "salt"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed for fallback/multivariate sampling");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|err|critical|off");

  Flags f;
  auto* transfer = app.add_subcommand("transfer", "transfer target-vocabulary embeddings into the source space");
  transfer->add_option("--config", f.config, "JSON run config");
  transfer->add_option("--method", f.method, "salt|focus|multivariate");
  transfer->add_option("--rcond", f.rcond, "pseudo-inverse cutoff ratio");
  transfer->add_option("--min-pairs", f.min_pairs, "minimum nearest-set size to solve");
  transfer->add_option("--block-size", f.block_size, "queries per similarity block");
  transfer->add_flag("--tied-head", f.tied, "head is the transposed embedding");
  transfer->add_flag("--untied-head", f.untied, "transfer the head from --head-source");
  add_path_flags(transfer, f);
  add_rule_flags(transfer, f);

  auto* overlap = app.add_subcommand("overlap", "print the vocabulary coverage report");
  overlap->add_option("--config", f.config, "JSON run config");
  overlap->add_option("--source-vocab", f.source_vocab, "JSON source vocabulary");
  overlap->add_option("--target-vocab", f.target_vocab, "JSON target vocabulary");
  add_rule_flags(overlap, f);

  std::string spec_path, instance_dir;
  auto* validate = app.add_subcommand("validate", "run all methods on a planted synthetic instance");
  validate->add_option("--spec", spec_path, "SyntheticSpec JSON")->required();
  validate->add_option("--write-instance", instance_dir, "also write the generated inputs to this directory");

  std::string before, after, ids_before, ids_after;
  auto* stats = app.add_subcommand("stats", "embedding parameter and tokenized-length footprint");
  stats->add_option("--before", before, "embedding before transfer")->required();
  stats->add_option("--after", after, "embedding after transfer")->required();
  stats->add_option("--ids-before", ids_before, "SALTIDS1 corpus under the original tokenizer");
  stats->add_option("--ids-after", ids_after, "SALTIDS1 corpus under the target tokenizer");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("salt");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitUsage;
  }

  auto previous = spdlog::default_logger();
  try {
    spdlog::set_default_logger(make_logger(err, g.log_level));
    int code = kExitOk;
    if (transfer->parsed() || overlap->parsed()) {
      CLI::App* sub = transfer->parsed() ? transfer : overlap;
      if (f.tied && f.untied) throw UsageError("--tied-head and --untied-head are mutually exclusive");
      RunConfig rc = f.config.empty() ? RunConfig{} : load_run_config(f.config);
      apply_flags(sub, f, g, app, rc);
      code = transfer->parsed() ? cmd_transfer(std::move(rc), out) : cmd_overlap(std::move(rc), out);
    } else if (validate->parsed()) {
      std::ifstream in(spec_path);
      if (!in) throw IoError("spec not found: " + spec_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(spec_path + ": malformed JSON: " + e.what());
      }
      SyntheticSpec spec = spec_from_json(doc);
      if (app.get_option("--seed")->count() > 0) spec.seed = g.seed;
      const SyntheticInstance inst = generate_instance(spec);
      if (!instance_dir.empty()) write_instance(inst, instance_dir);
      TransferConfig tc;
      tc.threads = g.threads;
      tc.seed = spec.seed;
      const ValidationResult v = run_validation(inst, tc);
      nlohmann::json doc_out = to_json(v);
      doc_out["spec"] = to_json(spec);
      out << doc_out.dump(2) << "\n";
    } else if (stats->parsed()) {
      std::optional<IdStream> ib, ia;
      if (ids_before.empty() != ids_after.empty()) throw UsageError("--ids-before and --ids-after go together");
      if (!ids_before.empty()) {
        ib = read_id_stream(ids_before);
        ia = read_id_stream(ids_after);
      }
      const FootprintReport r = footprint_report(read_embedding_shape(before), read_embedding_shape(after), ib, ia);
      out << to_json(r).dump(2) << "\n";
    }
    spdlog::set_default_logger(previous);
    return code;
  } catch (const UsageError& e) {
    spdlog::set_default_logger(previous);
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::set_default_logger(previous);
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace salt::cli
