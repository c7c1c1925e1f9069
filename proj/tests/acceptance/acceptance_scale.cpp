// Scale acceptance: full transfer at 256k source / 64k target / h=2048 / aux 300,
// then the footprint report on the resulting files.
#include <fcntl.h>
#include <spawn.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "harness.hpp"
#include "json.hpp"
#include "salt/auxembed.hpp"
#include "salt/tensorio.hpp"

namespace fs = std::filesystem;
using acceptance::fmt;
using acceptance::Stopwatch;
using acceptance::Tally;

extern char** environ;

namespace {

constexpr std::uint32_t kSourceVocab = 256000;
constexpr std::uint32_t kTargetVocab = 64000;
constexpr std::uint32_t kHidden = 2048;
constexpr std::uint32_t kAuxDim = 300;
constexpr std::uint32_t kShared = 32000;
constexpr std::uint32_t kClusters = 500;

static_assert(std::endian::native == std::endian::little, "generator writes host-order floats");

// Streams a SALTEMB1 matrix of N(0, scale) values without holding it in memory.
void write_random_embedding(const fs::path& path, std::uint32_t rows, std::uint32_t cols, double scale,
                            std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  out.write("SALTEMB1", 8);
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, static_cast<float>(scale));
  std::vector<float> row(cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (float& v : row) v = d(rng);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(cols * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string token(const char* prefix, std::uint32_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06u", prefix, i);
  return buf;
}

void generate(const fs::path& dir) {
  std::vector<std::string> source(kSourceVocab), target(kTargetVocab);
  for (std::uint32_t i = 0; i < kSourceVocab; ++i) source[i] = "\xE2\x96\x81" + token("w", i);
  // Shared target tokens name every 8th source word; the rest are target-only.
  for (std::uint32_t i = 0; i < kShared; ++i) target[i] = token("w", 8 * i);
  for (std::uint32_t i = kShared; i < kTargetVocab; ++i) target[i] = token("t", i);
  salt::write_vocabulary(salt::Vocabulary(source), dir / "source.vocab.json");
  salt::write_vocabulary(salt::Vocabulary(target), dir / "target.vocab.json");

  write_random_embedding(dir / "source.emb", kSourceVocab, kHidden, 0.02, 11);
  write_random_embedding(dir / "target.emb", kTargetVocab, kHidden, 0.05, 12);

  // Aux vectors: every token sits near one of kClusters unit centers. One in
  // fifty target-only tokens has no vector and takes the fallback path.
  std::mt19937_64 rng(13);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<std::vector<float>> centers(kClusters, std::vector<float>(kAuxDim));
  for (auto& c : centers) {
    double norm = 0;
    for (float& v : c) {
      v = d(rng);
      norm += double(v) * v;
    }
    for (float& v : c) v = static_cast<float>(v / std::sqrt(norm));
  }
  std::vector<std::pair<std::string, std::vector<float>>> words;
  words.reserve(kTargetVocab);
  for (std::uint32_t i = 0; i < kTargetVocab; ++i) {
    if (i >= kShared && i % 50 == 0) continue;
    std::vector<float> v = centers[i % kClusters];
    for (float& x : v) x += 0.01f * d(rng);
    words.emplace_back(target[i], std::move(v));
  }
  salt::write_vec_text(words, kAuxDim, dir / "aux.vec");
}

struct ChildRun {
  int exit_code = -1;
  double seconds = 0;
  long max_rss_kb = 0;
};

ChildRun run_child(const std::vector<std::string>& args, const fs::path& stdout_path, const fs::path& stderr_path) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&fa, 2, stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  Stopwatch sw;
  pid_t pid;
  ChildRun r;
  if (posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ) != 0) {
    posix_spawn_file_actions_destroy(&fa);
    return r;
  }
  posix_spawn_file_actions_destroy(&fa);
  int status = 0;
  struct rusage ru {};
  wait4(pid, &status, 0, &ru);
  r.seconds = sw.seconds();
  r.max_rss_kb = ru.ru_maxrss;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string tail_of(const fs::path& p) {
  std::ifstream in(p);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return last;
}

}  // namespace

int main() {
  Tally tally;
  const char* bin = std::getenv("SALT_BIN");
  if (bin == nullptr) {
    tally.record(8, "scale target", false, "SALT_BIN not set");
    tally.record(9, "footprint arithmetic on the scale run", false, "SALT_BIN not set");
    return tally.exit_code();
  }
  const char* dir_env = std::getenv("SALT_SCALE_DIR");
  const fs::path dir = dir_env ? fs::path(dir_env) : fs::temp_directory_path() / "salt_scale";
  fs::create_directories(dir);

  Stopwatch gen;
  generate(dir);
  std::printf("generated inputs in %.1f s under %s\n", gen.seconds(), dir.c_str());
  std::fflush(stdout);

  const ChildRun run = run_child({bin, "--threads", "0", "transfer", "--source-embedding", (dir / "source.emb").string(),
                                  "--source-vocab", (dir / "source.vocab.json").string(), "--target-embedding",
                                  (dir / "target.emb").string(), "--target-vocab",
                                  (dir / "target.vocab.json").string(), "--aux-vectors", (dir / "aux.vec").string(),
                                  "--output-embedding", (dir / "out.emb").string(), "--report-json",
                                  (dir / "report.json").string()},
                                 dir / "transfer.out", dir / "transfer.log");
  const double rss_gb = static_cast<double>(run.max_rss_kb) / (1024.0 * 1024.0);
  std::string counts = "no report";
  bool accounting = false;
  if (run.exit_code == 0) {
    std::ifstream in(dir / "report.json");
    const auto rep = nlohmann::json::parse(in);
    const auto copied = rep["copied"].get<std::uint64_t>(), solved = rep["solved"].get<std::uint64_t>(),
               fallback = rep["fallback"].get<std::uint64_t>();
    accounting = copied + solved + fallback == kTargetVocab;
    counts = "copied=" + std::to_string(copied) + " solved=" + std::to_string(solved) +
             " fallback=" + std::to_string(fallback) + " mean_pairs=" + fmt("%.1f", rep["mean_pairs"].get<double>());
  } else {
    counts = "exit " + std::to_string(run.exit_code) + ": " + tail_of(dir / "transfer.log");
  }
  const bool ok8 = run.exit_code == 0 && accounting && run.seconds <= 1800.0 && rss_gb <= 16.0;
  tally.record(8, "scale target", ok8,
               "256k x 2048 source, 64k target, aux 300: wall " + fmt("%.1f", run.seconds) +
                   " s (limit 1800 s), peak RSS " + fmt("%.2f", rss_gb) + " GB (limit 16 GB), " + counts + ", on " +
                   std::to_string(std::thread::hardware_concurrency()) + " hardware thread(s)");

  bool ok9 = false;
  std::string detail = "transfer did not produce an output";
  if (run.exit_code == 0) {
    const ChildRun stats = run_child({bin, "stats", "--before", (dir / "source.emb").string(), "--after",
                                      (dir / "out.emb").string()},
                                     dir / "stats.json", dir / "stats.log");
    if (stats.exit_code == 0) {
      std::ifstream in(dir / "stats.json");
      const auto r = nlohmann::json::parse(in);
      const auto pb = r["params_before"].get<std::uint64_t>(), pa = r["params_after"].get<std::uint64_t>();
      const double red = r["param_reduction_pct"].get<double>(), chg = r["param_change_pct"].get<double>();
      const double recomputed = 100.0 * static_cast<double>(pb - pa) / static_cast<double>(pb);
      ok9 = pb == 256000ull * 2048ull && pa == 64000ull * 2048ull && (pb - pa) * 4 == pb * 3 && red == 75.0 &&
            red == recomputed && chg == -red;
      detail = "params " + std::to_string(pb) + " -> " + std::to_string(pa) + ", reduction " + fmt("%.6f", red) +
               "% (recomputed " + fmt("%.6f", recomputed) + "%, exact 1 - 64k/256k = 75%)";
    } else {
      detail = "stats exited " + std::to_string(stats.exit_code);
    }
  }
  tally.record(9, "footprint arithmetic on the scale run", ok9, detail);

  if (dir_env == nullptr) fs::remove_all(dir);
  return tally.exit_code();
}
