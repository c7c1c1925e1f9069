#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "salt/overlap.hpp"
#include "salt/transfer.hpp"

namespace salt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// File-backed run configuration. Relative paths in a config file resolve
// against the file's directory; command-line flags always win over file values.
struct RunConfig {
  std::optional<std::filesystem::path> source_embedding;
  std::optional<std::filesystem::path> source_vocab;
  std::optional<std::filesystem::path> target_embedding;
  std::optional<std::filesystem::path> target_vocab;
  std::optional<std::filesystem::path> aux_vectors;
  std::optional<std::filesystem::path> aux_bundle;
  std::optional<std::filesystem::path> head_source;
  std::optional<std::filesystem::path> output_embedding;
  std::optional<std::filesystem::path> output_head;
  std::optional<std::filesystem::path> report_json;
  std::optional<std::filesystem::path> nearest_dump;
  TransferConfig transfer;
  NormalizationRules rules;
};

// Throws FormatError on unknown keys or ill-typed values.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Entry point shared by the binary and the tests. Results go to `out`,
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace salt::cli
