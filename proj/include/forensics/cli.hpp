#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forensics/experiments.hpp"
#include "forensics/metrics.hpp"
#include "forensics/pipeline.hpp"

namespace forensics {

/// Everything a run needs. Paths are kept as written and resolved against
/// `base_dir` (the config file's directory, or the working directory for
/// flags), so the serialized config and its hash do not depend on where
/// the repository lives.
struct RunConfig {
    std::filesystem::path base_dir;
    std::string manifest;
    ProviderConfig provider;
    std::optional<ProviderConfig> judge_provider;  // defaults to `provider`
    std::string prompt_dir;
    int ladder_rank = 5;
    int k = 0;
    std::uint64_t seed = 0;
    std::string exemplar_pool;  // required when k > 0
    int rounds = 5;
    int analyze_rounds = 1;
    CacheMode cache_mode = CacheMode::Off;
    std::string cache_path;  // defaults to <out>/cache.jsonl
    std::string output_dir = "out";
    int workers = 4;
    double threshold = 0.5;
    int judge_retries = 2;
    std::optional<int> max_edge;
    bool force = false;
    std::vector<std::string> samples;  // restrict to these ids when non-empty

    std::filesystem::path resolve(const std::string& p) const;
    /// Checks ranges and file existence; throws ConfigError or MissingFile.
    void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Provenance form written into artifacts. Output placement (out dir,
/// cache mode and path, worker count) is left out: it does not change results.
nlohmann::json provenance_json(const RunConfig& c);
std::string config_hash(const RunConfig& c);

enum class Command { Detect, Analyze, Judge, Eval };
std::string_view to_string(Command c);

/// Hooks for tests: injected providers replace the configured ones.
struct CommandEnv {
    Provider* provider = nullptr;
    Provider* judge_provider = nullptr;
    const std::atomic<bool>* cancel = nullptr;
    BatchHooks hooks;
    std::ostream* log = nullptr;
};

struct CommandResult {
    int exit_code = 0;
    RunRecord record;
    std::optional<MetricsSummary> summary;
    std::filesystem::path out_dir;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int auth = 3;
inline constexpr int runtime = 4;
inline constexpr int interrupted = 130;
}  // namespace exit_code

/// Runs one pipeline subcommand and writes run_record.json, metrics.json,
/// roc.csv, report.md and timing.json under the output directory. Errors
/// are written to error.json and mapped to a nonzero exit code instead of
/// being thrown.
CommandResult run_command(Command cmd, const RunConfig& config, const CommandEnv& env = {});

/// Runs a ladder or k-shot plan and writes <kind>.csv / <kind>.json; cells
/// finished in an earlier invocation are read back from cells.jsonl.
int cmd_ablate(const RunConfig& config, const std::filesystem::path& plan_path,
               const CommandEnv& env = {});

/// Markdown rendering: one section per sample with verdict, score, the
/// four analysis fields and judge scores.
std::string render_report(const RunRecord& record, const Manifest& manifest,
                          const MetricsSummary& summary);

void write_error_json(const std::filesystem::path& out_dir, const std::string& kind,
                      const std::string& message, const std::string& config_hash);

/// Overwrites `path` with `text`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace forensics
