#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forensics/dataset.hpp"
#include "forensics/parse.hpp"
#include "forensics/prompts.hpp"
#include "forensics/provider.hpp"

namespace forensics {

enum class CacheMode { Off, Record, Replay };
std::string_view to_string(CacheMode m);
std::optional<CacheMode> parse_cache_mode(std::string_view s);

/// Per-stage query settings.
struct QueryConfig {
    int rounds = 5;
    PromptSpec prompt;
    ShotConfig shots;
    ProviderConfig provider;
    CacheMode cache_mode = CacheMode::Off;

    void validate() const;
};

/// Averaged Stage-1 decision. `score` is empty exactly when every round
/// was rejected.
struct DetectionScore {
    std::string sample_id;
    std::optional<double> score;
    int rounds_total = 0;
    int rounds_rejected = 0;
    std::vector<Verdict> per_round;

    bool rejected() const { return !score.has_value(); }
    bool operator==(const DetectionScore&) const = default;
};

/// #Yes / (#rounds - #rejected); Rejected when every round was rejected.
DetectionScore score_rounds(std::string sample_id, const std::vector<Verdict>& verdicts);

struct JudgeScore {
    std::string sample_id;
    std::array<double, 4> sub_scores{};
    double final_percent = 0.0;
    std::vector<std::string> diagnostics;
};

/// Sum of the four 0-5 sub-scores over the 20-point maximum, as a percentage.
double judge_final_percent(const std::array<double, 4>& sub_scores);
JudgeScore make_judge_score(std::string sample_id, const JudgeSubScores& parsed);

struct AnalysisRecord {
    AnalysisReport report;
    std::string raw_text;
    int round_index = 0;
};

/// Append-only JSONL store of raw responses keyed by
/// (model id, prompt hash, image content hash, stage, round index).
class ResponseCache {
public:
    /// Off: no file. Record: existing entries are loaded (resume) and new
    /// ones appended. Replay: file must exist; misses throw ReplayMiss.
    ResponseCache(std::filesystem::path path, CacheMode mode);

    static std::string make_key(const std::string& model_id, const std::string& prompt_hash,
                                const std::string& image_hash, Stage stage, int round_index);

    std::optional<RoundResponse> lookup(const std::string& key) const;
    void store(const std::string& key, const std::string& sample_id, Stage stage,
               const RoundResponse& response);

    CacheMode mode() const { return mode_; }
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    CacheMode mode_;
    mutable std::mutex mu_;
    std::map<std::string, RoundResponse> entries_;
    std::ofstream out_;
};

/// One sample's accumulated usage.
struct Usage {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::uint64_t calls = 0;
    void add(const RoundResponse& r);
    Usage& operator+=(const Usage& o);
};

/// Issues queries through a provider with optional caching; the unit that
/// detect/analyze/judge are built from.
class StageRunner {
public:
    StageRunner(Provider& provider, ResponseCache* cache, ImageEncoder encoder);

    RoundResponse query(const MessageSequence& messages, const ImageSample& sample, Stage stage,
                        int round_index, const std::atomic<bool>* cancel = nullptr);

    DetectionScore detect(const ImageSample& sample, const QueryConfig& config,
                          std::vector<RoundResponse>* responses = nullptr,
                          std::vector<std::string>* errors = nullptr,
                          const std::atomic<bool>* cancel = nullptr);

    AnalysisRecord analyze(const ImageSample& sample, const QueryConfig& config, int round_index = 0,
                           std::vector<RoundResponse>* responses = nullptr,
                           const std::atomic<bool>* cancel = nullptr);

    /// Retries the judge call up to `retries` extra times on JudgeParseError.
    JudgeScore judge_localization(const AnalysisReport& report, const ImageSample& sample,
                                  const QueryConfig& judge_config, int retries = 2,
                                  std::vector<RoundResponse>* responses = nullptr,
                                  const std::atomic<bool>* cancel = nullptr);

    Provider& provider() { return provider_; }
    const ImageEncoder& encoder() const { return encoder_; }

private:
    Provider& provider_;
    ResponseCache* cache_;
    ImageEncoder encoder_;
};

struct StageSet {
    bool detect = true;
    bool analyze = false;
    bool judge = false;
};

struct RunPlan {
    QueryConfig detect;
    QueryConfig analyze;
    QueryConfig judge;
    int workers = 4;
    double threshold = 0.5;
    bool force_analyze = false;
    int judge_retries = 2;
};

struct SampleRecord {
    std::string sample_id;
    std::optional<DetectionScore> detection;
    std::vector<std::string> raw_detect;
    std::vector<AnalysisRecord> analyses;
    std::optional<JudgeScore> judge;
    Usage usage;
    std::vector<std::string> errors;
};

struct RunRecord {
    nlohmann::json config;  // serialized run configuration
    std::string config_hash;
    std::string model_id;
    StageSet stages;
    std::map<std::string, SampleRecord> samples;  // keyed by sample id
    Usage totals;
    bool complete = false;
    double wall_seconds = 0.0;  // excluded from the JSON form
    std::vector<RoundResponse> usage_log;  // every response consumed, in no particular order
};

nlohmann::json to_json(const RunRecord& r);

/// Callbacks from the worker pool; used by tests and the CLI.
struct BatchHooks {
    std::function<void(const SampleRecord&)> on_sample;
};

/// Runs the requested stages over the manifest with a bounded worker pool.
/// Analysis is issued only for samples whose Stage-1 score reaches the
/// threshold unless `force_analyze`. Per-sample failures are recorded;
/// configuration errors (AuthMissing, ConfigError) abort.
RunRecord run_batch(const Manifest& manifest, const RunPlan& plan, const StageSet& stages,
                    Provider& provider, Provider& judge_provider, ResponseCache* cache,
                    const ImageEncoder& encoder, const std::atomic<bool>* cancel = nullptr,
                    const BatchHooks& hooks = {});

}  // namespace forensics
