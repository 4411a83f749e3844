#include "forensics/pipeline.hpp"

#include <chrono>
#include <numeric>
#include <thread>

namespace forensics {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(CacheMode m) {
    switch (m) {
        case CacheMode::Off: return "off";
        case CacheMode::Record: return "record";
        case CacheMode::Replay: return "replay";
    }
    return "?";
}

std::optional<CacheMode> parse_cache_mode(std::string_view s) {
    if (s == "off") return CacheMode::Off;
    if (s == "record") return CacheMode::Record;
    if (s == "replay") return CacheMode::Replay;
    return std::nullopt;
}

void QueryConfig::validate() const {
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    prompt.validate();
    provider.validate();
    if (shots.k < 0 || static_cast<std::size_t>(shots.k) > shots.pool.size())
        throw KTooLarge("k=" + std::to_string(shots.k) + " exceeds exemplar pool size " +
                        std::to_string(shots.pool.size()));
}

DetectionScore score_rounds(std::string sample_id, const std::vector<Verdict>& verdicts) {
    DetectionScore s;
    s.sample_id = std::move(sample_id);
    s.per_round = verdicts;
    s.rounds_total = static_cast<int>(verdicts.size());
    int yes = 0;
    for (Verdict v : verdicts) {
        if (v == Verdict::Reject) ++s.rounds_rejected;
        if (v == Verdict::Yes) ++yes;
    }
    const int answered = s.rounds_total - s.rounds_rejected;
    if (answered > 0) s.score = static_cast<double>(yes) / answered;
    return s;
}

double judge_final_percent(const std::array<double, 4>& sub_scores) {
    return std::accumulate(sub_scores.begin(), sub_scores.end(), 0.0) / 20.0 * 100.0;
}

JudgeScore make_judge_score(std::string sample_id, const JudgeSubScores& parsed) {
    JudgeScore j;
    j.sample_id = std::move(sample_id);
    j.sub_scores = parsed.scores;
    j.final_percent = judge_final_percent(parsed.scores);
    j.diagnostics = parsed.diagnostics;
    return j;
}

// ---------------------------------------------------------------- cache

ResponseCache::ResponseCache(fs::path path, CacheMode mode) : path_(std::move(path)), mode_(mode) {
    if (mode_ == CacheMode::Off) return;
    if (mode_ == CacheMode::Replay && !fs::is_regular_file(path_))
        throw ConfigError("replay cache not found: " + path_.string());
    if (fs::is_regular_file(path_)) {
        std::ifstream in(path_);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                auto j = json::parse(line);
                entries_[j.at("key").get<std::string>()] = j.at("response").get<RoundResponse>();
            } catch (const json::exception&) {
                // A torn final line from an interrupted run; the entry is re-queried.
            }
        }
    }
    if (mode_ == CacheMode::Record) {
        if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
        out_.open(path_, std::ios::app);
        if (!out_) throw ConfigError("cannot open cache for append: " + path_.string());
    }
}

std::string ResponseCache::make_key(const std::string& model_id, const std::string& prompt_hash,
                                    const std::string& image_hash, Stage stage, int round_index) {
    return sha256_hex(model_id + "\x1f" + prompt_hash + "\x1f" + image_hash + "\x1f" +
                      std::string(to_string(stage)) + "\x1f" + std::to_string(round_index));
}

std::optional<RoundResponse> ResponseCache::lookup(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::store(const std::string& key, const std::string& sample_id, Stage stage,
                          const RoundResponse& response) {
    if (mode_ != CacheMode::Record) return;
    std::lock_guard lock(mu_);
    if (!entries_.emplace(key, response).second) return;
    json j{{"key", key}, {"sample_id", sample_id}, {"stage", to_string(stage)}, {"response", response}};
    out_ << j.dump() << '\n';
    out_.flush();
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

// ---------------------------------------------------------------- usage

void Usage::add(const RoundResponse& r) {
    prompt_tokens += r.prompt_tokens;
    completion_tokens += r.completion_tokens;
    ++calls;
}

Usage& Usage::operator+=(const Usage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    calls += o.calls;
    return *this;
}

// ---------------------------------------------------------------- stages

StageRunner::StageRunner(Provider& provider, ResponseCache* cache, ImageEncoder encoder)
    : provider_(provider), cache_(cache), encoder_(std::move(encoder)) {}

RoundResponse StageRunner::query(const MessageSequence& messages, const ImageSample& sample,
                                 Stage stage, int round_index, const std::atomic<bool>* cancel) {
    std::string key;
    if (cache_ && cache_->mode() != CacheMode::Off) {
        std::string image_hash;
        if (!messages.empty() && !messages.back().images.empty() && messages.back().images[0].payload)
            image_hash = messages.back().images[0].payload->content_sha256;
        key = ResponseCache::make_key(provider_.model_id(), prompt_fingerprint(messages), image_hash,
                                      stage, round_index);
        if (auto hit = cache_->lookup(key)) {
            hit->round_index = round_index;
            return *hit;
        }
        if (cache_->mode() == CacheMode::Replay)
            throw ReplayMiss("no cached response for " + sample.id + " " +
                             std::string(to_string(stage)) + " round " + std::to_string(round_index));
    }
    RoundResponse r = provider_.complete({messages, sample, stage, round_index, cancel});
    if (!key.empty()) cache_->store(key, sample.id, stage, r);
    return r;
}

namespace {

bool is_round_failure(const Error& e) {
    const auto& k = e.kind();
    return k == "TransportError" || k == "UnscriptedRequest" || k == "ReplayMiss";
}

}  // namespace

DetectionScore StageRunner::detect(const ImageSample& sample, const QueryConfig& config,
                                   std::vector<RoundResponse>* responses,
                                   std::vector<std::string>* errors, const std::atomic<bool>* cancel) {
    const auto messages = build_prompt(config.prompt, config.shots, sample, encoder_);
    std::vector<Verdict> verdicts;
    verdicts.reserve(static_cast<std::size_t>(config.rounds));
    for (int round = 0; round < config.rounds; ++round) {
        try {
            auto r = query(messages, sample, Stage::Detect, round, cancel);
            verdicts.push_back(parse_verdict(r.raw_text));
            if (responses) responses->push_back(std::move(r));
        } catch (const Error& e) {
            if (!is_round_failure(e)) throw;
            verdicts.push_back(Verdict::Reject);
            if (errors) errors->push_back("detect round " + std::to_string(round) + ": " + e.kind() + ": " + e.what());
        }
    }
    return score_rounds(sample.id, verdicts);
}

AnalysisRecord StageRunner::analyze(const ImageSample& sample, const QueryConfig& config, int round_index,
                                    std::vector<RoundResponse>* responses, const std::atomic<bool>* cancel) {
    const auto messages = build_prompt(config.prompt, config.shots, sample, encoder_);
    auto r = query(messages, sample, Stage::Analyze, round_index, cancel);
    AnalysisRecord rec{parse_report(r.raw_text), r.raw_text, round_index};
    if (responses) responses->push_back(std::move(r));
    return rec;
}

JudgeScore StageRunner::judge_localization(const AnalysisReport& report, const ImageSample& sample,
                                           const QueryConfig& judge_config, int retries,
                                           std::vector<RoundResponse>* responses,
                                           const std::atomic<bool>* cancel) {
    if (sample.scope != Scope::Local || !sample.gt_path || !sample.mask_path)
        throw PreconditionError("localization judging needs a local forgery with gt and mask: " + sample.id);
    if (!report.has_location())
        throw PreconditionError("analysis report for " + sample.id + " has no location section");

    const auto messages = build_judge_prompt(judge_config.prompt, report.location_text(), sample, encoder_);
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        auto r = query(messages, sample, Stage::Judge, attempt, cancel);
        const std::string text = r.raw_text;
        if (responses) responses->push_back(std::move(r));
        try {
            return make_judge_score(sample.id, parse_judge_scores(text));
        } catch (const JudgeParseError& e) {
            last_error = e.what();
        }
    }
    throw JudgeParseError("judge output unparseable after " + std::to_string(retries + 1) +
                          " attempts for " + sample.id + ": " + last_error);
}

// ---------------------------------------------------------------- batch

namespace {

json detection_json(const DetectionScore& d) {
    json verdicts = json::array();
    for (Verdict v : d.per_round) verdicts.push_back(to_string(v));
    return json{{"score", d.score ? json(*d.score) : json("rejected")},
                {"rounds_total", d.rounds_total},
                {"rounds_rejected", d.rounds_rejected},
                {"per_round", verdicts}};
}

json usage_json(const Usage& u) {
    return json{{"prompt_tokens", u.prompt_tokens},
                {"completion_tokens", u.completion_tokens},
                {"calls", u.calls}};
}

json sample_json(const SampleRecord& s) {
    json j{{"usage", usage_json(s.usage)}, {"errors", s.errors}};
    if (s.detection) {
        j["detection"] = detection_json(*s.detection);
        j["detection"]["raw"] = s.raw_detect;
    }
    if (!s.analyses.empty()) {
        json arr = json::array();
        for (const auto& a : s.analyses)
            arr.push_back({{"round_index", a.round_index}, {"report", a.report}, {"raw", a.raw_text}});
        j["analyses"] = arr;
    }
    if (s.judge) {
        j["judge"] = {{"sub_scores", s.judge->sub_scores},
                      {"final_percent", s.judge->final_percent},
                      {"diagnostics", s.judge->diagnostics}};
    }
    return j;
}

}  // namespace

json to_json(const RunRecord& r) {
    json samples = json::object();
    for (const auto& [id, s] : r.samples) samples[id] = sample_json(s);
    json stages = json::array();
    if (r.stages.detect) stages.push_back("detect");
    if (r.stages.analyze) stages.push_back("analyze");
    if (r.stages.judge) stages.push_back("judge");
    return json{{"schema_version", kSchemaVersion},
                {"config", r.config},
                {"config_hash", r.config_hash},
                {"model_id", r.model_id},
                {"stages", stages},
                {"complete", r.complete},
                {"totals", usage_json(r.totals)},
                {"samples", samples}};
}

RunRecord run_batch(const Manifest& manifest, const RunPlan& plan, const StageSet& stages,
                    Provider& provider, Provider& judge_provider, ResponseCache* cache,
                    const ImageEncoder& encoder, const std::atomic<bool>* cancel,
                    const BatchHooks& hooks) {
    if (stages.detect || stages.analyze) plan.detect.validate();
    if (stages.analyze || stages.judge) plan.analyze.validate();
    if (stages.judge) plan.judge.validate();
    if (plan.workers < 1) throw ConfigError("workers must be >= 1");

    const auto started = std::chrono::steady_clock::now();
    RunRecord record;
    record.model_id = provider.model_id();
    record.stages = stages;

    StageRunner runner(provider, cache, encoder);
    StageRunner judge_runner(judge_provider, cache, encoder);

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr fatal;
    auto cancelled = [&] { return stop.load() || (cancel && cancel->load()); };

    // Local cancel flag that mirrors the caller's and the fatal-abort state.
    std::atomic<bool> abort_flag{false};
    auto worker = [&] {
        for (;;) {
            if (cancelled()) {
                abort_flag = true;
                return;
            }
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.entries.size()) return;
            const ImageSample& sample = manifest.entries[i];
            SampleRecord rec;
            rec.sample_id = sample.id;
            std::vector<RoundResponse> used;
            const std::atomic<bool>* flag = cancel;
            try {
                const bool needs_detect = stages.detect || (stages.analyze && !plan.force_analyze);
                if (needs_detect) {
                    std::vector<RoundResponse> detect_used;
                    rec.detection = runner.detect(sample, plan.detect, &detect_used, &rec.errors, flag);
                    for (const auto& r : detect_used) rec.raw_detect.push_back(r.raw_text);
                    used.insert(used.end(), detect_used.begin(), detect_used.end());
                }
                const bool flagged_fake = rec.detection && rec.detection->score &&
                                          *rec.detection->score >= plan.threshold;
                const bool wants_analysis = stages.analyze || stages.judge;
                if (wants_analysis && (plan.force_analyze || flagged_fake)) {
                    for (int round = 0; round < plan.analyze.rounds; ++round) {
                        try {
                            rec.analyses.push_back(runner.analyze(sample, plan.analyze, round, &used, flag));
                        } catch (const Error& e) {
                            if (e.kind() == "RateAbort" || e.kind() == "AuthMissing" || e.kind() == "ConfigError")
                                throw;
                            rec.errors.push_back("analyze round " + std::to_string(round) + ": " + e.kind() +
                                                 ": " + e.what());
                        }
                    }
                }
                if (stages.judge && !rec.analyses.empty() && sample.scope == Scope::Local) {
                    try {
                        rec.judge = judge_runner.judge_localization(rec.analyses.front().report, sample,
                                                                    plan.judge, plan.judge_retries, &used, flag);
                    } catch (const Error& e) {
                        if (e.kind() == "RateAbort" || e.kind() == "AuthMissing" || e.kind() == "ConfigError")
                            throw;
                        rec.errors.push_back("judge: " + e.kind() + ": " + e.what());
                    }
                }
            } catch (const RateAbort&) {
                abort_flag = true;
                return;  // cancelled mid-sample: nothing recorded, the cache stays consistent
            } catch (const AuthMissing&) {
                std::lock_guard lock(mu);
                if (!fatal) fatal = std::current_exception();
                stop = true;
                return;
            } catch (const ConfigError&) {
                std::lock_guard lock(mu);
                if (!fatal) fatal = std::current_exception();
                stop = true;
                return;
            } catch (const PreconditionError&) {
                std::lock_guard lock(mu);
                if (!fatal) fatal = std::current_exception();
                stop = true;
                return;
            } catch (const Error& e) {
                rec.errors.push_back(e.kind() + ": " + e.what());
            }
            if (cancel && cancel->load()) {
                // A round may have been refused by the cancel flag; drop the partial sample.
                abort_flag = true;
                return;
            }
            for (const auto& r : used) rec.usage.add(r);
            std::lock_guard lock(mu);
            record.totals += rec.usage;
            record.usage_log.insert(record.usage_log.end(), used.begin(), used.end());
            if (hooks.on_sample) hooks.on_sample(rec);
            record.samples.emplace(sample.id, std::move(rec));
        }
    };

    const int n_workers = std::max(1, std::min<int>(plan.workers, static_cast<int>(manifest.entries.size())));
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    record.complete = !abort_flag.load() && record.samples.size() == manifest.entries.size();
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return record;
}

}  // namespace forensics
