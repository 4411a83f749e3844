#include "forensics/cli.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace forensics {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

fs::path RunConfig::resolve(const std::string& p) const {
    if (p.empty()) return {};
    fs::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path;
    return base_dir / path;
}

void RunConfig::validate() const {
    if (manifest.empty()) throw ConfigError("no manifest given");
    if (prompt_dir.empty()) throw ConfigError("no prompt directory given");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (analyze_rounds < 1) throw ConfigError("analyze_rounds must be >= 1");
    if (ladder_rank < 1 || ladder_rank > 5) throw ConfigError("ladder rank must be in 1..5");
    if (k < 0) throw ConfigError("k must be >= 0");
    if (k > 0 && exemplar_pool.empty()) throw ConfigError("k > 0 needs an exemplar pool");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in [0,1]");
    if (judge_retries < 0) throw ConfigError("judge_retries must be >= 0");
    if (max_edge && *max_edge < 1) throw ConfigError("max_edge must be positive");
    provider.validate();
    if (judge_provider) judge_provider->validate();
    if (!fs::is_regular_file(resolve(manifest))) throw MissingFile("manifest not found: " + resolve(manifest).string());
    if (!fs::is_directory(resolve(prompt_dir)))
        throw MissingFile("prompt directory not found: " + resolve(prompt_dir).string());
    if (provider.kind == ProviderKind::Mock && !fs::is_regular_file(resolve(provider.mock_script.string())))
        throw MissingFile("mock script not found: " + resolve(provider.mock_script.string()).string());
    if (cache_mode == CacheMode::Replay) {
        const fs::path cp = cache_path.empty() ? resolve(output_dir) / "cache.jsonl" : resolve(cache_path);
        if (!fs::is_regular_file(cp)) throw ConfigError("replay needs an existing cache: " + cp.string());
    }
}

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
    static const std::set<std::string> kKnown{
        "manifest", "provider", "judge_provider", "prompts", "rounds",   "analyze_rounds",
        "cache",    "cache_path", "out",          "workers", "threshold", "judge_retries",
        "max_edge", "force",    "samples"};
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kKnown.count(key)) throw ConfigError("unknown config field '" + key + "'");

    RunConfig c;
    c.base_dir = base_dir;
    try {
        c.manifest = j.value("manifest", c.manifest);
        if (j.contains("provider")) c.provider = j.at("provider").get<ProviderConfig>();
        if (j.contains("judge_provider")) c.judge_provider = j.at("judge_provider").get<ProviderConfig>();
        if (j.contains("prompts")) {
            const auto& p = j.at("prompts");
            c.prompt_dir = p.value("dir", c.prompt_dir);
            c.ladder_rank = p.value("ladder_rank", c.ladder_rank);
            c.k = p.value("k", c.k);
            c.seed = p.value("seed", c.seed);
            c.exemplar_pool = p.value("exemplar_pool", c.exemplar_pool);
        }
        c.rounds = j.value("rounds", c.rounds);
        c.analyze_rounds = j.value("analyze_rounds", c.analyze_rounds);
        if (j.contains("cache")) {
            auto m = parse_cache_mode(j.at("cache").get<std::string>());
            if (!m) throw ConfigError("unknown cache mode " + j.at("cache").dump());
            c.cache_mode = *m;
        }
        c.cache_path = j.value("cache_path", c.cache_path);
        c.output_dir = j.value("out", c.output_dir);
        c.workers = j.value("workers", c.workers);
        c.threshold = j.value("threshold", c.threshold);
        c.judge_retries = j.value("judge_retries", c.judge_retries);
        if (j.contains("max_edge") && !j.at("max_edge").is_null()) c.max_edge = j.at("max_edge").get<int>();
        c.force = j.value("force", c.force);
        c.samples = j.value("samples", c.samples);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw MissingFile("config not found: " + path.string());
    json j;
    try {
        j = json::parse(read_file_bytes(path.string()));
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

json provenance_json(const RunConfig& c) {
    json j{{"schema_version", kSchemaVersion},
           {"manifest", c.manifest},
           {"provider", c.provider},
           {"prompts",
            {{"dir", c.prompt_dir},
             {"ladder_rank", c.ladder_rank},
             {"k", c.k},
             {"seed", c.seed},
             {"exemplar_pool", c.exemplar_pool}}},
           {"rounds", c.rounds},
           {"analyze_rounds", c.analyze_rounds},
           {"threshold", c.threshold},
           {"judge_retries", c.judge_retries},
           {"force", c.force},
           {"samples", c.samples}};
    j["judge_provider"] = c.judge_provider ? json(*c.judge_provider) : json(nullptr);
    j["max_edge"] = c.max_edge ? json(*c.max_edge) : json(nullptr);
    // Content hashes tie the record to the exact inputs, not just their names.
    auto content_hash = [&](const std::string& p) -> json {
        const fs::path path = c.resolve(p);
        if (p.empty() || !fs::is_regular_file(path)) return nullptr;
        return sha256_hex(read_file_bytes(path.string()));
    };
    j["manifest_sha256"] = content_hash(c.manifest);
    j["mock_script_sha256"] =
        c.provider.kind == ProviderKind::Mock ? content_hash(c.provider.mock_script.string()) : json(nullptr);
    j["exemplar_pool_sha256"] = content_hash(c.exemplar_pool);
    return j;
}

std::string config_hash(const RunConfig& c) {
    return sha256_hex(provenance_json(c).dump()).substr(0, 16);
}

std::string_view to_string(Command c) {
    switch (c) {
        case Command::Detect: return "detect";
        case Command::Analyze: return "analyze";
        case Command::Judge: return "judge";
        case Command::Eval: return "eval";
    }
    return "?";
}

// ---------------------------------------------------------------- output

void write_text(const fs::path& path, const std::string& text) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    out << text;
}

void write_error_json(const fs::path& out_dir, const std::string& kind, const std::string& message,
                      const std::string& hash) {
    json j{{"schema_version", kSchemaVersion}, {"config_hash", hash}, {"error", kind}, {"message", message}};
    write_text(out_dir / "error.json", j.dump(2) + "\n");
}

namespace {

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v, int digits = 2) {
    return v ? fmt(*v, digits) : std::string("n/a");
}

std::string verdict_word(const DetectionScore& d, double threshold) {
    if (d.rejected()) return "Rejected";
    return *d.score >= threshold ? "Fake" : "Real";
}

std::string or_dash(const std::string& s) { return s.empty() ? "-" : s; }

}  // namespace

std::string render_report(const RunRecord& record, const Manifest& manifest, const MetricsSummary& summary) {
    const double threshold = record.config.value("threshold", 0.5);
    std::ostringstream md;
    md << "# Forensics report\n\n";
    md << "- schema_version: " << kSchemaVersion << "\n";
    md << "- config_hash: " << record.config_hash << "\n";
    md << "- model: " << record.model_id << "\n";
    md << "- complete: " << (record.complete ? "yes" : "no") << "\n\n";
    md << "| ACC % | AUC % | REJ % | samples | scored | rejected |\n";
    md << "|---|---|---|---|---|---|\n";
    md << "| " << fmt_opt(summary.acc) << " | " << fmt_opt(summary.auc) << " | " << fmt(summary.rej, 2) << " | "
       << summary.n_total << " | " << summary.n_scored << " | " << summary.n_rejected << " |\n";

    for (const auto& sample : manifest.entries) {
        auto it = record.samples.find(sample.id);
        if (it == record.samples.end()) continue;
        const SampleRecord& s = it->second;
        md << "\n## " << sample.id << "\n\n";
        md << "- ground truth: " << to_string(sample.label);
        if (sample.label == Label::Fake)
            md << " (" << to_string(sample.generator) << ", " << to_string(sample.scope) << ")";
        md << ", dataset " << sample.dataset_name << "\n";
        if (s.detection) {
            const auto& d = *s.detection;
            md << "- verdict: " << verdict_word(d, threshold);
            if (d.score) md << ", score " << fmt(*d.score, 3);
            md << " (";
            for (std::size_t i = 0; i < d.per_round.size(); ++i)
                md << (i ? ", " : "") << to_string(d.per_round[i]);
            md << ")\n";
        }
        for (const auto& a : s.analyses) {
            const auto& r = a.report;
            md << "\n### Analysis";
            if (s.analyses.size() > 1) md << " (round " << a.round_index << ")";
            md << "\n\n";
            md << "- **Location (absolute):** " << or_dash(r.location_absolute) << "\n";
            md << "- **Location (relative):** " << or_dash(r.location_relative) << "\n";
            md << "- **Contents:** " << or_dash(r.contents) << "\n";
            md << "- **Visible details:**";
            if (r.visible_details.empty()) md << " -";
            md << "\n";
            for (const auto& d : r.visible_details) md << "  - " << d << "\n";
            md << "- **Method and type:** " << to_string(r.method) << ", " << to_string(r.forgery_type) << "\n";
            for (const auto& d : r.diagnostics) md << "- diagnostic: " << d << "\n";
        }
        if (s.judge) {
            md << "\n### Localization judge\n\n| rubric | score |\n|---|---|\n";
            for (std::size_t i = 0; i < kRubricNames.size(); ++i)
                md << "| " << kRubricNames[i] << " | " << fmt(s.judge->sub_scores[i], 2) << " |\n";
            md << "| final % | " << fmt(s.judge->final_percent, 2) << " |\n";
        }
        if (!s.errors.empty()) {
            md << "\n";
            for (const auto& e : s.errors) md << "- error: " << e << "\n";
        }
    }
    return md.str();
}

// ---------------------------------------------------------------- commands

namespace {

struct Prepared {
    Manifest manifest;
    RunPlan plan;
    ProviderConfig provider;
    ProviderConfig judge;
    bool separate_judge = false;
};

ProviderConfig resolved_provider(const RunConfig& c, ProviderConfig p) {
    if (!p.mock_script.empty()) p.mock_script = c.resolve(p.mock_script.string());
    return p;
}

Prepared prepare(const RunConfig& c, bool need_pool_always = false) {
    c.validate();
    Prepared p;
    p.manifest = load_manifest(c.resolve(c.manifest));
    if (!c.samples.empty()) {
        Manifest subset;
        for (const auto& id : c.samples) {
            const ImageSample* s = p.manifest.find(id);
            if (!s) throw ConfigError("sample '" + id + "' is not in the manifest");
            subset.entries.push_back(*s);
        }
        p.manifest = std::move(subset);
    }

    PromptLibrary lib(c.resolve(c.prompt_dir));
    p.plan.detect.rounds = c.rounds;
    p.plan.detect.prompt = lib.detect(c.ladder_rank);
    p.plan.detect.shots.k = c.k;
    p.plan.detect.shots.seed = c.seed;
    if (!c.exemplar_pool.empty() && (c.k > 0 || need_pool_always))
        p.plan.detect.shots.pool = load_exemplar_pool(c.resolve(c.exemplar_pool));
    p.plan.analyze.rounds = c.analyze_rounds;
    p.plan.analyze.prompt = lib.analyze();
    p.plan.judge.rounds = 1;
    p.plan.judge.prompt = lib.judge();

    p.provider = resolved_provider(c, c.provider);
    p.separate_judge = c.judge_provider.has_value();
    p.judge = p.separate_judge ? resolved_provider(c, *c.judge_provider) : p.provider;
    p.plan.detect.provider = p.provider;
    p.plan.analyze.provider = p.provider;
    p.plan.judge.provider = p.judge;
    for (QueryConfig* q : {&p.plan.detect, &p.plan.analyze, &p.plan.judge}) q->cache_mode = c.cache_mode;
    p.plan.workers = c.workers;
    p.plan.threshold = c.threshold;
    p.plan.force_analyze = c.force;
    p.plan.judge_retries = c.judge_retries;
    return p;
}

std::unique_ptr<ResponseCache> open_cache(const RunConfig& c) {
    if (c.cache_mode == CacheMode::Off) return nullptr;
    const fs::path path = c.cache_path.empty() ? c.resolve(c.output_dir) / "cache.jsonl" : c.resolve(c.cache_path);
    return std::make_unique<ResponseCache>(path, c.cache_mode);
}

int code_for(const Error& e) {
    const auto& k = e.kind();
    if (k == "AuthMissing") return exit_code::auth;
    if (k == "ConfigError" || k == "PreconditionError" || k == "MissingFile" || k == "SchemaError" ||
        k == "DuplicateId" || k == "KTooLarge" || k == "UnknownModel")
        return exit_code::config;
    return exit_code::runtime;
}

template <typename Body>
int guarded(const RunConfig& c, const std::string& hash, const CommandEnv& env, Body&& body) {
    const fs::path out = c.resolve(c.output_dir);
    try {
        return body();
    } catch (const Error& e) {
        fs::create_directories(out);
        write_error_json(out, e.kind(), e.what(), hash);
        if (env.log) *env.log << "error: " << e.kind() << ": " << e.what() << "\n";
        return code_for(e);
    } catch (const std::exception& e) {
        fs::create_directories(out);
        write_error_json(out, "InternalError", e.what(), hash);
        if (env.log) *env.log << "error: " << e.what() << "\n";
        return exit_code::runtime;
    }
}

std::string csv_header(const std::string& hash) {
    return "# schema_version=" + std::to_string(kSchemaVersion) + " config_hash=" + hash + "\n";
}

}  // namespace

CommandResult run_command(Command cmd, const RunConfig& config, const CommandEnv& env) {
    CommandResult result;
    result.out_dir = config.resolve(config.output_dir);
    const std::string hash = config_hash(config);
    result.exit_code = guarded(config, hash, env, [&]() -> int {
        Prepared p = prepare(config);
        if (cmd == Command::Judge) {
            for (const auto& s : p.manifest.entries)
                if (s.scope != Scope::Local || !s.gt_path || !s.mask_path)
                    throw PreconditionError("judge needs local forgeries with gt and mask; '" + s.id +
                                            "' has scope " + std::string(to_string(s.scope)));
        }

        std::unique_ptr<Provider> own_provider, own_judge;
        Provider* provider = env.provider;
        if (!provider) {
            own_provider = make_provider(p.provider);
            provider = own_provider.get();
        }
        Provider* judge = env.judge_provider;
        if (!judge) {
            if (p.separate_judge && cmd != Command::Detect) {
                own_judge = make_provider(p.judge);
                judge = own_judge.get();
            } else {
                judge = provider;
            }
        }
        auto cache = open_cache(config);
        CachingImageEncoder encoder(config.max_edge);
        ImageEncoder enc = [&encoder](const fs::path& path) { return encoder(path); };

        StageSet stages;
        stages.analyze = cmd != Command::Detect;
        stages.judge = cmd == Command::Judge || cmd == Command::Eval;

        result.record = run_batch(p.manifest, p.plan, stages, *provider, *judge, cache.get(), enc, env.cancel,
                                  env.hooks);
        result.record.config = provenance_json(config);
        result.record.config_hash = hash;
        result.summary = summarize(result.record, p.manifest, config.threshold);

        const fs::path& out = result.out_dir;
        fs::create_directories(out);
        fs::remove(out / "error.json");
        write_text(out / "run_record.json", to_json(result.record).dump(2) + "\n");
        json metrics = to_json(*result.summary);
        metrics["config_hash"] = hash;
        write_text(out / "metrics.json", metrics.dump(2) + "\n");
        write_text(out / "roc.csv", csv_header(hash) + roc_csv(result.summary->roc_points));
        write_text(out / "report.md", render_report(result.record, p.manifest, *result.summary));
        json timing{{"schema_version", kSchemaVersion},
                    {"config_hash", hash},
                    {"command", to_string(cmd)},
                    {"wall_seconds", result.record.wall_seconds},
                    {"calls", result.record.totals.calls},
                    {"complete", result.record.complete}};
        write_text(out / "timing.json", timing.dump(2) + "\n");

        if (env.log) {
            *env.log << to_string(cmd) << ": " << result.record.samples.size() << "/" << p.manifest.entries.size()
                     << " samples, ACC " << fmt_opt(result.summary->acc) << ", AUC "
                     << fmt_opt(result.summary->auc) << ", REJ " << fmt(result.summary->rej, 2) << " -> "
                     << out.string() << "\n";
        }
        return result.record.complete ? exit_code::ok : exit_code::interrupted;
    });
    return result;
}

int cmd_ablate(const RunConfig& config, const fs::path& plan_path, const CommandEnv& env) {
    const std::string hash = config_hash(config);
    return guarded(config, hash, env, [&]() -> int {
        if (!fs::is_regular_file(plan_path)) throw MissingFile("plan not found: " + plan_path.string());
        json plan_json;
        try {
            plan_json = json::parse(read_file_bytes(plan_path.string()));
        } catch (const json::exception& e) {
            throw ConfigError("plan " + plan_path.string() + ": " + e.what());
        }
        Prepared p = prepare(config, true);
        AblationPlan plan = plan_from_json(plan_json);
        plan.manifest = p.manifest;
        plan.run = p.plan;
        if (plan.kind == AblationKind::PromptLadder) {
            PromptLibrary lib(config.resolve(config.prompt_dir));
            for (int r : plan.ladder_ranks) plan.ladder_prompts[r] = lib.detect(r);
        }
        const std::string full_hash =
            sha256_hex(hash + "|" + plan_json.dump()).substr(0, 16);

        std::unique_ptr<Provider> own;
        Provider* provider = env.provider;
        if (!provider) {
            own = make_provider(p.provider);
            provider = own.get();
        }
        auto cache = open_cache(config);
        CachingImageEncoder encoder(config.max_edge);
        const fs::path out = config.resolve(config.output_dir);
        fs::create_directories(out);
        CellStore store(out / "cells.jsonl");
        AblationContext ctx{[provider](const AblationCell&) -> Provider& { return *provider; }, cache.get(),
                            [&encoder](const fs::path& path) { return encoder(path); }, &store, env.cancel};

        bool complete = false;
        if (plan.kind == AblationKind::PromptLadder) {
            auto table = run_prompt_ladder(plan, ctx);
            complete = table.complete;
            write_text(out / "ladder.csv", ladder_csv(table, full_hash));
            write_text(out / "ladder.json", to_json(table, full_hash).dump(2) + "\n");
        } else {
            auto table = run_kshot_sweep(plan, ctx);
            complete = table.complete;
            write_text(out / "kshot.csv", kshot_csv(table, full_hash));
            write_text(out / "kshot.json", to_json(table, full_hash).dump(2) + "\n");
        }
        if (env.log) *env.log << "ablate: " << (complete ? "complete" : "interrupted") << " -> " << out.string() << "\n";
        return complete ? exit_code::ok : exit_code::interrupted;
    });
}

}  // namespace forensics
