// Command-line entry point: detect / analyze / judge / eval / ablate / oracle.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "forensics/cli.hpp"
#include "forensics/oracle.hpp"

namespace fs = std::filesystem;
using namespace forensics;

namespace {

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) { g_cancel.store(true); }

struct Flags {
    std::string config;
    std::string manifest;
    std::string provider;
    std::string model;
    std::string mock_script;
    std::optional<int> rounds;
    std::optional<int> k;
    std::optional<std::uint64_t> seed;
    std::optional<int> ladder_rank;
    std::string cache;
    std::string cache_path;
    std::string out;
    std::string prompts;
    std::string exemplars;
    std::optional<int> workers;
    std::optional<double> threshold;
    bool force = false;
    std::vector<std::string> samples;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "Run config JSON; flags override its fields");
    cmd->add_option("--manifest", f.manifest, "Sample manifest (JSONL)");
    cmd->add_option("--provider", f.provider, "Provider kind")->check(CLI::IsMember({"http", "mock", "synthetic"}));
    cmd->add_option("--model", f.model, "Model id");
    cmd->add_option("--mock-script", f.mock_script, "Scripted responses for the mock provider");
    cmd->add_option("--rounds", f.rounds, "Stage-1 rounds per sample")->check(CLI::PositiveNumber);
    cmd->add_option("--k", f.k, "Number of in-context exemplars")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", f.seed, "Exemplar sampling seed");
    cmd->add_option("--ladder-rank", f.ladder_rank, "Detection prompt rank")->check(CLI::Range(1, 5));
    cmd->add_option("--cache", f.cache, "Response cache mode")->check(CLI::IsMember({"off", "record", "replay"}));
    cmd->add_option("--cache-path", f.cache_path, "Cache file (default <out>/cache.jsonl)");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--prompts", f.prompts, "Prompt directory");
    cmd->add_option("--exemplars", f.exemplars, "Exemplar pool (JSONL)");
    cmd->add_option("--workers", f.workers, "Concurrent samples")->check(CLI::PositiveNumber);
    cmd->add_option("--threshold", f.threshold, "Fake decision threshold")->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--force", f.force, "Analyze every sample regardless of the Stage-1 verdict");
    cmd->add_option("--sample", f.samples, "Restrict to these sample ids (repeatable)");
}

RunConfig build_config(const Flags& f) {
    RunConfig c;
    if (!f.config.empty()) {
        c = load_run_config(f.config);
    } else {
        c.base_dir = fs::current_path();
        c.prompt_dir = "data/prompts";
    }
    // Flag paths are relative to the working directory, config paths to the config file.
    const fs::path cwd = fs::current_path();
    auto from_cwd = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (cwd / p).lexically_normal().string(); };
    auto rel = [&](const std::string& p) {
        if (c.base_dir.empty()) return from_cwd(p);
        return fs::path(from_cwd(p)).lexically_relative(c.base_dir).generic_string();
    };
    if (!f.manifest.empty()) c.manifest = rel(f.manifest);
    if (!f.provider.empty()) c.provider.kind = *parse_provider_kind(f.provider);
    if (!f.model.empty()) c.provider.model_id = f.model;
    if (!f.mock_script.empty()) c.provider.mock_script = rel(f.mock_script);
    if (f.rounds) c.rounds = *f.rounds;
    if (f.k) c.k = *f.k;
    if (f.seed) c.seed = *f.seed;
    if (f.ladder_rank) c.ladder_rank = *f.ladder_rank;
    if (!f.cache.empty()) c.cache_mode = *parse_cache_mode(f.cache);
    if (!f.cache_path.empty()) c.cache_path = from_cwd(f.cache_path);
    if (!f.out.empty()) c.output_dir = from_cwd(f.out);
    if (!f.prompts.empty()) c.prompt_dir = rel(f.prompts);
    if (!f.exemplars.empty()) c.exemplar_pool = rel(f.exemplars);
    if (f.workers) c.workers = *f.workers;
    if (f.threshold) c.threshold = *f.threshold;
    if (f.force) c.force = true;
    if (!f.samples.empty()) c.samples = f.samples;
    return c;
}

int report_config_error(const Flags& f, const Error& e) {
    const fs::path out = f.out.empty() ? fs::path("out") : fs::path(f.out);
    fs::create_directories(out);
    write_error_json(out, e.kind(), e.what(), "");
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return exit_code::config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage image forensics evaluation with multimodal chat models"};
    app.require_subcommand(1);

    Flags flags;
    std::string plan_path;
    std::string scenario_path;
    std::string image_path;

    struct Sub {
        const char* name;
        const char* help;
        Command cmd;
    };
    const Sub subs[] = {
        {"detect", "Stage 1: multi-round yes/no detection", Command::Detect},
        {"analyze", "Stage 1 then Stage 2 analysis of samples flagged fake", Command::Analyze},
        {"judge", "Stages 1 and 2 plus localization judging (local forgeries only)", Command::Judge},
        {"eval", "All stages with metrics and report", Command::Eval},
    };
    std::vector<std::pair<CLI::App*, Command>> run_cmds;
    for (const auto& s : subs) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        add_run_flags(cmd, flags);
        run_cmds.emplace_back(cmd, s.cmd);
    }
    auto* ablate = app.add_subcommand("ablate", "Prompt-ladder or k-shot ablation");
    add_run_flags(ablate, flags);
    ablate->add_option("--plan", plan_path, "Ablation plan JSON")->required();

    auto* oracle = app.add_subcommand("oracle", "Check measured AUC/REJ of a synthetic scenario against the exact values");
    oracle->add_option("--scenario", scenario_path, "Scenario JSON")->required();
    oracle->add_option("--image", image_path, "Image every synthetic sample points at")->required();
    oracle->add_option("--prompts", flags.prompts, "Prompt directory")->required();
    oracle->add_option("--ladder-rank", flags.ladder_rank, "Detection prompt rank")->check(CLI::Range(1, 5));
    oracle->add_option("--workers", flags.workers, "Concurrent samples")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    std::signal(SIGINT, on_sigint);

    CommandEnv env;
    env.cancel = &g_cancel;
    env.log = &std::cerr;

    if (oracle->parsed()) {
        try {
            const auto scenario = load_scenario(scenario_path);
            const auto prompt = PromptLibrary(flags.prompts).detect(flags.ladder_rank.value_or(5));
            const auto outcome = validate_pipeline(scenario, prompt, image_path, flags.workers.value_or(4));
            std::cout << "AUC measured " << outcome.measured_auc << " expected " << outcome.expected_auc
                      << "; REJ measured " << outcome.measured_rej << " expected " << outcome.expected_rej
                      << "; pass\n";
            return exit_code::ok;
        } catch (const ToleranceExceeded& e) {
            std::cout << "fail: " << e.what() << "\n";
            return exit_code::runtime;
        } catch (const Error& e) {
            std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
            return exit_code::config;
        }
    }

    RunConfig config;
    try {
        config = build_config(flags);
    } catch (const Error& e) {
        return report_config_error(flags, e);
    }
    if (ablate->parsed()) return cmd_ablate(config, plan_path, env);
    for (const auto& [cmd, kind] : run_cmds)
        if (cmd->parsed()) return run_command(kind, config, env).exit_code;
    return exit_code::config;
}
