// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "corpus.hpp"
#include "forensics/cli.hpp"
#include "forensics/experiments.hpp"
#include "forensics/metrics.hpp"
#include "forensics/oracle.hpp"
#include "forensics/parse.hpp"
#include "forensics/pipeline.hpp"
#include "forensics/provider.hpp"
#include "test_support.hpp"

using namespace forensics;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kAucExact = 1e-12;
constexpr double kAucOracleSeconds = 5.0;
constexpr double kSyntheticSeconds = 60.0;
constexpr double kParserSeconds = 1.0;

struct Outcome {
    bool ok = true;
    std::string detail;
};

class Check {
public:
    void require(bool cond, const std::string& what) {
        if (!cond && out_.ok) {
            out_.ok = false;
            out_.detail = what;
        }
    }
    void note(const std::string& s) {
        if (out_.ok) out_.detail = s;
    }
    Outcome result() const { return out_; }

private:
    Outcome out_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

std::unique_ptr<MockProvider> mock10_provider() {
    return MockProvider::from_file(testing::mock10_dir() / "mock_script.jsonl", "mock-vlm");
}

/// Passes requests through and remembers which (sample, stage) pairs were asked.
class CountingProvider : public Provider {
public:
    explicit CountingProvider(Provider& inner) : inner_(inner) {}
    RoundResponse complete(const CompletionRequest& r) override {
        {
            std::lock_guard lock(mu_);
            seen_.emplace_back(r.sample.id, r.stage);
        }
        return inner_.complete(r);
    }
    const std::string& model_id() const override { return inner_.model_id(); }
    std::size_t count(Stage stage, const std::string& id = {}) const {
        std::lock_guard lock(mu_);
        return static_cast<std::size_t>(std::count_if(seen_.begin(), seen_.end(), [&](const auto& p) {
            return p.second == stage && (id.empty() || p.first == id);
        }));
    }

private:
    Provider& inner_;
    mutable std::mutex mu_;
    std::vector<std::pair<std::string, Stage>> seen_;
};

// ---------------------------------------------------------------- 1
Outcome auc_oracle() {
    Check c;
    std::mt19937_64 rng(20240601);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 2 + bounded_index(rng, 499);
        const int levels = i % 2 == 0 ? 1 + static_cast<int>(bounded_index(rng, 8)) : 0;
        const auto set = testing::random_scores(rng, n, levels);
        const double fast = compute_auc(set).auc / 100.0;
        const double slow = testing::pairwise_auc(set);
        worst = std::max(worst, std::abs(fast - slow));
    }
    const double secs = seconds_since(t0);
    c.require(worst <= kAucExact, "max |rank - pairwise| = " + num(worst));
    c.require(secs < kAucOracleSeconds, "took " + num(secs) + " s");
    c.note("200 sets, max diff " + num(worst) + ", " + num(secs, 3) + " s");
    return c.result();
}

// ---------------------------------------------------------------- 2
Outcome auc_invariants() {
    Check c;
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 2 + bounded_index(rng, 300);
        auto set = testing::random_scores(rng, n, i % 3 == 0 ? 5 : 0);
        const double base = compute_auc(set).auc / 100.0;
        auto mapped = set;
        for (auto& s : mapped) s.score = std::atan(4.0 * s.score - 1.0) * 3.0 + 10.0;
        worst = std::max(worst, std::abs(compute_auc(mapped).auc / 100.0 - base));

        auto tie_free = testing::random_scores(rng, n, 0);
        std::set<double> distinct;
        for (const auto& s : tie_free) distinct.insert(s.score);
        c.require(distinct.size() == tie_free.size(), "tie-free set has ties");
        const double a = compute_auc(tie_free).auc / 100.0;
        for (auto& s : tie_free) s.label = s.label == Label::Fake ? Label::Real : Label::Fake;
        worst = std::max(worst, std::abs(compute_auc(tie_free).auc / 100.0 - (1.0 - a)));
    }
    c.require(worst <= kAucExact, "max deviation " + num(worst));
    c.note("100 sets, max deviation " + num(worst));
    return c.result();
}

// ---------------------------------------------------------------- 3
Outcome synthetic_end_to_end() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    const auto prompt = PromptLibrary(testing::data_dir() / "prompts").detect(5);
    const auto image = testing::data_dir() / "fixtures" / "oracle" / "blank.png";
    std::string detail;
    for (const char* name : {"scenario.json", "scenario_reject.json"}) {
        const auto s = load_scenario(testing::data_dir() / "fixtures" / "oracle" / name);
        c.require(s.n_real == 2000 && s.n_fake == 2000 && s.rounds == 5, std::string(name) + " has the wrong shape");
        c.require(s.tolerance == 0.02 && s.rej_tolerance == 0.03, std::string(name) + " tolerances differ");
        try {
            const auto o = validate_pipeline(s, prompt, image);
            detail += std::string(name) + ": AUC " + num(o.measured_auc) + " vs " + num(o.expected_auc) + ", REJ " +
                      num(o.measured_rej) + " vs " + num(o.expected_rej) + "; ";
        } catch (const ToleranceExceeded& e) {
            c.require(false, std::string(name) + ": " + e.what());
        }
    }
    const double secs = seconds_since(t0);
    c.require(secs < kSyntheticSeconds, "took " + num(secs) + " s");
    c.note(detail + num(secs, 3) + " s");
    return c.result();
}

// ---------------------------------------------------------------- 4
Outcome parser_corpora() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    const auto v = testing::check_verdict_corpus();
    const auto r = testing::check_report_corpus();
    const auto j = testing::check_judge_corpus();
    const double secs = seconds_since(t0);
    c.require(v.total >= 30 && r.total >= 20 && j.total >= 20, "corpus too small");
    for (const auto* res : {&v, &r, &j})
        if (!res->ok()) c.require(false, res->failures.front());
    c.require(secs < kParserSeconds, "took " + num(secs) + " s");
    c.note(std::to_string(v.total) + " verdicts, " + std::to_string(r.total) + " reports, " +
           std::to_string(j.total) + " judge outputs, " + num(secs, 3) + " s");
    return c.result();
}

// ---------------------------------------------------------------- 5
Outcome scoring_rule() {
    using V = Verdict;
    Check c;
    const auto mixed = score_rounds("m", {V::Yes, V::Reject, V::No, V::Yes, V::Reject});
    c.require(mixed.score && *mixed.score == 2.0 / 3.0, "mixed case is not 2/3");
    c.require(score_rounds("r", std::vector<V>(5, V::Reject)).rejected(), "all-reject is not Rejected");
    c.require(*score_rounds("a", {V::Yes, V::Yes, V::Yes, V::Yes, V::No}).score == 4.0 / 5.0, "4/5 case");
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        std::vector<V> rounds(1 + bounded_index(rng, 9));
        int yes = 0, rej = 0;
        for (auto& r : rounds) {
            r = static_cast<V>(bounded_index(rng, 3));
            yes += r == V::Yes;
            rej += r == V::Reject;
        }
        const auto s = score_rounds("x", rounds);
        const int answered = static_cast<int>(rounds.size()) - rej;
        c.require(s.rounds_total == static_cast<int>(rounds.size()) && s.rounds_rejected == rej, "round counts");
        if (answered == 0)
            c.require(s.rejected(), "all-reject list not Rejected");
        else
            c.require(s.score && *s.score == static_cast<double>(yes) / answered, "score differs from #Yes/#answered");
    }
    c.note("3 fixed cases and 2000 random lists");
    return c.result();
}

// ---------------------------------------------------------------- 6
Outcome judge_aggregation() {
    Check c;
    c.require(judge_final_percent({5, 5, 5, 5}) == 100.0, "(5,5,5,5)");
    c.require(judge_final_percent({0, 0, 0, 0}) == 0.0, "(0,0,0,0)");
    c.require(judge_final_percent({4, 3, 5, 4}) == 80.0, "(4,3,5,4)");
    const auto p = parse_judge_scores(
        "Absolute Position Accuracy: 7\nRelative Position Accuracy: -1\nReadability: 4\nCompleteness: 6/5");
    c.require(p.scores == std::array<double, 4>{5, 0, 4, 5}, "clamped scores " + nlohmann::json(p.scores).dump());
    c.require(p.diagnostics.size() == 3, "expected 3 clamp diagnostics");
    c.require(make_judge_score("s", p).final_percent == 70.0, "clamped final");
    c.note("100 / 0 / 80, clamp 7,-1,6 -> 5,0,5");
    return c.result();
}

// ---------------------------------------------------------------- 7
RunConfig mock_config(const fs::path& out, CacheMode mode = CacheMode::Record) {
    auto c = load_run_config(testing::mock10_dir() / "eval_config.json");
    c.output_dir = out.string();
    c.cache_mode = mode;
    return c;
}

Outcome determinism_and_replay() {
    Check c;
    testing::TempDir a("accept-a"), b("accept-b"), resumed("accept-resume");
    const auto ra = run_command(Command::Eval, mock_config(a.path()));
    const auto rb = run_command(Command::Eval, mock_config(b.path()));
    c.require(ra.exit_code == 0 && rb.exit_code == 0, "clean eval failed");
    const auto record = testing::slurp(a / "run_record.json");
    const auto metrics = testing::slurp(a / "metrics.json");
    c.require(!record.empty() && record == testing::slurp(b / "run_record.json"), "run records differ across runs");
    c.require(metrics == testing::slurp(b / "metrics.json"), "metrics differ across runs");

    // Interrupt after a few samples, then resume from the cache.
    std::atomic<bool> cancel{false};
    std::atomic<int> done{0};
    CommandEnv env;
    env.cancel = &cancel;
    env.hooks.on_sample = [&](const SampleRecord&) {
        if (++done >= 3) cancel = true;
    };
    auto cfg = mock_config(resumed.path());
    cfg.workers = 2;
    const auto partial = run_command(Command::Eval, cfg, env);
    c.require(partial.exit_code == exit_code::interrupted, "interrupted run exit " + std::to_string(partial.exit_code));
    c.require(partial.record.samples.size() < 10, "interrupt did not stop the run");
    auto counter_inner = mock10_provider();
    CountingProvider counter(*counter_inner);
    CommandEnv env2;
    env2.provider = &counter;
    const auto again = run_command(Command::Eval, mock_config(resumed.path()), env2);
    c.require(again.exit_code == 0, "resumed run failed");
    c.require(testing::slurp(resumed / "run_record.json") == record, "resumed record differs from clean");
    c.require(testing::slurp(resumed / "metrics.json") == metrics, "resumed metrics differ from clean");
    c.require(counter.count(Stage::Detect) < 50, "resume re-queried every detect round");

    // Replay from a's cache with a provider that has nothing scripted.
    MockProvider empty("mock-vlm", {});
    CommandEnv env3;
    env3.provider = &empty;
    const auto replay = run_command(Command::Eval, mock_config(a.path(), CacheMode::Replay), env3);
    c.require(replay.exit_code == 0, "replay failed with exit " + std::to_string(replay.exit_code));
    c.require(empty.total_calls() == 0, "replay called the provider");
    c.require(testing::slurp(a / "run_record.json") == record, "replayed record differs");
    c.require(testing::slurp(a / "metrics.json") == metrics, "replayed metrics differ");
    c.note("2 clean runs, interrupted at " + std::to_string(partial.record.samples.size()) +
           "/10 then resumed with " + std::to_string(counter.count(Stage::Detect)) +
           " new detect calls, replay with 0 calls");
    return c.result();
}

// ---------------------------------------------------------------- 8
Outcome gating() {
    Check c;
    testing::TempDir out("accept-gate");
    auto inner = mock10_provider();
    CountingProvider counter(*inner);
    CommandEnv env;
    env.provider = &counter;
    auto cfg = mock_config(out.path(), CacheMode::Off);
    const auto r = run_command(Command::Eval, cfg, env);
    c.require(r.exit_code == 0, "eval failed");
    std::size_t flagged = 0;
    for (const auto& [id, s] : r.record.samples) {
        const bool fake = s.detection && s.detection->score && *s.detection->score >= cfg.threshold;
        flagged += fake;
        if (!fake) {
            c.require(counter.count(Stage::Analyze, id) == 0, "Stage-2 request for " + id);
            c.require(counter.count(Stage::Judge, id) == 0, "judge request for " + id);
        }
    }
    c.require(counter.count(Stage::Analyze) == flagged, "analyze calls != flagged samples");

    const std::size_t n = r.record.samples.size();
    for (int rounds : {5, 3}) {
        auto inner2 = mock10_provider();
        CountingProvider detect_counter(*inner2);
        CommandEnv env2;
        env2.provider = &detect_counter;
        auto dc = mock_config(out.path(), CacheMode::Off);
        dc.rounds = rounds;
        c.require(run_command(Command::Detect, dc, env2).exit_code == 0, "detect failed");
        c.require(detect_counter.count(Stage::Detect) == static_cast<std::size_t>(rounds) * n,
                  "rounds " + std::to_string(rounds) + " gave " + std::to_string(detect_counter.count(Stage::Detect)) +
                      " detect calls");
        c.require(detect_counter.count(Stage::Analyze) + detect_counter.count(Stage::Judge) == 0,
                  "detect issued Stage-2 calls");
    }
    c.note(std::to_string(flagged) + " of " + std::to_string(n) + " samples reached Stage 2; 5n and 3n detect calls");
    return c.result();
}

// ---------------------------------------------------------------- 9
/// Answers instantly in virtual time while tracking concurrent posts.
class GateTransport : public HttpTransport {
public:
    explicit GateTransport(Clock& clock) : clock_(clock) {}
    HttpResult post_json(const std::string&, const std::string&, const std::string&, Millis) override {
        const int now = ++in_flight_;
        int p = peak_.load();
        while (now > p && !peak_.compare_exchange_weak(p, now)) {
        }
        {
            std::lock_guard lock(mu_);
            times_.push_back(clock_.now());
        }
        std::this_thread::sleep_for(200us);
        --in_flight_;
        return {200, R"({"choices":[{"message":{"role":"assistant","content":"No."}}],"usage":{"prompt_tokens":3,"completion_tokens":1}})",
                ""};
    }
    int peak() const { return peak_.load(); }
    std::vector<Clock::time_point> times() const {
        std::lock_guard lock(mu_);
        return times_;
    }

private:
    Clock& clock_;
    std::atomic<int> in_flight_{0}, peak_{0};
    mutable std::mutex mu_;
    std::vector<Clock::time_point> times_;
};

Outcome rate_limit() {
    Check c;
    setenv("FORENSICS_ACCEPT_KEY", "sk-accept", 1);
    std::string detail;
    for (auto [rpm, conc] : {std::pair{30.0, 3}, std::pair{12.0, 1}}) {
        auto clock = std::make_shared<ManualClock>();
        ProviderConfig cfg;
        cfg.kind = ProviderKind::Http;
        cfg.endpoint = "https://example.test/v1";
        cfg.model_id = "vision-model";
        cfg.api_key_env = "FORENSICS_ACCEPT_KEY";
        cfg.requests_per_minute = rpm;
        cfg.max_concurrency = conc;
        auto transport = std::make_unique<GateTransport>(*clock);
        auto* t = transport.get();
        HttpProvider p(cfg, std::move(transport), clock);
        ImageSample s;
        s.id = "s";
        s.image_path = testing::mock10_dir() / "img" / "cal_001.png";
        const MessageSequence msgs{{Role::User, "Is it fake?", {}}};
        {
            std::vector<std::jthread> threads;
            for (int w = 0; w < 8; ++w)
                threads.emplace_back([&, w] {
                    for (int i = 0; i < 12; ++i) p.complete({msgs, s, Stage::Detect, w * 100 + i});
                });
        }
        auto times = p.dispatch_times();
        c.require(times.size() == 96 && t->times().size() == 96, "expected 96 dispatches");
        std::sort(times.begin(), times.end());
        std::size_t worst = 0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            std::size_t n = 0;
            for (std::size_t j = i; j < times.size() && times[j] < times[i] + 60s; ++j) ++n;
            worst = std::max(worst, n);
        }
        c.require(worst <= static_cast<std::size_t>(rpm), "window held " + std::to_string(worst) + " > rpm " + num(rpm));
        c.require(t->peak() <= conc && p.peak_in_flight() <= conc,
                  "in flight " + std::to_string(t->peak()) + " > " + std::to_string(conc));
        detail += "rpm " + num(rpm) + ": max window " + std::to_string(worst) + ", peak in flight " +
                  std::to_string(t->peak()) + "/" + std::to_string(conc) + "; ";
    }
    unsetenv("FORENSICS_ACCEPT_KEY");
    c.note(detail);
    return c.result();
}

// ---------------------------------------------------------------- 10
Outcome ablation_shape() {
    Check c;
    const auto manifest = load_manifest(testing::mock10_dir() / "manifest.jsonl");
    PromptLibrary lib(testing::data_dir() / "prompts");
    SyntheticBehavior behavior;
    behavior.yes_rate_fake = 0.8;
    behavior.yes_rate_real = 0.2;
    behavior.reject_rate = 0.1;
    behavior.seed = 9;
    SyntheticProvider provider("synthetic", behavior);
    CachingImageEncoder encoder;
    AblationContext ctx;
    ctx.provider_for = [&](const AblationCell&) -> Provider& { return provider; };
    ctx.encoder = [&](const fs::path& p) { return encoder(p); };

    AblationPlan ladder;
    ladder.kind = AblationKind::PromptLadder;
    ladder.manifest = manifest;
    ladder.run.detect.prompt = lib.detect(5);
    ladder.run.detect.provider.kind = ProviderKind::Synthetic;
    ladder.run.detect.provider.model_id = "synthetic";
    ladder.run.detect.provider.synthetic = behavior;
    for (int r = 1; r <= 5; ++r) ladder.ladder_prompts[r] = lib.detect(r);
    const auto lt = run_prompt_ladder(ladder, ctx);
    c.require(lt.complete && lt.rows.size() == 5, "ladder rows");
    std::string tokens;
    for (std::size_t i = 0; i < lt.rows.size(); ++i) {
        tokens += (i ? "<" : "") + std::to_string(lt.rows[i].token_count);
        if (i > 0) c.require(lt.rows[i].token_count > lt.rows[i - 1].token_count, "tokens not strictly increasing");
    }

    AblationPlan ks = ladder;
    ks.kind = AblationKind::KShot;
    ks.k_values = {0, 1, 2, 4};
    ks.repeats = 3;
    ks.base_seed = 100;
    ks.run.detect.shots.pool = load_exemplar_pool(testing::data_dir() / "exemplars" / "detect_pool.jsonl");
    const auto kt = run_kshot_sweep(ks, ctx);
    c.require(kt.complete, "k-shot incomplete");
    for (int k : ks.k_values) {
        std::vector<const KShotRow*> rows, means;
        for (const auto& r : kt.rows)
            if (r.k == k) (r.repeat ? rows : means).push_back(&r);
        c.require(rows.size() == 3 && means.size() == 1, "k=" + std::to_string(k) + " row count");
        if (k == 0 && rows.size() == 3) {
            for (const auto* r : rows)
                c.require(r->result.acc == rows[0]->result.acc && r->result.rej == rows[0]->result.rej &&
                              r->result.usage.calls == rows[0]->result.usage.calls &&
                              r->result.usage.prompt_tokens == rows[0]->result.usage.prompt_tokens,
                          "k=0 repeats differ");
        }
    }
    c.require(kt.rows.size() == ks.k_values.size() * 4, "k-shot table size");
    c.note("ladder tokens " + tokens + "; k-shot " + std::to_string(kt.rows.size()) + " rows");
    return c.result();
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"AUC matches pairwise oracle", auc_oracle},
        {"AUC invariants", auc_invariants},
        {"synthetic end-to-end", synthetic_end_to_end},
        {"parser corpora", parser_corpora},
        {"scoring rule", scoring_rule},
        {"judge aggregation", judge_aggregation},
        {"determinism and replay", determinism_and_replay},
        {"two-stage gating", gating},
        {"rate-limit contract", rate_limit},
        {"ablation harness shape", ablation_shape},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.ok;
        std::printf("[%s] %2zu %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
