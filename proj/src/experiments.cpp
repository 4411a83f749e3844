#include "forensics/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "forensics/metrics.hpp"

namespace forensics {

namespace fs = std::filesystem;
using nlohmann::json;

void AblationPlan::validate() const {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (manifest.entries.empty()) throw ConfigError("ablation manifest is empty");
    if (kind == AblationKind::PromptLadder) {
        if (ladder_ranks.empty()) throw ConfigError("ladder plan has no ranks");
        for (int r : ladder_ranks) {
            if (r < 1 || r > 5) throw ConfigError("ladder rank out of range: " + std::to_string(r));
            if (!ladder_prompts.count(r)) throw ConfigError("no prompt for ladder rank " + std::to_string(r));
        }
    } else {
        if (k_values.empty()) throw ConfigError("k-shot plan has no k values");
        const int max_k = *std::max_element(k_values.begin(), k_values.end());
        if (max_k < 0 || static_cast<std::size_t>(max_k) > run.detect.shots.pool.size())
            throw KTooLarge("k=" + std::to_string(max_k) + " exceeds exemplar pool size " +
                            std::to_string(run.detect.shots.pool.size()));
    }
}

AblationPlan plan_from_json(const json& j) {
    AblationPlan p;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "ladder" || kind == "prompt_ladder")
        p.kind = AblationKind::PromptLadder;
    else if (kind == "kshot" || kind == "k_shot")
        p.kind = AblationKind::KShot;
    else
        throw ConfigError("unknown ablation kind '" + kind + "'");
    p.ladder_ranks = j.value("ladder_ranks", p.ladder_ranks);
    p.k_values = j.value("k_values", p.k_values);
    p.repeats = j.value("repeats", p.repeats);
    p.base_seed = j.value("base_seed", p.base_seed);
    return p;
}

std::string AblationCell::id() const {
    if (kind == AblationKind::PromptLadder) return "ladder:rank=" + std::to_string(rank);
    return "kshot:k=" + std::to_string(k) + ":repeat=" + std::to_string(repeat) +
           ":seed=" + std::to_string(seed);
}

void to_json(json& j, const CellResult& c) {
    j = json{{"cell", c.cell_id},
             {"acc", c.acc ? json(*c.acc) : json(nullptr)},
             {"rej", c.rej},
             {"n_total", c.n_total},
             {"prompt_tokens", c.usage.prompt_tokens},
             {"completion_tokens", c.usage.completion_tokens},
             {"calls", c.usage.calls}};
}

void from_json(const json& j, CellResult& c) {
    c.cell_id = j.at("cell").get<std::string>();
    c.acc = j.at("acc").is_null() ? std::nullopt : std::optional<double>(j.at("acc").get<double>());
    c.rej = j.at("rej").get<double>();
    c.n_total = j.at("n_total").get<std::size_t>();
    c.usage.prompt_tokens = j.at("prompt_tokens").get<std::uint64_t>();
    c.usage.completion_tokens = j.at("completion_tokens").get<std::uint64_t>();
    c.usage.calls = j.at("calls").get<std::uint64_t>();
}

CellStore::CellStore(fs::path path) : path_(std::move(path)) {
    if (path_.empty() || !fs::is_regular_file(path_)) return;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        try {
            auto c = json::parse(line).get<CellResult>();
            cells_[c.cell_id] = c;
        } catch (const json::exception&) {
        }
    }
}

std::optional<CellResult> CellStore::find(const std::string& cell_id) const {
    auto it = cells_.find(cell_id);
    if (it == cells_.end()) return std::nullopt;
    return it->second;
}

void CellStore::put(const CellResult& r) {
    cells_[r.cell_id] = r;
    if (path_.empty()) return;
    if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    out << json(r).dump() << '\n';
}

std::size_t prompt_token_count(const PromptSpec& spec) {
    return approximate_tokens(spec.system_text()) + approximate_tokens(spec.user_instruction);
}

namespace {

std::vector<std::string> sample_ids(const Manifest& m) {
    std::vector<std::string> ids;
    for (const auto& e : m.entries) ids.push_back(e.id);
    return ids;
}

// One detection-only batch for a cell; nullopt when cancelled midway.
std::optional<CellResult> run_cell(const AblationPlan& plan, const AblationCell& cell, RunPlan run,
                                   const AblationContext& ctx) {
    const std::string id = cell.id();
    if (ctx.store)
        if (auto done = ctx.store->find(id)) return done;

    Provider& provider = ctx.provider_for(cell);
    StageSet stages;
    RunRecord record = run_batch(plan.manifest, run, stages, provider, provider, ctx.cache,
                                 ctx.encoder, ctx.cancel);
    if (!record.complete) return std::nullopt;
    const auto summary = summarize(record, plan.manifest, run.threshold);
    CellResult r{id, summary.acc, summary.rej, record.totals, summary.n_total};
    if (ctx.store) ctx.store->put(r);
    return r;
}

}  // namespace

LadderTable run_prompt_ladder(const AblationPlan& plan, const AblationContext& ctx) {
    if (plan.kind != AblationKind::PromptLadder) throw ConfigError("not a prompt-ladder plan");
    plan.validate();
    LadderTable table;
    table.sample_ids = sample_ids(plan.manifest);
    std::vector<int> ranks = plan.ladder_ranks;
    std::sort(ranks.begin(), ranks.end());
    ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
    for (int rank : ranks) {
        RunPlan run = plan.run;
        run.detect.prompt = plan.ladder_prompts.at(rank);
        AblationCell cell{AblationKind::PromptLadder, rank, run.detect.shots.k, 0, run.detect.shots.seed};
        auto result = run_cell(plan, cell, run, ctx);
        if (!result) {
            table.complete = false;
            break;
        }
        table.rows.push_back({rank, prompt_token_count(run.detect.prompt), *result});
    }
    return table;
}

KShotTable run_kshot_sweep(const AblationPlan& plan, const AblationContext& ctx) {
    if (plan.kind != AblationKind::KShot) throw ConfigError("not a k-shot plan");
    plan.validate();
    KShotTable table;
    table.sample_ids = sample_ids(plan.manifest);
    for (int k : plan.k_values) {
        std::vector<CellResult> repeats;
        for (int r = 0; r < plan.repeats; ++r) {
            RunPlan run = plan.run;
            run.detect.shots.k = k;
            run.detect.shots.seed = plan.base_seed + static_cast<std::uint64_t>(r);
            AblationCell cell{AblationKind::KShot, 0, k, r, run.detect.shots.seed};
            auto result = run_cell(plan, cell, run, ctx);
            if (!result) {
                table.complete = false;
                return table;
            }
            table.rows.push_back({k, r, run.detect.shots.seed, *result});
            repeats.push_back(*result);
        }
        CellResult mean;
        mean.cell_id = "kshot:k=" + std::to_string(k) + ":mean";
        std::vector<double> accs;
        double rej = 0.0;
        for (const auto& c : repeats) {
            if (c.acc) accs.push_back(*c.acc);
            rej += c.rej;
            mean.usage += c.usage;
            mean.n_total += c.n_total;
        }
        if (!accs.empty()) mean.acc = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
        mean.rej = rej / static_cast<double>(repeats.size());
        table.rows.push_back({k, std::nullopt, 0, mean});
    }
    return table;
}

std::vector<std::pair<int, std::optional<double>>> KShotTable::mean_acc() const {
    std::vector<std::pair<int, std::optional<double>>> out;
    for (const auto& r : rows)
        if (!r.repeat) out.emplace_back(r.k, r.result.acc);
    return out;
}

std::vector<std::tuple<int, int, std::optional<double>>> KShotTable::acc_deltas() const {
    std::vector<std::tuple<int, int, std::optional<double>>> out;
    const auto means = mean_acc();
    for (std::size_t i = 1; i < means.size(); ++i) {
        std::optional<double> d;
        if (means[i].second && means[i - 1].second) d = *means[i].second - *means[i - 1].second;
        out.emplace_back(means[i - 1].first, means[i].first, d);
    }
    return out;
}

namespace {

std::string fmt(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream s;
    s.precision(10);
    s << *v;
    return s.str();
}

std::string fmt(double v) { return fmt(std::optional<double>(v)); }

json cell_json(const CellResult& c) { return json(c); }

}  // namespace

std::string ladder_csv(const LadderTable& t, const std::string& config_hash) {
    std::ostringstream out;
    out << "# schema_version=" << kSchemaVersion << " config_hash=" << config_hash << '\n';
    out << "rank,tokens,acc,rej\n";
    for (const auto& r : t.rows)
        out << r.rank << ',' << r.token_count << ',' << fmt(r.result.acc) << ',' << fmt(r.result.rej) << '\n';
    return out.str();
}

std::string kshot_csv(const KShotTable& t, const std::string& config_hash) {
    std::ostringstream out;
    out << "# schema_version=" << kSchemaVersion << " config_hash=" << config_hash << '\n';
    out << "k,repeat,seed,acc,rej\n";
    for (const auto& r : t.rows) {
        out << r.k << ',' << (r.repeat ? std::to_string(*r.repeat) : std::string("mean")) << ','
            << (r.repeat ? std::to_string(r.seed) : std::string()) << ',' << fmt(r.result.acc) << ','
            << fmt(r.result.rej) << '\n';
    }
    return out.str();
}

json to_json(const LadderTable& t, const std::string& config_hash) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json row = cell_json(r.result);
        row["rank"] = r.rank;
        row["tokens"] = r.token_count;
        rows.push_back(row);
    }
    return json{{"schema_version", kSchemaVersion}, {"config_hash", config_hash}, {"kind", "ladder"},
                {"complete", t.complete},          {"rows", rows},              {"sample_ids", t.sample_ids}};
}

json to_json(const KShotTable& t, const std::string& config_hash) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json row = cell_json(r.result);
        row["k"] = r.k;
        row["repeat"] = r.repeat ? json(*r.repeat) : json("mean");
        if (r.repeat) row["seed"] = r.seed;
        rows.push_back(row);
    }
    json deltas = json::array();
    for (const auto& [from, to, d] : t.acc_deltas())
        deltas.push_back({{"from_k", from}, {"to_k", to}, {"acc_delta", d ? json(*d) : json(nullptr)}});
    return json{{"schema_version", kSchemaVersion}, {"config_hash", config_hash}, {"kind", "kshot"},
                {"complete", t.complete},          {"rows", rows},              {"acc_deltas", deltas},
                {"sample_ids", t.sample_ids}};
}

}  // namespace forensics
