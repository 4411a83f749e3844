#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forensics/dataset.hpp"
#include "forensics/pipeline.hpp"

namespace forensics {

enum class AblationKind { PromptLadder, KShot };

struct AblationPlan {
    AblationKind kind = AblationKind::PromptLadder;
    std::vector<int> ladder_ranks{1, 2, 3, 4, 5};
    std::vector<int> k_values{0, 1, 2, 4};
    int repeats = 3;
    std::uint64_t base_seed = 0;
    Manifest manifest;
    RunPlan run;  // run.detect is the base Stage-1 configuration
    std::map<int, PromptSpec> ladder_prompts;  // rank -> prompt (ladder plans)

    void validate() const;
};

/// Reads kind / ladder_ranks / k_values / repeats / base_seed from a plan
/// file section; manifest, run and prompts are filled in by the caller.
AblationPlan plan_from_json(const nlohmann::json& j);

struct AblationCell {
    AblationKind kind;
    int rank = 0;
    int k = 0;
    int repeat = 0;
    std::uint64_t seed = 0;

    std::string id() const;
};

using ProviderForCell = std::function<Provider&(const AblationCell&)>;

struct CellResult {
    std::string cell_id;
    std::optional<double> acc;
    double rej = 0.0;
    Usage usage;
    std::size_t n_total = 0;
};

void to_json(nlohmann::json& j, const CellResult& c);
void from_json(const nlohmann::json& j, CellResult& c);

/// Persists finished cells so an interrupted ablation resumes without
/// re-querying them. An empty path keeps results in memory only.
class CellStore {
public:
    explicit CellStore(std::filesystem::path path = {});
    std::optional<CellResult> find(const std::string& cell_id) const;
    void put(const CellResult& r);

private:
    std::filesystem::path path_;
    std::map<std::string, CellResult> cells_;
};

struct LadderRow {
    int rank = 0;
    std::size_t token_count = 0;
    CellResult result;
};

struct LadderTable {
    std::vector<LadderRow> rows;
    std::vector<std::string> sample_ids;
    bool complete = true;
};

struct KShotRow {
    int k = 0;
    std::optional<int> repeat;  // empty for the mean row
    std::uint64_t seed = 0;
    CellResult result;
};

struct KShotTable {
    std::vector<KShotRow> rows;  // per k: `repeats` rows then one mean row
    std::vector<std::string> sample_ids;
    bool complete = true;

    /// Mean ACC per k, in k order; empty entries where ACC is undefined.
    std::vector<std::pair<int, std::optional<double>>> mean_acc() const;
    /// Successive differences of mean ACC between consecutive k values.
    std::vector<std::tuple<int, int, std::optional<double>>> acc_deltas() const;
};

struct AblationContext {
    ProviderForCell provider_for;
    ResponseCache* cache = nullptr;
    ImageEncoder encoder;
    CellStore* store = nullptr;
    const std::atomic<bool>* cancel = nullptr;
};

/// System plus instruction tokens of a prompt; the ladder's size measure.
std::size_t prompt_token_count(const PromptSpec& spec);

LadderTable run_prompt_ladder(const AblationPlan& plan, const AblationContext& ctx);
KShotTable run_kshot_sweep(const AblationPlan& plan, const AblationContext& ctx);

std::string ladder_csv(const LadderTable& t, const std::string& config_hash);
std::string kshot_csv(const KShotTable& t, const std::string& config_hash);
nlohmann::json to_json(const LadderTable& t, const std::string& config_hash);
nlohmann::json to_json(const KShotTable& t, const std::string& config_hash);

}  // namespace forensics
