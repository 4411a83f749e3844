#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "forensics/pipeline.hpp"
#include "forensics/provider.hpp"

namespace forensics {

/// Exact AUC (fraction) between the per-sample decision scores that a
/// SyntheticProvider induces on fakes and reals over `rounds` rounds.
/// Enumerates the number of answered rounds and the yes count for each
/// class; samples with every round rejected are excluded, matching the
/// metrics pipeline. With reject_rate = 0 this is the (rounds+1)^2-term
/// comparison of Binom(rounds, p_fake)/rounds against Binom(rounds, p_real)/rounds.
double expected_auc(const SyntheticBehavior& behavior, int rounds);

/// Probability that a sample has every round rejected: reject_rate^rounds.
double expected_full_rejection(const SyntheticBehavior& behavior, int rounds);

struct OracleScenario {
    std::size_t n_real = 2000;
    std::size_t n_fake = 2000;
    SyntheticBehavior behavior;
    int rounds = 5;
    double tolerance = 0.02;      // on AUC, as a fraction
    double rej_tolerance = 0.03;  // on REJ, as a fraction
    std::string derivation;       // how the tolerances were obtained

    void validate() const;
};

OracleScenario scenario_from_json(const nlohmann::json& j);
OracleScenario load_scenario(const std::filesystem::path& path);

struct OracleOutcome {
    double expected_auc = 0.0;
    double measured_auc = 0.0;
    double expected_rej = 0.0;
    double measured_rej = 0.0;
    bool passed = false;
};

/// Runs prompts -> synthetic provider -> parser -> scores -> AUC over an
/// in-memory manifest whose samples all point at `image`, and checks the
/// measured AUC and REJ against their exact expectations. Throws
/// ToleranceExceeded (carrying both values) on failure.
OracleOutcome validate_pipeline(const OracleScenario& scenario, const PromptSpec& prompt,
                                const std::filesystem::path& image, int workers = 4);

}  // namespace forensics
