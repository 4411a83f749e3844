#include "forensics/oracle.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "forensics/metrics.hpp"

namespace forensics {

using nlohmann::json;

namespace {

double binom_pmf(int n, int k, double p) {
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    const double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    return std::exp(log_c + k * std::log(p) + (n - k) * std::log1p(-p));
}

struct Outcome {
    int yes;
    int answered;  // > 0
    double prob;
};

std::vector<Outcome> score_distribution(double yes_rate, double reject_rate, int rounds) {
    std::vector<Outcome> out;
    for (int m = 1; m <= rounds; ++m) {
        const double pm = binom_pmf(rounds, m, 1.0 - reject_rate);
        if (pm == 0.0) continue;
        for (int y = 0; y <= m; ++y) {
            const double py = binom_pmf(m, y, yes_rate);
            if (py > 0.0) out.push_back({y, m, pm * py});
        }
    }
    return out;
}

}  // namespace

double expected_auc(const SyntheticBehavior& behavior, int rounds) {
    behavior.validate();
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (behavior.reject_rate >= 1.0) throw ConfigError("expected_auc needs reject_rate < 1");
    const auto fake = score_distribution(behavior.yes_rate_fake, behavior.reject_rate, rounds);
    const auto real = score_distribution(behavior.yes_rate_real, behavior.reject_rate, rounds);
    double num = 0.0, mass_f = 0.0, mass_r = 0.0;
    for (const auto& r : real) mass_r += r.prob;
    for (const auto& f : fake) {
        mass_f += f.prob;
        for (const auto& r : real) {
            // Compare y_f/m_f with y_r/m_r exactly.
            const long lhs = static_cast<long>(f.yes) * r.answered;
            const long rhs = static_cast<long>(r.yes) * f.answered;
            if (lhs > rhs)
                num += f.prob * r.prob;
            else if (lhs == rhs)
                num += 0.5 * f.prob * r.prob;
        }
    }
    return num / (mass_f * mass_r);
}

double expected_full_rejection(const SyntheticBehavior& behavior, int rounds) {
    return std::pow(behavior.reject_rate, rounds);
}

void OracleScenario::validate() const {
    behavior.validate();
    if (n_real == 0 || n_fake == 0) throw ConfigError("scenario needs real and fake samples");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (!(tolerance > 0) || !(rej_tolerance > 0)) throw ConfigError("tolerances must be positive");
    if (behavior.reject_rate >= 1.0) throw ConfigError("reject_rate must be < 1");
}

OracleScenario scenario_from_json(const json& j) {
    OracleScenario s;
    s.n_real = j.value("n_real", s.n_real);
    s.n_fake = j.value("n_fake", s.n_fake);
    if (j.contains("behavior")) s.behavior = j.at("behavior").get<SyntheticBehavior>();
    s.rounds = j.value("rounds", s.rounds);
    s.tolerance = j.value("tolerance", s.tolerance);
    s.rej_tolerance = j.value("rej_tolerance", s.rej_tolerance);
    s.derivation = j.value("derivation", std::string());
    s.validate();
    return s;
}

OracleScenario load_scenario(const std::filesystem::path& path) {
    try {
        return scenario_from_json(json::parse(read_file_bytes(path.string())));
    } catch (const json::exception& e) {
        throw ConfigError("scenario " + path.string() + ": " + e.what());
    }
}

OracleOutcome validate_pipeline(const OracleScenario& scenario, const PromptSpec& prompt,
                                const std::filesystem::path& image, int workers) {
    scenario.validate();
    OracleOutcome out;
    out.expected_auc = expected_auc(scenario.behavior, scenario.rounds);
    out.expected_rej = expected_full_rejection(scenario.behavior, scenario.rounds);

    Manifest manifest;
    manifest.entries.reserve(scenario.n_real + scenario.n_fake);
    for (std::size_t i = 0; i < scenario.n_fake; ++i) {
        ImageSample s;
        s.id = "fake_" + std::to_string(i);
        s.image_path = image;
        s.label = Label::Fake;
        s.generator = Generator::Diffusion;
        s.scope = Scope::Global;
        s.dataset_name = "synthetic_fake";
        manifest.entries.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < scenario.n_real; ++i) {
        ImageSample s;
        s.id = "real_" + std::to_string(i);
        s.image_path = image;
        s.dataset_name = "synthetic_real";
        manifest.entries.push_back(std::move(s));
    }

    RunPlan plan;
    plan.detect.rounds = scenario.rounds;
    plan.detect.prompt = prompt;
    plan.detect.provider.kind = ProviderKind::Synthetic;
    plan.detect.provider.model_id = "synthetic";
    plan.detect.provider.synthetic = scenario.behavior;
    plan.workers = workers;

    SyntheticProvider provider("synthetic", scenario.behavior);
    CachingImageEncoder encoder;
    ImageEncoder enc = [&encoder](const std::filesystem::path& p) { return encoder(p); };
    RunRecord record = run_batch(manifest, plan, StageSet{}, provider, provider, nullptr, enc);

    const auto summary = summarize(record, manifest);
    out.measured_auc = summary.auc.value_or(50.0) / 100.0;
    out.measured_rej = summary.rej / 100.0;

    const bool auc_ok = std::abs(out.measured_auc - out.expected_auc) <= scenario.tolerance;
    const bool rej_ok = std::abs(out.measured_rej - out.expected_rej) <= scenario.rej_tolerance;
    out.passed = auc_ok && rej_ok;
    if (!out.passed) {
        std::ostringstream msg;
        msg.precision(6);
        msg << "measured AUC " << out.measured_auc << " vs expected " << out.expected_auc
            << " (tol " << scenario.tolerance << "); measured REJ " << out.measured_rej
            << " vs expected " << out.expected_rej << " (tol " << scenario.rej_tolerance << ")";
        throw ToleranceExceeded(msg.str());
    }
    return out;
}

}  // namespace forensics
